//! Random model generators and oracles shared by the integration tests.
//! Nothing here calls into the Riccati or Schur code paths of the library.
#![allow(dead_code)]

use dropctl::{NoiseKind, SystemModel, ValidatedModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROBABILITIES: [f64; 4] = [0.0, 0.3, 0.7, 1.0];

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_x: usize,
    pub max_l: usize,
    pub max_r: usize,
    pub max_horizon: usize,
}

pub const ACCEPTANCE_LIMITS: Limits = Limits { max_x: 3, max_l: 2, max_r: 2, max_horizon: 8 };

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_pd(rng: &mut impl Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let m = uniform(rng, n, n, 1.0);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

fn random_psd(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let rank = rng.random_range(0..=n);
    let m = uniform(rng, n, rank, 1.0);
    &m * m.transpose() * scale
}

pub fn random_model(rng: &mut impl Rng, n_x: usize, n_l: usize, n_r: usize, horizon: usize, p: f64) -> ValidatedModel {
    let n_s = n_x + n_l + n_r;
    let steps = horizon + 1;
    let r = if rng.random::<bool>() {
        vec![random_pd(rng, n_s, 0.3); steps]
    } else {
        (0..steps).map(|_| random_pd(rng, n_s, 0.3)).collect()
    };
    let noise_cov = if rng.random::<bool>() {
        vec![random_psd(rng, n_x, 0.3); steps]
    } else {
        (0..steps).map(|_| random_psd(rng, n_x, 0.3)).collect()
    };
    SystemModel {
        horizon,
        a: uniform(rng, n_x, n_x, 0.9),
        b_l: uniform(rng, n_x, n_l, 1.0),
        b_r: uniform(rng, n_x, n_r, 1.0),
        r,
        x0_mean: DVector::from_fn(n_x, |_, _| rng.random_range(-1.0..1.0)),
        x0_cov: random_psd(rng, n_x, 0.5),
        noise_cov,
        noise_kind: NoiseKind::Gaussian,
        p,
    }
    .validate()
    .expect("generated model is valid")
}

/// `count` models cycling through [`PROBABILITIES`].
pub fn fuzz_suite(count: usize, seed: u64, lim: Limits) -> Vec<ValidatedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n_x = rng.random_range(1..=lim.max_x);
            let n_l = rng.random_range(0..=lim.max_l);
            let n_r = rng.random_range(0..=lim.max_r);
            let horizon = rng.random_range(0..=lim.max_horizon);
            random_model(&mut rng, n_x, n_l, n_r, horizon, PROBABILITIES[i % PROBABILITIES.len()])
        })
        .collect()
}

pub fn with_p(model: &ValidatedModel, p: f64) -> ValidatedModel {
    model.clone().into_inner().with_p(p).validate().unwrap()
}

/// Textbook finite-horizon LQR with cross terms, written with explicit
/// inverses: returns `(P_t for t = 0..=T+1, K_t for t = 0..=T)`, `u = K_t x`.
pub fn lqr_oracle(model: &SystemModel) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let n = model.a.nrows();
    let m = model.b_l.ncols() + model.b_r.ncols();
    let mut b = DMatrix::zeros(n, m);
    b.columns_mut(0, model.b_l.ncols()).copy_from(&model.b_l);
    b.columns_mut(model.b_l.ncols(), model.b_r.ncols()).copy_from(&model.b_r);
    let a = &model.a;
    let steps = model.horizon + 1;
    let mut ps = vec![DMatrix::zeros(n, n); steps + 1];
    let mut ks = vec![DMatrix::zeros(m, n); steps];
    for t in (0..steps).rev() {
        let r = &model.r[t];
        let q = r.view((0, 0), (n, n)).into_owned();
        let cross = r.view((0, n), (n, m)).into_owned();
        let ru = r.view((n, n), (m, m)).into_owned();
        let s = &ps[t + 1];
        let inner = &ru + b.transpose() * s * &b;
        let inv = if m == 0 { DMatrix::zeros(0, 0) } else { inner.try_inverse().expect("invertible") };
        let coupling = cross.transpose() + b.transpose() * s * a;
        ks[t] = -(&inv * &coupling);
        ps[t] = q + a.transpose() * s * a - coupling.transpose() * &inv * &coupling;
    }
    (ps, ks)
}

/// Full-information optimal cost `E[X_0ᵀ P_0 X_0] + Σ tr(P_{t+1} W_t)`.
pub fn lqr_cost(model: &SystemModel) -> f64 {
    let (ps, _) = lqr_oracle(model);
    let mu = &model.x0_mean;
    let mut cost = (mu.transpose() * &ps[0] * mu)[(0, 0)] + (&ps[0] * &model.x0_cov).trace();
    for t in 0..=model.horizon {
        cost += (&ps[t + 1] * &model.noise_cov[t]).trace();
    }
    cost
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minimizes `QF(G, (x, u))` over `u` by gradient descent from `u = 0`.
pub fn brute_min_vector(g: &DMatrix<f64>, split: usize, x: &DVector<f64>) -> f64 {
    let m = g.nrows() - split;
    let gux = g.view((split, 0), (m, split)).into_owned();
    let guu = g.view((split, split), (m, m)).into_owned();
    let step = 0.5 / frobenius(&guu).max(1e-300);
    let mut u = DVector::zeros(m);
    for _ in 0..2_000_000 {
        let grad = (&gux * x + &guu * &u) * 2.0;
        if grad.norm() < 1e-14 {
            break;
        }
        u -= grad * step;
    }
    let s = DVector::from_iterator(split + m, x.iter().chain(u.iter()).copied());
    (s.transpose() * g * &s)[(0, 0)]
}

/// Minimizes `tr(G cov(X, F X))` over linear gains `F` by gradient descent.
pub fn brute_min_functional(g: &DMatrix<f64>, split: usize, cov: &DMatrix<f64>) -> f64 {
    let m = g.nrows() - split;
    let gxx = g.view((0, 0), (split, split)).into_owned();
    let gux = g.view((split, 0), (m, split)).into_owned();
    let guu = g.view((split, split), (m, m)).into_owned();
    let step = 0.5 / (frobenius(&guu) * frobenius(cov)).max(1e-300);
    let mut f = DMatrix::zeros(m, split);
    for _ in 0..2_000_000 {
        let grad = (&gux * cov + &guu * &f * cov) * 2.0;
        if frobenius(&grad) < 1e-14 {
            break;
        }
        f -= grad * step;
    }
    (&gxx * cov).trace() + 2.0 * (gux.transpose() * &f * cov).trace() + (&guu * &f * cov * f.transpose()).trace()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    if a.is_empty() {
        return 0.0;
    }
    (a - b).abs().max()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
