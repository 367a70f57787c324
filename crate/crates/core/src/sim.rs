//! Closed-loop simulation, Monte Carlo cost estimates and exact evaluation of
//! linear strategies.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{sample_gamma, substream, transmit, Substream};
use crate::control::{local_action, local_common_action, remote_action, LinearPolicy};
use crate::error::{Error, Result};
use crate::estimator::{init_belief, step_belief_with_gain, BeliefState};
use crate::model::{NoiseKind, ValidatedModel};
use crate::numfmt::format_g;
use crate::quadform::quad_form;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub gamma: bool,
    pub u_l: DVector<f64>,
    pub u_r: DVector<f64>,
    pub stage_cost: f64,
    /// Covariance of the common belief; diagnostic only.
    pub belief_cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub total_cost: f64,
}

impl EpisodeTrace {
    /// CSV with columns `t, gamma, x[i].., x_hat[i].., u_L[i].., u_R[i].., stage_cost`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.steps.first() else { return out };
        let mut header = vec!["t".to_string(), "gamma".to_string()];
        for (name, len) in [
            ("x", first.x.len()),
            ("x_hat", first.x_hat.len()),
            ("u_L", first.u_l.len()),
            ("u_R", first.u_r.len()),
        ] {
            header.extend((0..len).map(|i| format!("{name}[{i}]")));
        }
        header.push("stage_cost".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for s in &self.steps {
            let mut row = vec![s.t.to_string(), u8::from(s.gamma).to_string()];
            for v in [&s.x, &s.x_hat, &s.u_l, &s.u_r] {
                row.extend(v.iter().map(|&x| format_g(x)));
            }
            row.push(format_g(s.stage_cost));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Draws `X_0` and `W_t` with the model's covariances.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    kind: NoiseKind,
    x0_mean: DVector<f64>,
    x0_root: DMatrix<f64>,
    noise_roots: Vec<DMatrix<f64>>,
}

impl NoiseSampler {
    pub fn new(model: &ValidatedModel) -> Self {
        Self {
            kind: model.noise_kind,
            x0_mean: model.x0_mean.clone(),
            x0_root: psd_sqrt(&model.x0_cov),
            noise_roots: model.noise_cov.iter().map(psd_sqrt).collect(),
        }
    }

    fn standard(&self, rng: &mut impl Rng, n: usize) -> DVector<f64> {
        match self.kind {
            NoiseKind::Gaussian => DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
            NoiseKind::RademacherScaled => DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }),
        }
    }

    pub fn initial_state(&self, rng: &mut impl Rng) -> DVector<f64> {
        &self.x0_mean + &self.x0_root * self.standard(rng, self.x0_mean.len())
    }

    pub fn process_noise(&self, rng: &mut impl Rng, t: usize) -> DVector<f64> {
        &self.noise_roots[t] * self.standard(rng, self.x0_mean.len())
    }
}

/// Symmetric square root of a PSD matrix; negative round-off eigenvalues are clamped.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// One closed-loop episode, seeded by `seed`.
pub fn run_episode(model: &ValidatedModel, policy: &LinearPolicy, seed: u64) -> Result<EpisodeTrace> {
    policy.check_dims(model)?;
    simulate(model, policy, &NoiseSampler::new(model), seed, 0, None)
}

/// One episode with the success indicators forced to `pattern` (one per step).
pub fn run_episode_with_drops(
    model: &ValidatedModel,
    policy: &LinearPolicy,
    pattern: &[bool],
    seed: u64,
) -> Result<EpisodeTrace> {
    policy.check_dims(model)?;
    check_pattern(model, pattern)?;
    simulate(model, policy, &NoiseSampler::new(model), seed, 0, Some(pattern))
}

fn check_pattern(model: &ValidatedModel, pattern: &[bool]) -> Result<()> {
    if pattern.len() == model.horizon + 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "drop pattern has {} entries, expected {}",
            pattern.len(),
            model.horizon + 1
        )))
    }
}

fn simulate(
    model: &ValidatedModel,
    policy: &LinearPolicy,
    sampler: &NoiseSampler,
    master_seed: u64,
    index: u64,
    pattern: Option<&[bool]>,
) -> Result<EpisodeTrace> {
    let mut init_rng = substream(master_seed, index, Substream::Init);
    let mut channel_rng = substream(master_seed, index, Substream::Channel);
    let mut noise_rng = substream(master_seed, index, Substream::Noise);
    let mut gamma_at = |t: usize| -> Result<bool> {
        match pattern {
            Some(p) => Ok(p[t]),
            None => sample_gamma(&mut channel_rng, model.p),
        }
    };

    let mut x = sampler.initial_state(&mut init_rng);
    let mut gamma = gamma_at(0)?;
    let mut belief: BeliefState = init_belief(model, &transmit(&x, gamma))?;
    let mut steps = Vec::with_capacity(model.horizon + 1);
    let mut total_cost = 0.0;

    for t in 0..=model.horizon {
        let x_hat = belief.mean.clone();
        let u_r = remote_action(policy, t, &x_hat)?;
        let u_l = local_action(policy, t, &x, &x_hat)?;
        let s = stack(&[&x, &u_l, &u_r]);
        let stage_cost = quad_form(&model.r[t], &s)?;
        total_cost += stage_cost;

        let next = if t < model.horizon {
            let x_next = &model.a * &x + &model.b_l * &u_l + &model.b_r * &u_r + sampler.process_noise(&mut noise_rng, t);
            let gamma_next = gamma_at(t + 1)?;
            let u_bar_l = local_common_action(policy, t, &x_hat)?;
            let next_belief = step_belief_with_gain(
                &belief,
                &policy.stages[t].deviation,
                model,
                &u_bar_l,
                &u_r,
                &transmit(&x_next, gamma_next),
            )?;
            Some((x_next, gamma_next, next_belief))
        } else {
            None
        };

        steps.push(TraceStep {
            t,
            x: x.clone(),
            x_hat,
            gamma,
            u_l,
            u_r,
            stage_cost,
            belief_cov: belief.cov.clone(),
        });

        if let Some((x_next, gamma_next, next_belief)) = next {
            x = x_next;
            gamma = gamma_next;
            belief = next_belief;
        }
    }
    Ok(EpisodeTrace { steps, total_cost })
}

/// `vecc(a, b, ...)`.
pub fn stack(parts: &[&DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(parts.iter().map(|v| v.len()).sum(), parts.iter().flat_map(|v| v.iter().copied()))
}

/// How independent episodes are scheduled. Results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// runs sequentially.
    #[default]
    Parallel,
}

/// Evaluates `f(i)` for `i in 0..n`, keeping index order in the output.
pub fn map_episodes<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n as u64).into_par_iter().map(f).collect()
        }
        _ => (0..n as u64).map(f).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub episodes: usize,
}

impl McEstimate {
    /// Sample mean and standard error; summation runs in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std_err: (var / n).sqrt(), episodes: samples.len() }
    }
}

pub fn monte_carlo_cost(
    model: &ValidatedModel,
    policy: &LinearPolicy,
    episodes: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    monte_carlo_cost_with(Execution::default(), model, policy, episodes, master_seed)
}

pub fn monte_carlo_cost_with(
    exec: Execution,
    model: &ValidatedModel,
    policy: &LinearPolicy,
    episodes: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    if episodes < 2 {
        return Err(Error::DimensionMismatch(format!("need at least 2 episodes, got {episodes}")));
    }
    policy.check_dims(model)?;
    let sampler = NoiseSampler::new(model);
    let costs = map_episodes(exec, episodes, |i| {
        simulate(model, policy, &sampler, master_seed, i, None).map(|tr| tr.total_cost)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&costs))
}

/// Exact expected total cost of a linear strategy.
///
/// Propagates the second moment `M_t = E[y yᵀ]` of `y = (X_t, X̂_t)`. Given
/// `y`, the next state is `Φ y + W` with `Φ = [A + B_L F_dev, B_L (F_L - F_dev) + B_R F_R]`;
/// the next estimate equals the next state on success and is
/// `(A + B_L F_L + B_R F_R) X̂_t` on a drop. The noise is zero-mean and
/// independent, so cross terms vanish and the two branches mix with weights
/// `1 - p` and `p`.
pub fn evaluate_linear_policy(model: &ValidatedModel, policy: &LinearPolicy) -> Result<f64> {
    policy.check_dims(model)?;
    let (n, n_l, n_r) = (model.n_x(), model.n_l(), model.n_r());
    let p = model.p;
    let eye = DMatrix::<f64>::identity(n, n);

    let mu = &model.x0_mean;
    let outer = mu * mu.transpose();
    let second = &model.x0_cov + &outer;
    let received = block2(&second, &second, &second, &second);
    let dropped = block2(&second, &outer, &outer, &outer);
    let mut moment = &received * (1.0 - p) + &dropped * p;

    let mut total = 0.0;
    for t in 0..=model.horizon {
        let g = &policy.stages[t];
        let mut c = DMatrix::zeros(model.n_s(), 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(&eye);
        c.view_mut((n, 0), (n_l, n)).copy_from(&g.deviation);
        c.view_mut((n, n), (n_l, n)).copy_from(&(&g.local - &g.deviation));
        c.view_mut((n + n_l, n), (n_r, n)).copy_from(&g.remote);
        total += (c.transpose() * &model.r[t] * &c * &moment).trace();

        if t == model.horizon {
            break;
        }
        let mut phi = DMatrix::zeros(n, 2 * n);
        phi.view_mut((0, 0), (n, n)).copy_from(&(&model.a + &model.b_l * &g.deviation));
        phi.view_mut((0, n), (n, n))
            .copy_from(&(&model.b_l * (&g.local - &g.deviation) + &model.b_r * &g.remote));
        let psi = &model.a + &model.b_l * &g.local + &model.b_r * &g.remote;

        let mut to_received = DMatrix::zeros(2 * n, 2 * n);
        to_received.view_mut((0, 0), (n, 2 * n)).copy_from(&phi);
        to_received.view_mut((n, 0), (n, 2 * n)).copy_from(&phi);
        let mut to_dropped = DMatrix::zeros(2 * n, 2 * n);
        to_dropped.view_mut((0, 0), (n, 2 * n)).copy_from(&phi);
        to_dropped.view_mut((n, n), (n, n)).copy_from(&psi);

        let w = &model.noise_cov[t];
        let zero = DMatrix::zeros(n, n);
        let noise_received = block2(w, w, w, w);
        let noise_dropped = block2(w, &zero, &zero, &zero);
        moment = (&to_received * &moment * to_received.transpose() + noise_received) * (1.0 - p)
            + (&to_dropped * &moment * to_dropped.transpose() + noise_dropped) * p;
    }
    Ok(total)
}

fn block2(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}
