//! Backward recursion for the value function and optimal gains.
//!
//! The value function at time `t` for a common belief with mean `m` and
//! covariance `S` is `QF(P_t, m) + tr(P̃_t S) + e_t`. Working backward from
//! `P_{T+1} = P̃_{T+1} = 0`:
//!
//! ```text
//! H_t  = [A B_L B_R]ᵀ P_{t+1} [A B_L B_R]      G_t  = R_t + H_t
//! H̃_t = [A B_L B_R]ᵀ P̃_{t+1} [A B_L B_R]     G̃_t = R_t + (1-p) H_t + p H̃_t
//! P_t  = Schur complement of the (L,R) block of G_t
//! P̃_t = Schur complement of the L block of the (X,L) principal part of G̃_t
//! e_t  = e_{t+1} + tr(((1-p) P_{t+1} + p P̃_{t+1}) W_t)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BeliefState;
use crate::model::{from_rows, to_rows, ValidatedModel};
use crate::quadform::{check_pd, quad_form, schur_complement, symmetrize, PartitionedPd};

/// Per-step matrices of the backward recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub n_x: usize,
    pub n_l: usize,
    pub n_r: usize,
    pub p: f64,
    /// `horizon + 2` entries; the last is zero.
    pub p_mean: Vec<DMatrix<f64>>,
    /// `horizon + 2` entries; the last is zero.
    pub p_tilde: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub g_tilde: Vec<DMatrix<f64>>,
    pub h: Vec<DMatrix<f64>>,
    pub h_tilde: Vec<DMatrix<f64>>,
    /// Joint gain `(n_l + n_r) x n_x` from the common estimate to `(ū_L, u_R)`.
    pub k: Vec<DMatrix<f64>>,
    /// Local deviation gain `n_l x n_x` applied to `x - x̂`.
    pub k_tilde: Vec<DMatrix<f64>>,
    /// `horizon + 2` entries; the last is zero.
    pub e: Vec<f64>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.g.len() - 1
    }

    /// Rows of `K_t` driving the local controller.
    pub fn local_gain(&self, t: usize) -> DMatrix<f64> {
        self.k[t].rows(0, self.n_l).into_owned()
    }

    /// Rows of `K_t` driving the remote controller.
    pub fn remote_gain(&self, t: usize) -> DMatrix<f64> {
        self.k[t].rows(self.n_l, self.n_r).into_owned()
    }
}

pub fn solve_backward(model: &ValidatedModel) -> Result<RiccatiSolution> {
    let (n_x, n_l, n_r) = (model.n_x(), model.n_l(), model.n_r());
    let steps = model.horizon + 1;
    let p = model.p;
    let dyn_stack = model.stacked_dynamics();

    let mut p_mean = vec![DMatrix::zeros(n_x, n_x); steps + 1];
    let mut p_tilde = vec![DMatrix::zeros(n_x, n_x); steps + 1];
    let mut e = vec![0.0; steps + 1];
    let mut g = Vec::with_capacity(steps);
    let mut g_tilde = Vec::with_capacity(steps);
    let mut h = Vec::with_capacity(steps);
    let mut h_tilde = Vec::with_capacity(steps);
    let mut k = Vec::with_capacity(steps);
    let mut k_tilde = Vec::with_capacity(steps);

    for t in (0..steps).rev() {
        let h_t = symmetrize(&(dyn_stack.transpose() * &p_mean[t + 1] * &dyn_stack));
        let ht_t = symmetrize(&(dyn_stack.transpose() * &p_tilde[t + 1] * &dyn_stack));
        let g_t = symmetrize(&(&model.r[t] + &h_t));
        let gt_t = symmetrize(&(&model.r[t] + &h_t * (1.0 - p) + &ht_t * p));
        check_pd(&g_t, &format!("G_{t}"))?;
        check_pd(&gt_t, &format!("G~_{t}"))?;

        let joint = PartitionedPd::new(g_t.clone(), n_x)?;
        let local = PartitionedPd::new(gt_t.view((0, 0), (n_x + n_l, n_x + n_l)).into_owned(), n_x)?;

        p_mean[t] = schur_complement(&joint)?;
        p_tilde[t] = schur_complement(&local)?;
        k.push(joint.minimizing_gain()?);
        k_tilde.push(local.minimizing_gain()?);

        let next = &p_mean[t + 1] * (1.0 - p) + &p_tilde[t + 1] * p;
        e[t] = e[t + 1] + (next * &model.noise_cov[t]).trace();

        g.push(g_t);
        g_tilde.push(gt_t);
        h.push(h_t);
        h_tilde.push(ht_t);
    }
    for v in [&mut g, &mut g_tilde, &mut h, &mut h_tilde, &mut k, &mut k_tilde] {
        v.reverse();
    }

    Ok(RiccatiSolution { n_x, n_l, n_r, p, p_mean, p_tilde, g, g_tilde, h, h_tilde, k, k_tilde, e })
}

/// `QF(P_t, mean) + tr(P̃_t cov) + e_t`; zero at `t = horizon + 1`.
pub fn value_function(sol: &RiccatiSolution, t: usize, belief: &BeliefState) -> Result<f64> {
    let last = sol.horizon() + 1;
    if t > last {
        return Err(Error::IndexOutOfRange { index: t, max: last });
    }
    if belief.mean.len() != sol.n_x || belief.cov.shape() != (sol.n_x, sol.n_x) {
        return Err(Error::DimensionMismatch(format!(
            "belief of dimension {} for state dimension {}",
            belief.mean.len(),
            sol.n_x
        )));
    }
    Ok(quad_form(&sol.p_mean[t], &belief.mean)? + (&sol.p_tilde[t] * &belief.cov).trace() + sol.e[t])
}

/// Optimal total expected cost: `V_0` averaged over whether the initial
/// state got through (belief `δ_{X_0}`) or not (belief = prior).
pub fn optimal_expected_cost(sol: &RiccatiSolution, model: &ValidatedModel) -> Result<f64> {
    if sol.n_x != model.n_x() || sol.horizon() != model.horizon {
        return Err(Error::DimensionMismatch("solution does not belong to this model".into()));
    }
    let p = model.p;
    let spread = &sol.p_mean[0] * (1.0 - p) + &sol.p_tilde[0] * p;
    Ok(quad_form(&sol.p_mean[0], &model.x0_mean)? + (spread * &model.x0_cov).trace() + sol.e[0])
}

type RowMajor = Vec<Vec<f64>>;

/// JSON export of a [`RiccatiSolution`], matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub horizon: usize,
    pub n_x: usize,
    pub n_l: usize,
    pub n_r: usize,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_cost: Option<f64>,
    #[serde(rename = "P")]
    pub p_mean: Vec<RowMajor>,
    #[serde(rename = "P_tilde")]
    pub p_tilde: Vec<RowMajor>,
    #[serde(rename = "G")]
    pub g: Vec<RowMajor>,
    #[serde(rename = "G_tilde")]
    pub g_tilde: Vec<RowMajor>,
    #[serde(rename = "H")]
    pub h: Vec<RowMajor>,
    #[serde(rename = "H_tilde")]
    pub h_tilde: Vec<RowMajor>,
    #[serde(rename = "K")]
    pub k: Vec<RowMajor>,
    #[serde(rename = "K_tilde")]
    pub k_tilde: Vec<RowMajor>,
    pub e: Vec<f64>,
}

impl SolutionDocument {
    /// Every number is passed through `round` (e.g. to fix significant digits).
    pub fn from_solution(sol: &RiccatiSolution, optimal_cost: Option<f64>, round: impl Fn(f64) -> f64) -> Self {
        let mats = |v: &[DMatrix<f64>]| -> Vec<RowMajor> {
            v.iter().map(|m| to_rows(&m.map(&round))).collect()
        };
        Self {
            horizon: sol.horizon(),
            n_x: sol.n_x,
            n_l: sol.n_l,
            n_r: sol.n_r,
            p: sol.p,
            optimal_cost: optimal_cost.map(&round),
            p_mean: mats(&sol.p_mean),
            p_tilde: mats(&sol.p_tilde),
            g: mats(&sol.g),
            g_tilde: mats(&sol.g_tilde),
            h: mats(&sol.h),
            h_tilde: mats(&sol.h_tilde),
            k: mats(&sol.k),
            k_tilde: mats(&sol.k_tilde),
            e: sol.e.iter().map(|&x| round(x)).collect(),
        }
    }

    pub fn to_solution(&self) -> Result<RiccatiSolution> {
        let mats = |v: &[RowMajor], cols: usize, field: &str| -> Result<Vec<DMatrix<f64>>> {
            v.iter()
                .enumerate()
                .map(|(t, m)| {
                    let mat = from_rows(m, None, &format!("{field}[{t}]"))?;
                    // zero-column gains serialize as rows of empty arrays or as []
                    Ok(if mat.ncols() == 0 && cols > 0 { DMatrix::zeros(mat.nrows(), cols) } else { mat })
                })
                .collect()
        };
        let sol = RiccatiSolution {
            n_x: self.n_x,
            n_l: self.n_l,
            n_r: self.n_r,
            p: self.p,
            p_mean: mats(&self.p_mean, self.n_x, "P")?,
            p_tilde: mats(&self.p_tilde, self.n_x, "P_tilde")?,
            g: mats(&self.g, 0, "G")?,
            g_tilde: mats(&self.g_tilde, 0, "G_tilde")?,
            h: mats(&self.h, 0, "H")?,
            h_tilde: mats(&self.h_tilde, 0, "H_tilde")?,
            k: mats(&self.k, self.n_x, "K")?,
            k_tilde: mats(&self.k_tilde, self.n_x, "K_tilde")?,
            e: self.e.clone(),
        };
        let steps = self.horizon + 1;
        if sol.g.len() != steps || sol.p_mean.len() != steps + 1 || sol.e.len() != steps + 1 {
            return Err(Error::Schema("solution sequence lengths disagree with horizon".into()));
        }
        Ok(sol)
    }
}

/// Evaluates `V_t` at a point-mass belief.
pub fn value_at_state(sol: &RiccatiSolution, t: usize, x: &DVector<f64>) -> Result<f64> {
    value_function(sol, t, &BeliefState::point_mass(x.clone(), t))
}
