//! Linear strategies for the two controllers.
//!
//! Every strategy here has the form
//!
//! ```text
//! u_R = F_R x̂
//! u_L = F_L x̂ + F_dev (x - x̂)
//! ```
//!
//! where `x̂` is the common estimate. The optimal pair takes `(F_L, F_R)`
//! from the joint gain `K_t` and `F_dev` from the deviation gain `K̃_t`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::{substream, Substream};
use crate::error::{Error, Result};
use crate::model::{SystemModel, ValidatedModel};
use crate::riccati::{solve_backward, RiccatiSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct StageGains {
    /// `n_l x n_x`, applied to `x̂`.
    pub local: DMatrix<f64>,
    /// `n_l x n_x`, applied to `x - x̂`.
    pub deviation: DMatrix<f64>,
    /// `n_r x n_x`, applied to `x̂`.
    pub remote: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub stages: Vec<StageGains>,
}

impl LinearPolicy {
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    fn stage(&self, t: usize) -> Result<&StageGains> {
        self.stages.get(t).ok_or(Error::IndexOutOfRange { index: t, max: self.horizon() })
    }

    pub fn check_dims(&self, model: &SystemModel) -> Result<()> {
        if self.stages.len() != model.horizon + 1 {
            return Err(Error::DimensionMismatch(format!(
                "policy has {} stages, model has {}",
                self.stages.len(),
                model.horizon + 1
            )));
        }
        let n = model.n_x();
        for (t, s) in self.stages.iter().enumerate() {
            if s.local.shape() != (model.n_l(), n)
                || s.deviation.shape() != (model.n_l(), n)
                || s.remote.shape() != (model.n_r(), n)
            {
                return Err(Error::DimensionMismatch(format!("policy gains at t = {t} do not fit the model")));
            }
        }
        Ok(())
    }
}

pub fn optimal_policy(sol: &RiccatiSolution) -> LinearPolicy {
    let stages = (0..=sol.horizon())
        .map(|t| StageGains {
            local: sol.local_gain(t),
            deviation: sol.k_tilde[t].clone(),
            remote: sol.remote_gain(t),
        })
        .collect();
    LinearPolicy { stages }
}

pub fn remote_action(policy: &LinearPolicy, t: usize, x_hat: &DVector<f64>) -> Result<DVector<f64>> {
    let s = policy.stage(t)?;
    if x_hat.len() != s.remote.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "estimate of length {} for gain with {} columns",
            x_hat.len(),
            s.remote.ncols()
        )));
    }
    Ok(&s.remote * x_hat)
}

pub fn local_action(policy: &LinearPolicy, t: usize, x: &DVector<f64>, x_hat: &DVector<f64>) -> Result<DVector<f64>> {
    let s = policy.stage(t)?;
    if x.len() != s.local.ncols() || x_hat.len() != s.local.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "state/estimate of lengths {}/{} for gain with {} columns",
            x.len(),
            x_hat.len(),
            s.local.ncols()
        )));
    }
    Ok(&s.local * x_hat + &s.deviation * (x - x_hat))
}

/// Common part of the local action, `F_L x̂`.
pub fn local_common_action(policy: &LinearPolicy, t: usize, x_hat: &DVector<f64>) -> Result<DVector<f64>> {
    local_action(policy, t, x_hat, x_hat)
}

/// Full-information LQR gains for `(A, [B_L B_R], R_t)` applied to `x̂` by
/// both controllers; the local deviation gain is the LQR local rows.
pub fn certainty_equivalent(model: &ValidatedModel) -> Result<LinearPolicy> {
    let central = solve_backward(&model.clone().into_inner().with_p(0.0).validate()?)?;
    let stages = (0..=central.horizon())
        .map(|t| StageGains {
            local: central.local_gain(t),
            deviation: central.local_gain(t),
            remote: central.remote_gain(t),
        })
        .collect();
    Ok(LinearPolicy { stages })
}

/// The local controller stays idle; the remote one uses the LQR gains of the
/// plant with `B_L` removed.
pub fn no_local(model: &ValidatedModel) -> Result<LinearPolicy> {
    let (n_x, n_l) = (model.n_x(), model.n_l());
    let keep: Vec<usize> = (0..n_x).chain(n_x + n_l..model.n_s()).collect();
    let reduced = SystemModel {
        b_l: DMatrix::zeros(n_x, 0),
        r: model.r.iter().map(|r| r.select_rows(&keep).select_columns(&keep)).collect(),
        p: 0.0,
        ..model.clone().into_inner()
    }
    .validate()?;
    let sol = solve_backward(&reduced)?;
    let stages = (0..=sol.horizon())
        .map(|t| StageGains {
            local: DMatrix::zeros(n_l, n_x),
            deviation: DMatrix::zeros(n_l, n_x),
            remote: sol.remote_gain(t),
        })
        .collect();
    Ok(LinearPolicy { stages })
}

/// Adds an independent `±eps` to every gain entry.
pub fn perturbed(policy: &LinearPolicy, eps: f64, seed: u64) -> LinearPolicy {
    let mut rng = substream(seed, 0, Substream::Perturbation);
    let mut jitter = |m: &DMatrix<f64>| m.map(|v| if rng.random::<bool>() { v + eps } else { v - eps });
    let stages = policy
        .stages
        .iter()
        .map(|s| StageGains {
            local: jitter(&s.local),
            deviation: jitter(&s.deviation),
            remote: jitter(&s.remote),
        })
        .collect();
    LinearPolicy { stages }
}

pub const DEFAULT_PERTURBATION: f64 = 0.1;

/// Comparison strategies: `certainty-equivalent`, `no-local` and
/// `perturbed` (the optimal policy with `±0.1` jitter, seed 0).
pub fn baseline_policies(model: &ValidatedModel, sol: &RiccatiSolution) -> Result<Vec<(String, LinearPolicy)>> {
    Ok(vec![
        ("certainty-equivalent".to_string(), certainty_equivalent(model)?),
        ("no-local".to_string(), no_local(model)?),
        ("perturbed".to_string(), perturbed(&optimal_policy(sol), DEFAULT_PERTURBATION, 0)),
    ])
}

/// Resolves `optimal`, a baseline name, or `perturbed:EPS:SEED`.
pub fn policy_by_name(model: &ValidatedModel, sol: &RiccatiSolution, name: &str) -> Result<LinearPolicy> {
    match name {
        "optimal" => Ok(optimal_policy(sol)),
        "certainty-equivalent" => certainty_equivalent(model),
        "no-local" => no_local(model),
        "perturbed" => Ok(perturbed(&optimal_policy(sol), DEFAULT_PERTURBATION, 0)),
        _ => {
            let mut parts = name.split(':');
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some("perturbed"), Some(eps), Some(seed), None) => {
                    let eps: f64 = eps.parse().map_err(|_| Error::UnknownPolicy(name.to_string()))?;
                    let seed: u64 = seed.parse().map_err(|_| Error::UnknownPolicy(name.to_string()))?;
                    Ok(perturbed(&optimal_policy(sol), eps, seed))
                }
                _ => Err(Error::UnknownPolicy(name.to_string())),
            }
        }
    }
}
