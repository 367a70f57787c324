//! Common estimate of the plant state shared by both controllers.
//!
//! The belief is carried as its first two moments. On a received packet it
//! collapses to the transmitted state; on a drop the mean moves with the
//! common part of the control and the covariance is pushed through the
//! closed-loop deviation dynamics `A + B_L F_dev`.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelOutput;
use crate::error::{Error, Result};
use crate::model::ValidatedModel;
use crate::quadform::symmetrize;
use crate::riccati::RiccatiSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub t: usize,
}

impl BeliefState {
    pub fn point_mass(x: DVector<f64>, t: usize) -> Self {
        let n = x.len();
        Self { mean: x, cov: DMatrix::zeros(n, n), t }
    }
}

pub fn init_belief(model: &ValidatedModel, z0: &ChannelOutput) -> Result<BeliefState> {
    match z0 {
        ChannelOutput::Received(x) => {
            check_len(x, model.n_x(), "received state")?;
            Ok(BeliefState::point_mass(x.clone(), 0))
        }
        ChannelOutput::Dropped => Ok(BeliefState { mean: model.x0_mean.clone(), cov: model.x0_cov.clone(), t: 0 }),
    }
}

/// One step of the estimator with the optimal deviation gain `K̃_t`.
pub fn step_belief(
    belief: &BeliefState,
    sol: &RiccatiSolution,
    model: &ValidatedModel,
    u_bar_l: &DVector<f64>,
    u_r: &DVector<f64>,
    z_next: &ChannelOutput,
) -> Result<BeliefState> {
    let gain = sol.k_tilde.get(belief.t).ok_or(Error::IndexOutOfRange {
        index: belief.t,
        max: sol.horizon(),
    })?;
    step_belief_with_gain(belief, gain, model, u_bar_l, u_r, z_next)
}

/// One step of the estimator when the local controller's deviation action is
/// `deviation_gain · (x - x̂)`.
pub fn step_belief_with_gain(
    belief: &BeliefState,
    deviation_gain: &DMatrix<f64>,
    model: &ValidatedModel,
    u_bar_l: &DVector<f64>,
    u_r: &DVector<f64>,
    z_next: &ChannelOutput,
) -> Result<BeliefState> {
    let n = model.n_x();
    if belief.t >= model.horizon {
        return Err(Error::IndexOutOfRange { index: belief.t + 1, max: model.horizon });
    }
    check_len(&belief.mean, n, "belief mean")?;
    check_len(u_bar_l, model.n_l(), "local common action")?;
    check_len(u_r, model.n_r(), "remote action")?;
    if deviation_gain.shape() != (model.n_l(), n) {
        return Err(Error::DimensionMismatch(format!(
            "deviation gain is {}x{}, expected {}x{n}",
            deviation_gain.nrows(),
            deviation_gain.ncols(),
            model.n_l()
        )));
    }
    let t = belief.t + 1;
    match z_next {
        ChannelOutput::Received(x) => {
            check_len(x, n, "received state")?;
            Ok(BeliefState::point_mass(x.clone(), t))
        }
        ChannelOutput::Dropped => {
            let mean = &model.a * &belief.mean + &model.b_l * u_bar_l + &model.b_r * u_r;
            let closed = &model.a + &model.b_l * deviation_gain;
            let cov = symmetrize(&(&closed * &belief.cov * closed.transpose() + &model.noise_cov[belief.t]));
            Ok(BeliefState { mean, cov, t })
        }
    }
}

fn check_len(v: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())))
    }
}
