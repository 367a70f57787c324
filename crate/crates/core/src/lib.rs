//! Optimal control of a plant driven by a local and a remote controller that
//! share state over a packet-drop channel with acknowledgments.
//!
//! The local controller sees the state; the remote controller only sees what
//! gets through the channel. Both keep a common estimate of the state, and the
//! optimal strategies are linear in that estimate and (for the local
//! controller) in the estimation error.
//!
//! * [`model`]: problem instances and the JSON configuration format
//! * [`quadform`]: Schur-complement minimization kernels
//! * [`riccati`]: backward recursion, value function, optimal cost
//! * [`estimator`]: common estimate and its covariance
//! * [`control`]: optimal and baseline linear strategies
//! * [`channel`]: erasure channel and seeded random substreams
//! * [`sim`]: closed-loop simulation, Monte Carlo and exact evaluation

pub mod channel;
pub mod control;
pub mod error;
pub mod estimator;
pub mod model;
pub mod numfmt;
pub mod quadform;
pub mod riccati;
pub mod sim;

pub use error::{Error, Result};
pub use model::{load_model, NoiseKind, SystemModel, ValidatedModel};
pub use riccati::{optimal_expected_cost, solve_backward, RiccatiSolution};
