//! Simulation framework for the strategic click-bandit.
//!
//! Arms choose click-through rates, a mechanism repeatedly recommends one arm,
//! clicks land with the chosen rate and post-click rewards reveal the arm's
//! true value. The crate provides:
//!
//! - [`env`]: problem instances, strategy profiles and the click/reward sampler.
//! - [`utility`]: the learner's utility family and the quantities derived from it.
//! - [`mech`]: UCB with screening (UCB-S) and the incentive-unaware baselines.
//! - [`sim`]: episode runner and strategic-regret metrics.
//! - [`arms`]: strategic arm models, best responses and ε-Nash certification.
//! - [`exp`]: experiment configuration, presets, CSV output and the CLI runner.

pub mod arms;
pub mod env;
pub mod error;
pub mod exp;
pub mod mech;
pub mod sim;
pub mod utility;

pub use error::{Error, Result};
