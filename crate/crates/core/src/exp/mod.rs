//! Experiment orchestration: configuration, seeding, runners and CSV output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_override, ArmModel, EquilibriumConfig, ExperimentConfig, ProfileSpec, PRESETS};
pub use output::{fmt_float, summarize, EpochRow, SummaryRow, EPOCH_HEADER, SUMMARY_HEADER};
pub use run::{certify, equilibrate, loglog_slope, run_experiment, simulate, sweep, validate_utility, ExperimentOutput, SweepPoint};

use crate::env::StreamKey;

/// Stream key for `(base_seed, run, epoch, role_tag)`; distinct tuples never collide.
pub fn derive_seed(base_seed: u64, run: u64, epoch: u64, role_tag: u64) -> StreamKey {
    StreamKey::derive(base_seed, run, epoch, role_tag)
}
