//! Experiment orchestration: configuration, Monte-Carlo runs and output.

pub mod aec;
pub mod algorithm;
pub mod config;
pub mod experiment;
pub mod io;
pub mod sweep;
pub mod theory_compare;

pub use aec::{run_aec, synthetic_echo_path, AecAssets, FarEnd, AEC_STEP_SCALE, ECHO_PATH_LEN};
pub use algorithm::{AdaptiveFilter, AlgorithmSpec, Preset, StepOutcome};
pub use config::{ExperimentConfig, Mode};
pub use experiment::{
    random_unit_weights, run_sysid, run_sysid_with, run_tracking, AlgorithmSummary, Counters,
    ExperimentReport,
};
pub use io::{load_echo_path, load_wav, write_csv, write_echo_path, CsvTable};
pub use sweep::{cost_surface, run_sweep};
pub use theory_compare::{run_theory_compare, theory_rows, TheoryRow};

use crate::error::Result;

/// Validate `cfg` and run whichever experiment its mode names.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.mode() {
        Mode::Sysid => run_sysid(cfg),
        Mode::Tracking => run_tracking(cfg),
        Mode::Aec => run_aec(cfg, &AecAssets::from_config(cfg)?),
        Mode::Theory => run_theory_compare(cfg),
        Mode::Sweep => run_sweep(cfg),
    }
}
