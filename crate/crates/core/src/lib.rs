//! Robust total-least-squares adaptive filtering under the errors-in-variables
//! model, with online censoring, data reuse and steady-state theory.

pub mod censoring;
pub mod error;
pub mod filter;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod reuse;
pub mod signal;
pub mod theory;

pub use error::{Error, Result};
pub use filter::{CostModel, FilterState, Kernel, LimitFamily, RtgaParams};
pub use harness::{AlgorithmSpec, ExperimentConfig, ExperimentReport, Mode, Preset};
pub use metrics::LearningCurve;
pub use noise::{NoiseFamily, NoiseSpec};
