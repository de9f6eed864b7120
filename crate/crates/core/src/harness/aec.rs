//! Acoustic echo cancellation on a 512-tap echo path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::case_spec;
use crate::signal::{Ar1, TrueSystem};

use super::config::ExperimentConfig;
use super::experiment::{
    dedupe_labels, monte_carlo, run_trial, AlgorithmSummary, Deviation, ExperimentReport, TrialPlan,
};
use super::io::{load_echo_path, load_wav, Audio};

pub const ECHO_PATH_LEN: usize = 512;

/// Default step scale for echo cancellation: brings the RTGA Case-1 step
/// from 0.022 down to 0.005.
pub const AEC_STEP_SCALE: f64 = 0.005 / 0.022;

#[derive(Debug, Clone, PartialEq)]
pub enum FarEnd {
    /// Unit-variance AR(1) process, regenerated per run from the run seed.
    Synthetic { pole: f64 },
    Recorded(Audio),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AecAssets {
    pub far_end: FarEnd,
    pub echo_path: Vec<f64>,
    pub synthetic_path: bool,
}

/// Gaussian taps under an exponential envelope `exp(−k/decay)`, unit norm.
pub fn synthetic_echo_path(seed: u64, decay: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: Vec<f64> = (0..ECHO_PATH_LEN)
        .map(|k| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * (-(k as f64) / decay).exp()
        })
        .collect();
    let n = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.into_iter().map(|v| v / n).collect()
}

impl AecAssets {
    pub fn new(far_end: FarEnd, echo_path: Vec<f64>) -> Result<Self> {
        let a = Self {
            far_end,
            echo_path,
            synthetic_path: false,
        };
        a.validate()?;
        Ok(a)
    }

    /// Files named in the config, falling back to the synthetic signals.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let s = &cfg.aec;
        let far_end = match &s.far_end {
            Some(p) => FarEnd::Recorded(load_wav(p)?),
            None => FarEnd::Synthetic { pole: s.input_pole },
        };
        let (echo_path, synthetic_path) = match &s.echo_path {
            Some(p) => (load_echo_path(p)?, false),
            None => (synthetic_echo_path(s.echo_seed, s.echo_decay), true),
        };
        let a = Self {
            far_end,
            echo_path,
            synthetic_path,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.echo_path.len() != ECHO_PATH_LEN {
            return Err(Error::Dimension {
                expected: ECHO_PATH_LEN,
                actual: self.echo_path.len(),
            });
        }
        if self.echo_path.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidSystem("echo path is all zeros".into()));
        }
        if let FarEnd::Recorded(a) = &self.far_end {
            if a.samples.is_empty() {
                return Err(Error::InvalidParameter("far-end audio is empty".into()));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        matches!(&self.far_end, FarEnd::Recorded(a) if a.samples.iter().all(|s| *s == 0.0))
    }
}

enum Input<'a> {
    Ar(Ar1),
    Audio(std::iter::Copied<std::slice::Iter<'a, f64>>),
}

impl Iterator for Input<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match self {
            Input::Ar(a) => a.next(),
            Input::Audio(a) => a.next(),
        }
    }
}

/// NMSD and ERLE curves for every configured algorithm. The echo path is
/// shared by all runs; input and noises follow the run seed.
pub fn run_aec(cfg: &ExperimentConfig, assets: &AecAssets) -> Result<ExperimentReport> {
    cfg.validate()?;
    assets.validate()?;
    let order = cfg.order();
    if order != ECHO_PATH_LEN {
        return Err(Error::InvalidParameter(format!(
            "echo cancellation needs order {ECHO_PATH_LEN}, got {order}"
        )));
    }
    let specs = cfg.algorithms()?;
    let noise = case_spec(cfg.experiment.case)?;
    let mut notes = Vec::new();
    let mut samples = cfg.samples();
    match &assets.far_end {
        FarEnd::Synthetic { pole } => notes.push(format!("synthetic far-end: AR(1), pole {pole}")),
        FarEnd::Recorded(a) => {
            if a.samples.len() < samples {
                notes.push(format!(
                    "far-end audio holds {} samples; run length reduced from {samples}",
                    a.samples.len()
                ));
                samples = a.samples.len();
            }
        }
    }
    if samples <= order {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples cannot fill a {order}-tap delay line"
        )));
    }
    if assets.synthetic_path {
        notes.push(format!(
            "synthetic echo path: seed {}, decay {}",
            cfg.aec.echo_seed, cfg.aec.echo_decay
        ));
    }
    if assets.is_silent() {
        notes.push("far-end audio is silent: degenerate input, NMSD cannot decrease".into());
    }
    let plan = TrialPlan {
        specs: &specs,
        order,
        samples,
        deviation: Deviation::Normalized,
        track_erle: true,
    };
    let base = cfg.experiment.seed;
    let agg = monte_carlo(&plan, cfg.runs(), |r| {
        let seed = base.wrapping_add(r as u64);
        let system = TrueSystem::new(assets.echo_path.clone())?;
        let input = match &assets.far_end {
            FarEnd::Synthetic { pole } => Input::Ar(Ar1::new(*pole, seed)?),
            FarEnd::Recorded(a) => Input::Audio(a.samples.iter().copied()),
        };
        run_trial(&plan, system, input, noise, seed)
    })?;
    let mut report = ExperimentReport::new(
        cfg.mode(),
        format!(
            "mode = aec, case = {}, order = {order}, samples = {samples}, runs = {}, seed = {}",
            cfg.experiment.case,
            cfg.runs(),
            base
        ),
    );
    report.notes = notes;
    for (k, spec) in specs.iter().enumerate() {
        let curve = agg.deviation[k].finish();
        let erle = agg.erle[k].finish();
        let mut s = AlgorithmSummary::new(
            spec,
            order,
            &curve,
            cfg.experiment.tail_fraction,
            agg.counters[k],
        );
        s.final_erle_db = Some(erle.tail_mean_db(cfg.experiment.tail_fraction));
        report.summaries.push(s);
        report.curves.push((spec.label(), curve));
        report.erle.push((spec.label(), erle));
    }
    dedupe_labels(&mut report);
    Ok(report)
}
