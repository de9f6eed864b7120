//! Experiment configuration.
//!
//! A TOML file with one table per concern. Unknown keys are rejected while
//! parsing; semantic checks run afterwards and report every problem at once.
//!
//! ```toml
//! [experiment]
//! mode = "sysid"          # sysid | tracking | aec | theory | sweep
//! case = 1
//! runs = 100
//! seed = 1
//!
//! [algorithm]
//! names = ["rtga", "proposed", "gdtls"]
//!
//! [algorithm.overrides.proposed]
//! mu = 0.0098
//!
//! [censoring]
//! p_ce = 0.7
//! estimator = "conventional"
//!
//! [reuse]
//! scheme = "idr"
//! l_reused = 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::censoring::{CensorConfig, ScaleEstimator, DEFAULT_TAU, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::reuse::{ReuseConfig, ReuseScheme};
use crate::signal::ShiftEvent;

use super::algorithm::{AlgorithmSpec, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sysid,
    Tracking,
    Aec,
    Theory,
    Sweep,
}

impl Mode {
    /// `(order, samples, runs)` used when the file leaves them out.
    pub fn default_sizes(self) -> (usize, usize, usize) {
        match self {
            Mode::Sysid => (9, 8000, 1000),
            Mode::Tracking => (9, 16000, 1000),
            Mode::Aec => (512, 200_000, 50),
            Mode::Theory => (9, 30_000, 200),
            Mode::Sweep => (9, 8000, 100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    #[serde(default = "default_case")]
    pub case: u8,
    pub order: Option<usize>,
    pub samples: Option<usize>,
    pub runs: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
}

fn default_case() -> u8 {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_tail() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverride {
    pub mu: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "default_names")]
    pub names: Vec<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, ParamOverride>,
}

fn default_names() -> Vec<String> {
    vec!["rtga".into(), "proposed".into()]
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            names: default_names(),
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensoringSection {
    #[serde(default = "default_pce")]
    pub p_ce: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_estimator")]
    pub estimator: ScaleEstimator,
}

fn default_pce() -> f64 {
    0.3
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_estimator() -> ScaleEstimator {
    ScaleEstimator::RobustMedian
}

impl Default for CensoringSection {
    fn default() -> Self {
        Self {
            p_ce: default_pce(),
            window: default_window(),
            tau: default_tau(),
            estimator: default_estimator(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReuseSection {
    #[serde(default = "default_scheme")]
    pub scheme: ReuseScheme,
    #[serde(default = "default_l_reused")]
    pub l_reused: usize,
    pub window: Option<usize>,
}

fn default_scheme() -> ReuseScheme {
    ReuseScheme::Idr
}
fn default_l_reused() -> usize {
    3
}

impl Default for ReuseSection {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            l_reused: default_l_reused(),
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSection {
    #[serde(default = "default_shifts")]
    pub shifts: Vec<ShiftEvent>,
    /// Reuse window applied when `[reuse] window` is absent.
    #[serde(default = "default_tracking_window")]
    pub default_window: usize,
}

fn default_shifts() -> Vec<ShiftEvent> {
    vec![ShiftEvent {
        time: 8000,
        amount: 3,
    }]
}
fn default_tracking_window() -> usize {
    200
}

impl Default for TrackingSection {
    fn default() -> Self {
        Self {
            shifts: default_shifts(),
            default_window: default_tracking_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AecSection {
    /// 16-bit mono PCM far-end signal. Synthetic AR(1) input when absent.
    pub far_end: Option<PathBuf>,
    /// Text file of 512 taps. Synthetic decaying path when absent.
    pub echo_path: Option<PathBuf>,
    #[serde(default = "default_pole")]
    pub input_pole: f64,
    #[serde(default = "default_decay")]
    pub echo_decay: f64,
    #[serde(default = "default_echo_seed")]
    pub echo_seed: u64,
    /// Reuse window applied when `[reuse] window` is absent.
    #[serde(default = "default_tracking_window")]
    pub default_window: usize,
    /// Multiplies every tabulated step size; the 512-tap filter needs
    /// smaller steps than the 9-tap presets.
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
}

fn default_step_scale() -> f64 {
    super::aec::AEC_STEP_SCALE
}

fn default_pole() -> f64 {
    0.9
}
fn default_decay() -> f64 {
    60.0
}
fn default_echo_seed() -> u64 {
    512
}

impl Default for AecSection {
    fn default() -> Self {
        Self {
            far_end: None,
            echo_path: None,
            input_pole: default_pole(),
            echo_decay: default_decay(),
            echo_seed: default_echo_seed(),
            default_window: default_tracking_window(),
            step_scale: default_step_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySetting {
    pub label: String,
    pub input: NoiseSpec,
    pub output: NoiseSpec,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    #[serde(default = "default_theory_mu")]
    pub mu: f64,
    #[serde(default = "default_pce_zero")]
    pub p_ce: f64,
    #[serde(default = "default_settings")]
    pub settings: Vec<TheorySetting>,
}

fn default_theory_mu() -> f64 {
    0.022
}
fn default_pce_zero() -> f64 {
    0.0
}

/// Gaussian noises at three levels, then Laplace output with b = 1.9.
pub fn default_settings() -> Vec<TheorySetting> {
    let mut v: Vec<TheorySetting> = [0.01, 0.05, 0.1]
        .into_iter()
        .map(|s2| TheorySetting {
            label: format!("gaussian_{s2}"),
            input: NoiseSpec::gaussian(s2),
            output: NoiseSpec::gaussian(s2),
            a: -100.0,
            b: 2.0,
            c: 0.1,
        })
        .collect();
    v.push(TheorySetting {
        label: "laplace_0.1".into(),
        input: NoiseSpec::gaussian(0.1),
        output: NoiseSpec::new(crate::noise::NoiseFamily::Laplace, 0.1),
        a: -100.0,
        b: 1.9,
        c: 0.1,
    });
    v
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            mu: default_theory_mu(),
            p_ce: 0.0,
            settings: default_settings(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Cost over a 2-tap weight grid.
    CostSurface,
    /// Tail NMSD as one parameter varies.
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Mu,
    A,
    B,
    C,
    PCe,
    LReused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_sweep_kind")]
    pub kind: SweepKind,
    pub parameter: Option<SweepParameter>,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Grid half-width around the true weights.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// True 2-tap weights for the surface.
    #[serde(default = "default_surface_w")]
    pub w_o: Vec<f64>,
    /// Input and output noise variance for the surface data.
    #[serde(default = "default_surface_noise")]
    pub noise_variance: f64,
}

fn default_sweep_kind() -> SweepKind {
    SweepKind::CostSurface
}
fn default_extent() -> f64 {
    2.0
}
fn default_points() -> usize {
    41
}
fn default_surface_w() -> Vec<f64> {
    vec![-0.6, 0.8]
}
fn default_surface_noise() -> f64 {
    0.1
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: default_sweep_kind(),
            parameter: None,
            values: Vec::new(),
            extent: default_extent(),
            points: default_points(),
            w_o: default_surface_w(),
            noise_variance: default_surface_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub censoring: CensoringSection,
    #[serde(default)]
    pub reuse: ReuseSection,
    #[serde(default)]
    pub tracking: TrackingSection,
    #[serde(default)]
    pub aec: AecSection,
    #[serde(default)]
    pub theory: TheorySection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    /// Defaults for `mode` with nothing else set.
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            experiment: ExperimentSection {
                mode,
                case: default_case(),
                order: None,
                samples: None,
                runs: None,
                seed: default_seed(),
                output: None,
                tail_fraction: default_tail(),
            },
            algorithm: AlgorithmSection::default(),
            censoring: CensoringSection::default(),
            reuse: ReuseSection::default(),
            tracking: TrackingSection::default(),
            aec: AecSection::default(),
            theory: TheorySection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Parse a file; relative asset paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.aec.far_end, &mut cfg.aec.echo_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn mode(&self) -> Mode {
        self.experiment.mode
    }

    pub fn order(&self) -> usize {
        self.experiment.order.unwrap_or(self.mode().default_sizes().0)
    }

    pub fn samples(&self) -> usize {
        self.experiment.samples.unwrap_or(self.mode().default_sizes().1)
    }

    pub fn runs(&self) -> usize {
        self.experiment.runs.unwrap_or(self.mode().default_sizes().2)
    }

    pub fn censor_config(&self) -> Result<CensorConfig> {
        let c = &self.censoring;
        CensorConfig::new(c.p_ce, c.window, c.tau, c.estimator)
    }

    pub fn reuse_config(&self) -> Result<ReuseConfig> {
        let r = &self.reuse;
        let window = r.window.or(match self.mode() {
            Mode::Tracking => Some(self.tracking.default_window),
            Mode::Aec => Some(self.aec.default_window),
            _ => None,
        });
        ReuseConfig::new(r.scheme, r.l_reused, window)
    }

    /// Resolved algorithm list, in the configured order.
    pub fn algorithms(&self) -> Result<Vec<AlgorithmSpec>> {
        self.algorithm
            .names
            .iter()
            .map(|name| self.algorithm_named(name))
            .collect()
    }

    fn algorithm_named(&self, name: &str) -> Result<AlgorithmSpec> {
        let preset: Preset = name.parse()?;
        let mut spec = AlgorithmSpec::preset(preset, self.experiment.case)?;
        if self.mode() == Mode::Aec {
            spec.params.mu *= self.aec.step_scale;
        }
        if preset.uses_censoring() {
            spec = spec
                .with_censor(Some(self.censor_config()?))
                .with_reuse(self.reuse_config()?);
        }
        if let Some(o) = self.algorithm.overrides.get(name) {
            let p = &mut spec.params;
            p.mu = o.mu.unwrap_or(p.mu);
            p.a = o.a.unwrap_or(p.a);
            p.b = o.b.unwrap_or(p.b);
            p.c = o.c.unwrap_or(p.c);
            p.phi = o.phi.unwrap_or(p.phi);
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Every semantic problem, collected before any computation runs.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |r: Result<()>| {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        };
        let e = &self.experiment;
        if !(1..=5).contains(&e.case) {
            check(Err(Error::InvalidCase(e.case)));
        }
        if self.runs() < 1 {
            check(Err(Error::InvalidParameter("runs must be >= 1".into())));
        }
        if self.order() < 1 {
            check(Err(Error::InvalidParameter("order must be >= 1".into())));
        }
        if self.samples() <= self.order() {
            check(Err(Error::InvalidParameter(format!(
                "samples = {} must exceed the filter order {}",
                self.samples(),
                self.order()
            ))));
        }
        if !(e.tail_fraction > 0.0 && e.tail_fraction <= 1.0) {
            check(Err(Error::InvalidParameter(format!(
                "tail_fraction = {} outside (0, 1]",
                e.tail_fraction
            ))));
        }
        if self.algorithm.names.is_empty() && matches!(self.mode(), Mode::Sysid | Mode::Tracking | Mode::Aec | Mode::Sweep) {
            check(Err(Error::InvalidParameter("algorithm.names is empty".into())));
        }
        for name in self.algorithm.overrides.keys() {
            if !self.algorithm.names.contains(name) {
                check(Err(Error::InvalidParameter(format!(
                    "override for {name:?}, which is not listed in algorithm.names"
                ))));
            }
        }
        if (1..=5).contains(&e.case) {
            for name in &self.algorithm.names {
                check(self.algorithm_named(name).map(|_| ()));
            }
        }
        check(self.censor_config().map(|_| ()));
        check(self.reuse_config().map(|_| ()));
        match self.mode() {
            Mode::Tracking => {
                if self.tracking.shifts.iter().any(|s| s.time >= self.samples()) {
                    check(Err(Error::InvalidParameter(
                        "a tracking shift lies beyond the run length".into(),
                    )));
                }
            }
            Mode::Aec => {
                for p in [&self.aec.far_end, &self.aec.echo_path].into_iter().flatten() {
                    if !p.exists() {
                        check(Err(Error::InvalidParameter(format!(
                            "asset {} does not exist",
                            p.display()
                        ))));
                    }
                }
                if !(self.aec.step_scale > 0.0) {
                    check(Err(Error::InvalidParameter(format!(
                        "aec.step_scale = {} must be > 0",
                        self.aec.step_scale
                    ))));
                }
                if !(self.aec.input_pole.abs() < 1.0) {
                    check(Err(Error::InvalidParameter(format!(
                        "input_pole = {} must satisfy |p| < 1",
                        self.aec.input_pole
                    ))));
                }
                if self.aec.echo_path.is_some() && self.order() != super::aec::ECHO_PATH_LEN {
                    check(Err(Error::InvalidParameter(format!(
                        "an echo-path file requires order {}",
                        super::aec::ECHO_PATH_LEN
                    ))));
                }
            }
            Mode::Theory => {
                if self.order() > crate::theory::MAX_THEORY_ORDER {
                    check(Err(Error::InvalidParameter(format!(
                        "theory mode supports order <= {}",
                        crate::theory::MAX_THEORY_ORDER
                    ))));
                }
                if !(self.theory.mu > 0.0) {
                    check(Err(Error::InvalidParameter("theory.mu must be > 0".into())));
                }
                if !(0.0..1.0).contains(&self.theory.p_ce) {
                    check(Err(Error::InvalidRatio(self.theory.p_ce)));
                }
                for s in &self.theory.settings {
                    check(s.input.validate());
                    check(s.output.validate());
                    if !(s.input.variance > 0.0) {
                        check(Err(Error::InvalidParameter(format!(
                            "setting {}: input variance must be > 0",
                            s.label
                        ))));
                    }
                }
            }
            Mode::Sweep => {
                let s = &self.sweep;
                match s.kind {
                    SweepKind::CostSurface => {
                        if s.w_o.len() != 2 {
                            check(Err(Error::InvalidParameter(
                                "cost surface needs a 2-tap w_o".into(),
                            )));
                        }
                        if s.points < 2 || !(s.extent > 0.0) || !(s.noise_variance >= 0.0) {
                            check(Err(Error::InvalidParameter(
                                "cost surface needs points >= 2, extent > 0 and noise_variance >= 0".into(),
                            )));
                        }
                    }
                    SweepKind::Parameter => {
                        if s.parameter.is_none() || s.values.is_empty() {
                            check(Err(Error::InvalidParameter(
                                "parameter sweep needs sweep.parameter and sweep.values".into(),
                            )));
                        }
                    }
                }
            }
            Mode::Sysid => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_file_takes_mode_defaults() {
        let c = parse("[experiment]\nmode = \"aec\"\n").unwrap();
        assert_eq!((c.order(), c.samples(), c.runs()), (512, 200_000, 50));
        assert_eq!(c.reuse_config().unwrap().window_cap, Some(200));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse("[experiment]\nmode = \"sysid\"\nbogus = 1\n").is_err());
        assert!(parse("[experiment]\nmode = \"sysid\"\n[censoring]\npce = 0.3\n").is_err());
        assert!(parse("[experiment]\nmode = \"sysid\"\n[nonsense]\n").is_err());
    }

    #[test]
    fn validation_reports_everything() {
        let c = parse(
            "[experiment]\nmode = \"sysid\"\ncase = 9\nruns = 0\nsamples = 5\n\
             [censoring]\np_ce = 1.0\n[reuse]\nl_reused = 3\nwindow = 2\n",
        )
        .unwrap();
        match c.validate() {
            Err(Error::Config(list)) => assert!(list.len() >= 5, "{list:?}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn overrides_apply() {
        let c = parse(
            "[experiment]\nmode = \"sysid\"\n[algorithm]\nnames = [\"rtga\", \"proposed\"]\n\
             [algorithm.overrides.rtga]\nmu = 0.01\nc = 0.3\n",
        )
        .unwrap();
        c.validate().unwrap();
        let algs = c.algorithms().unwrap();
        assert_eq!(algs[0].params.mu, 0.01);
        assert_eq!(algs[0].params.c, 0.3);
        assert_eq!(algs[1].params.mu, 0.0098);
        assert!(algs[1].censor.is_some());
    }

    #[test]
    fn missing_assets_are_reported() {
        let c = parse("[experiment]\nmode = \"aec\"\n[aec]\nfar_end = \"/nonexistent/x.wav\"\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn serializes_back() {
        let c = ExperimentConfig::for_mode(Mode::Theory);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }
}
