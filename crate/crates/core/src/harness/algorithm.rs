//! Named algorithm presets and the per-instance filter engine.

use std::fmt;
use std::str::FromStr;

use crate::censoring::{CensorConfig, OnlineCensor, ScaleEstimator};
use crate::error::{Error, Result};
use crate::filter::{CostModel, FilterState, Kernel, LimitFamily, RtgaParams};
use crate::noise::case_spec;
use crate::reuse::{ReuseConfig, ReusePass, ReuseScheme, ReuseStats, SampleHistory};

/// Case-1 RTGA `c` as printed in the parameter table. The preset uses 0.1,
/// the value that reproduces the tabulated Case-1 steady state.
pub const CASE1_RTGA_TABULATED_C: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Rtga,
    /// RTGA with censoring and reuse.
    Proposed,
    Gdtls,
    Tlmp,
    Tlmf,
    Ltls,
    Mtc,
    Mtgc,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Rtga,
        Preset::Proposed,
        Preset::Gdtls,
        Preset::Tlmp,
        Preset::Tlmf,
        Preset::Ltls,
        Preset::Mtc,
        Preset::Mtgc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rtga => "rtga",
            Preset::Proposed => "proposed",
            Preset::Gdtls => "gdtls",
            Preset::Tlmp => "tlmp",
            Preset::Tlmf => "tlmf",
            Preset::Ltls => "ltls",
            Preset::Mtc => "mtc",
            Preset::Mtgc => "mtgc",
        }
    }

    pub fn uses_censoring(self) -> bool {
        self == Preset::Proposed
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown algorithm {s:?}; expected one of {}",
                    Preset::ALL.map(|p| p.name()).join(", ")
                ))
            })
    }
}

/// `(a, b, c, μ)` for RTGA and the proposed variant, per case.
fn rtga_row(case_id: u8) -> (f64, f64, f64, f64) {
    match case_id {
        1 => (-100.0, 2.0, 0.1, 0.022),
        2 => (-100.0, 2.0, 0.1, 0.022),
        3 => (-100.0, 1.5, 0.2, 0.47),
        4 => (-1000.0, 8.0, 0.6, 0.055),
        _ => (-100.0, 2.3, 1.5, 0.02),
    }
}

fn proposed_row(case_id: u8) -> (f64, f64, f64, f64) {
    match case_id {
        1 => (-100.0, 2.0, 0.1, 0.0098),
        2 => (-100.0, 2.0, 0.18, 0.0088),
        3 => (-100.0, 1.5, 0.1, 0.155),
        4 => (-1000.0, 8.0, 0.6, 0.025),
        _ => (-100.0, 2.29, 1.2, 0.01),
    }
}

fn gdtls_mu(case_id: u8) -> f64 {
    [0.0022, 0.0022, 0.25, 0.12, 0.05][case_id as usize - 1]
}

fn mtc_mu(case_id: u8) -> f64 {
    [0.003, 0.003, 0.26, 0.17, 0.03][case_id as usize - 1]
}

fn mtgc_row(case_id: u8) -> (f64, f64) {
    [(2.0, 0.003), (2.0, 0.006), (1.56, 0.18), (6.0, 0.055), (2.34, 0.05)][case_id as usize - 1]
}

/// φ = σₒ²/σᵢ² from the base (non-impulsive) variances of a case.
pub fn case_phi(case_id: u8) -> Result<f64> {
    let (input, output) = case_spec(case_id)?;
    Ok(output.variance / input.variance)
}

/// One configured algorithm: kernel, parameters, censoring and reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub preset: Preset,
    pub kernel: Kernel,
    pub params: RtgaParams,
    pub censor: Option<CensorConfig>,
    pub reuse: ReuseConfig,
}

impl AlgorithmSpec {
    /// Tabulated parameters for `case_id`. The proposed preset defaults to
    /// IDR with three reused samples and 30% censoring.
    pub fn preset(preset: Preset, case_id: u8) -> Result<Self> {
        let phi = case_phi(case_id)?;
        let (kernel, (a, b, c, mu)) = match preset {
            Preset::Rtga => (Kernel::Rtga, rtga_row(case_id)),
            Preset::Proposed => (Kernel::Rtga, proposed_row(case_id)),
            Preset::Gdtls => (
                Kernel::Limit(LimitFamily::Tlmp),
                (2.0, 2.0, 1.0, gdtls_mu(case_id)),
            ),
            Preset::Tlmp => {
                let b = rtga_row(case_id).1;
                (Kernel::Limit(LimitFamily::Tlmp), (b, b, 1.0, gdtls_mu(case_id)))
            }
            Preset::Tlmf => (
                Kernel::Limit(LimitFamily::Tlmp),
                (4.0, 4.0, 1.0, gdtls_mu(case_id)),
            ),
            Preset::Ltls => (
                Kernel::Limit(LimitFamily::Ltls),
                (0.0, 2.0, 1.0, gdtls_mu(case_id)),
            ),
            Preset::Mtc => (
                Kernel::Limit(LimitFamily::Exp),
                (f64::NEG_INFINITY, 2.0, 1.0, mtc_mu(case_id)),
            ),
            Preset::Mtgc => {
                let (b, mu) = mtgc_row(case_id);
                (Kernel::Limit(LimitFamily::Exp), (f64::NEG_INFINITY, b, 1.0, mu))
            }
        };
        let (censor, reuse) = if preset.uses_censoring() {
            (
                Some(CensorConfig::with_defaults(0.3, ScaleEstimator::RobustMedian)?),
                ReuseConfig::idr(3),
            )
        } else {
            (None, ReuseConfig::none())
        };
        let spec = Self {
            preset,
            kernel,
            params: RtgaParams { a, b, c, mu, phi },
            censor,
            reuse,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_censor(mut self, censor: Option<CensorConfig>) -> Self {
        self.censor = censor;
        self
    }

    pub fn with_reuse(mut self, reuse: ReuseConfig) -> Self {
        self.reuse = reuse;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.params.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.reuse.validate()?;
        CostModel::new(self.kernel, self.params).map(|_| ())
    }

    pub fn model(&self) -> Result<CostModel> {
        CostModel::new(self.kernel, self.params)
    }

    /// Column label, e.g. `rtga` or `proposed_p30_l3`.
    pub fn label(&self) -> String {
        let mut s = self.preset.name().to_string();
        if let Some(c) = &self.censor {
            s.push_str(&format!("_p{}", (c.p_ce * 100.0).round() as i64));
        }
        if self.reuse.steps() > 0 {
            let tag = match self.reuse.scheme {
                ReuseScheme::Idr => "l",
                ReuseScheme::Dr => "dr",
                ReuseScheme::Undr => "undr",
                ReuseScheme::None => "",
            };
            s.push_str(&format!("_{tag}{}", self.reuse.l_reused));
            if let Some(w) = self.reuse.window_cap {
                s.push_str(&format!("_w{w}"));
            }
        }
        s
    }
}

/// Outcome of one main-loop sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// A-priori error on the current sample, after the reuse pass.
    pub error: f64,
    pub censored: bool,
    /// `false` while the delay line is still filling.
    pub active: bool,
}

/// A running filter: weights, censor state, reuse buffers and history.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter {
    model: CostModel,
    state: FilterState,
    censor: Option<OnlineCensor>,
    reuse: ReusePass,
    history: Option<SampleHistory>,
    reuse_stats: ReuseStats,
}

impl AdaptiveFilter {
    pub fn new(spec: &AlgorithmSpec, order: usize) -> Result<Self> {
        spec.validate()?;
        let history = (spec.reuse.steps() > 0).then(|| SampleHistory::for_config(order, &spec.reuse));
        Ok(Self {
            model: spec.model()?,
            state: FilterState::new(order),
            censor: spec.censor.map(OnlineCensor::new),
            reuse: ReusePass::new(spec.reuse, order)?,
            history,
            reuse_stats: ReuseStats::default(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.state.w
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn reuse_stats(&self) -> ReuseStats {
        self.reuse_stats
    }

    pub fn sigma_e(&self) -> Option<f64> {
        self.censor.as_ref().map(|c| c.scale.sigma_e)
    }

    /// Process sample `i` with newest-first noisy regressor `x_tilde`.
    pub fn step(&mut self, i: usize, x_tilde: &[f64], d_tilde: f64) -> Result<StepOutcome> {
        let order = self.state.order();
        if let Some(h) = self.history.as_mut() {
            h.push(x_tilde[0], d_tilde);
        }
        if i < order {
            return Ok(StepOutcome {
                error: self.state.error_on(x_tilde, d_tilde),
                censored: false,
                active: false,
            });
        }
        if i > order {
            if let Some(h) = self.history.as_ref() {
                let s = self
                    .reuse
                    .run(i, &mut self.state, h, &self.model, self.censor.as_ref())?;
                self.reuse_stats.absorb(s);
            }
        }
        let e = self.state.error_on(x_tilde, d_tilde);
        let censored = self.censor.as_ref().is_some_and(|c| c.is_censored(e));
        self.state.update_on(&self.model, x_tilde, d_tilde, censored)?;
        if let Some(c) = self.censor.as_mut() {
            c.observe(e)?;
        }
        Ok(StepOutcome {
            error: e,
            censored,
            active: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("gmcc".parse::<Preset>().is_err());
    }

    #[test]
    fn every_preset_validates() {
        for case in 1..=5 {
            for p in Preset::ALL {
                AlgorithmSpec::preset(p, case).unwrap();
            }
        }
        assert!(AlgorithmSpec::preset(Preset::Rtga, 6).is_err());
    }

    #[test]
    fn tabulated_values() {
        let r = AlgorithmSpec::preset(Preset::Rtga, 1).unwrap();
        assert_eq!((r.params.a, r.params.b, r.params.mu), (-100.0, 2.0, 0.022));
        assert_eq!(r.params.c, 0.1);
        assert_eq!(CASE1_RTGA_TABULATED_C, 0.2);
        // Matched initial convergence: GDTLS μ·c equals RTGA μ·c in Case 1.
        let g = AlgorithmSpec::preset(Preset::Gdtls, 1).unwrap();
        assert!((g.params.mu * g.params.c - r.params.mu * r.params.c).abs() < 1e-15);
        assert_eq!(AlgorithmSpec::preset(Preset::Rtga, 3).unwrap().params.phi, 10.0);
        let p = AlgorithmSpec::preset(Preset::Proposed, 5).unwrap();
        assert_eq!((p.params.b, p.params.c, p.params.mu), (2.29, 1.2, 0.01));
        assert_eq!(p.label(), "proposed_p30_l3");
        assert_eq!(AlgorithmSpec::preset(Preset::Mtgc, 3).unwrap().params.b, 1.56);
    }

    #[test]
    fn engine_waits_for_full_delay_line() {
        let spec = AlgorithmSpec::preset(Preset::Rtga, 1).unwrap();
        let mut f = AdaptiveFilter::new(&spec, 3).unwrap();
        for i in 0..3 {
            let out = f.step(i, &[1.0, 0.0, 0.0], 1.0).unwrap();
            assert!(!out.active);
            assert!(f.weights().iter().all(|w| *w == 0.0));
        }
        assert!(f.step(3, &[1.0, 0.5, 0.2], 1.0).unwrap().active);
        assert!(f.weights().iter().any(|w| *w != 0.0));
    }
}
