//! Real-domain online censoring.
//!
//! For real Gaussian errors `|e|` is half-normal, so discarding the samples
//! with `|e| < κσ` censors a fraction `erf(κ/√2)` of them. Inverting gives the
//! threshold `κ = √2 erf⁻¹(P_ce)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Consistency factor for the median of |N(0, σ²)| (1 / 0.6745).
pub const MAD_CORRECTION: f64 = 1.483;

pub const DEFAULT_TAU: f64 = 0.99;
pub const DEFAULT_WINDOW: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleEstimator {
    /// Sliding-median tracker, insensitive to impulses.
    RobustMedian,
    /// Exponentially weighted second moment.
    Conventional,
}

/// κ = √2·erf⁻¹(p_ce).
pub fn censor_threshold(p_ce: f64) -> Result<f64> {
    if p_ce.is_nan() || p_ce < 0.0 {
        return Err(Error::InvalidRatio(p_ce));
    }
    if p_ce >= 1.0 {
        return Err(Error::DivergentThreshold(p_ce));
    }
    Ok(std::f64::consts::SQRT_2 * erf_inv(p_ce))
}

/// Inverse of `erf` on [0, 1): bracketing bisection to a loose tolerance,
/// then Newton on the exact derivative.
fn erf_inv(p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while erf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if erf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    for _ in 0..8 {
        let slope = two_over_sqrt_pi * (-y * y).exp();
        if slope == 0.0 {
            break;
        }
        let step = (erf(y) - p) / slope;
        y -= step;
        if step.abs() <= 1e-15 * y.abs() {
            break;
        }
    }
    y
}

/// `true` iff the sample is discarded: `|e| < κσₑ`.
pub fn censor_decision(e: f64, kappa: f64, sigma_e: f64) -> bool {
    e.abs() < kappa * sigma_e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensorConfig {
    pub p_ce: f64,
    pub kappa: f64,
    pub window: usize,
    pub tau: f64,
    pub estimator: ScaleEstimator,
}

impl CensorConfig {
    pub fn new(p_ce: f64, window: usize, tau: f64, estimator: ScaleEstimator) -> Result<Self> {
        let kappa = censor_threshold(p_ce)?;
        if !(7..=15).contains(&window) {
            return Err(Error::InvalidParameter(format!(
                "censoring window {window} outside 7..=15"
            )));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor tau = {tau} outside (0, 1]"
            )));
        }
        Ok(Self {
            p_ce,
            kappa,
            window,
            tau,
            estimator,
        })
    }

    pub fn with_defaults(p_ce: f64, estimator: ScaleEstimator) -> Result<Self> {
        Self::new(p_ce, DEFAULT_WINDOW, DEFAULT_TAU, estimator)
    }
}

/// Running error-scale estimate.
///
/// The first `window` errors only fill the window; the scale is then
/// initialized from them and censoring may start.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleState {
    pub sigma_e: f64,
    error_window: VecDeque<f64>,
    ready: bool,
    scratch: Vec<f64>,
}

impl Default for ScaleState {
    fn default() -> Self {
        Self::new()
    }
}

impl ScaleState {
    pub fn new() -> Self {
        Self {
            sigma_e: 0.0,
            error_window: VecDeque::with_capacity(16),
            ready: false,
            scratch: Vec::with_capacity(16),
        }
    }

    /// Start from a known scale with an empty window (tests, theory mode).
    pub fn primed(sigma_e: f64) -> Self {
        Self {
            sigma_e,
            ready: true,
            ..Self::new()
        }
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.error_window.iter().copied()
    }

    fn windowed_median(&mut self) -> f64 {
        self.scratch.clear();
        self.scratch.extend(self.error_window.iter().copied());
        let n = self.scratch.len();
        let mid = n / 2;
        let (_, m, _) = self
            .scratch
            .select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        let upper = *m;
        if n % 2 == 1 {
            upper
        } else {
            let lower = self.scratch[..mid]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lower + upper)
        }
    }

    /// Fold the main-loop error `e` into the scale estimate.
    pub fn update(&mut self, e: f64, cfg: &CensorConfig) -> Result<()> {
        if !e.is_finite() {
            return Err(Error::NonFinite {
                iteration: 0,
                what: format!("error {e} fed to the scale tracker"),
            });
        }
        if self.error_window.len() == cfg.window {
            self.error_window.pop_front();
        }
        self.error_window.push_back(e.abs());

        if !self.ready {
            if self.error_window.len() < cfg.window {
                return Ok(());
            }
            self.sigma_e = match cfg.estimator {
                ScaleEstimator::RobustMedian => MAD_CORRECTION * self.windowed_median(),
                ScaleEstimator::Conventional => {
                    let ms = self.error_window.iter().map(|v| v * v).sum::<f64>()
                        / self.error_window.len() as f64;
                    ms.sqrt()
                }
            };
            self.ready = true;
            return Ok(());
        }

        let tau = cfg.tau;
        self.sigma_e = match cfg.estimator {
            ScaleEstimator::RobustMedian => {
                tau * self.sigma_e + MAD_CORRECTION * (1.0 - tau) * self.windowed_median()
            }
            ScaleEstimator::Conventional => {
                (tau * self.sigma_e * self.sigma_e + (1.0 - tau) * e * e).sqrt()
            }
        };
        Ok(())
    }
}

/// Threshold plus scale tracker for one filter instance.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineCensor {
    pub config: CensorConfig,
    pub scale: ScaleState,
}

impl OnlineCensor {
    pub fn new(config: CensorConfig) -> Self {
        Self {
            config,
            scale: ScaleState::new(),
        }
    }

    /// Whether `e` should be discarded. Never censors during warm-up.
    pub fn is_censored(&self, e: f64) -> bool {
        self.scale.is_ready() && censor_decision(e, self.config.kappa, self.scale.sigma_e)
    }

    pub fn observe(&mut self, e: f64) -> Result<()> {
        self.scale.update(e, &self.config)
    }
}
