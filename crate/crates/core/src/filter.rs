//! RTGA cost, its limit families, and the per-sample weight update.
//!
//! With the augmented weight `w̄ = [√φ, -wᵀ]ᵀ` and normalized error
//! `ẽ = e / ‖w̄‖`, the general cost is
//!
//! ```text
//! J(e) = |a-b|/a · [ (c|ẽ|^b / |a-b| + 1)^(a/b) - 1 ]
//! ```
//!
//! and every family shares the gradient shape
//!
//! ```text
//! ĝ = -c · Φ(ẽ) · |ẽ|^(b-2) · ψ,    ψ = (x̃ e + e² w / ‖w̄‖²) / ‖w̄‖²
//! ```
//!
//! where only the coefficient `Φ` differs between the general form and the
//! analytic limits `a → b` (TLMP), `a → 0` (LTLS) and `a → -∞` (exponential).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{dot, EivSample};

/// Errors below this magnitude skip the update when `b < 2`.
pub const SINGULARITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtgaParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
    pub phi: f64,
}

impl RtgaParams {
    pub fn new(a: f64, b: f64, c: f64, mu: f64, phi: f64) -> Result<Self> {
        let p = Self { a, b, c, mu, phi };
        p.validate()?;
        Ok(p)
    }

    /// Shape checks shared by every family. `a` is only constrained when the
    /// general form is evaluated.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!("{what} = {v} is out of range")))
        };
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("b", self.b);
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c", self.c);
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu", self.mu);
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return bad("phi", self.phi);
        }
        if self.a.is_nan() {
            return bad("a", self.a);
        }
        Ok(())
    }

    fn validate_general(&self) -> Result<()> {
        self.validate()?;
        if self.a == 0.0 || !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "a = {} has no general form; use the corresponding limit family",
                self.a
            )));
        }
        if self.a == self.b {
            return Err(Error::InvalidParameter(
                "a = b has no general form; use the tlmp limit family".into(),
            ));
        }
        Ok(())
    }

    /// ‖w̄‖² = φ + ‖w‖².
    pub fn augmented_norm2(&self, w: &[f64]) -> f64 {
        self.phi + dot(w, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitFamily {
    /// `a → b`: total least mean p-norm (TLS at b = 2, TLMF at b = 4).
    Tlmp,
    /// `a → 0`: logarithmic TLS.
    Ltls,
    /// `a → -∞`: total correntropy type (MTC at b = 2, MTGC otherwise).
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rtga,
    Limit(LimitFamily),
}

#[inline]
fn abs_pow(x: f64, b: f64) -> f64 {
    if b == 2.0 {
        x * x
    } else {
        x.abs().powf(b)
    }
}

/// A kernel together with its parameters, validated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    kernel: Kernel,
    params: RtgaParams,
}

impl CostModel {
    pub fn new(kernel: Kernel, params: RtgaParams) -> Result<Self> {
        match kernel {
            Kernel::Rtga => params.validate_general()?,
            Kernel::Limit(_) => params.validate()?,
        }
        Ok(Self { kernel, params })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn params(&self) -> &RtgaParams {
        &self.params
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.params.mu = mu;
        Self::new(self.kernel, self.params)
    }

    /// Cost of the error `e` at weights `w` (active, uncensored branch).
    pub fn cost(&self, e: f64, w: &[f64]) -> f64 {
        let RtgaParams { a, b, c, .. } = self.params;
        let et = e / self.params.augmented_norm2(w).sqrt();
        let t = abs_pow(et, b);
        match self.kernel {
            Kernel::Rtga => {
                let gap = (a - b).abs();
                (gap / a) * ((a / b) * (c * t / gap).ln_1p()).exp_m1()
            }
            Kernel::Limit(LimitFamily::Tlmp) => c / b * t,
            Kernel::Limit(LimitFamily::Ltls) => (c / b * t).ln_1p(),
            Kernel::Limit(LimitFamily::Exp) => -(-(c / b) * t).exp_m1(),
        }
    }

    /// Gradient coefficient Φ(ẽ) as a function of |ẽ|.
    pub fn coefficient(&self, abs_et: f64) -> f64 {
        let RtgaParams { a, b, c, .. } = self.params;
        let t = abs_pow(abs_et, b);
        match self.kernel {
            Kernel::Rtga => {
                let gap = (a - b).abs();
                (((a - b) / b) * (c * t / gap).ln_1p()).exp()
            }
            Kernel::Limit(LimitFamily::Tlmp) => 1.0,
            Kernel::Limit(LimitFamily::Ltls) => 1.0 / (c / b * t + 1.0),
            Kernel::Limit(LimitFamily::Exp) => (-(c / b) * t).exp(),
        }
    }

    /// Writes ĝ into `out`; returns `true` when the singularity guard fired.
    pub fn gradient_into(&self, e: f64, x_tilde: &[f64], w: &[f64], out: &mut [f64]) -> bool {
        let RtgaParams { b, c, .. } = self.params;
        let nb2 = self.params.augmented_norm2(w);
        if e == 0.0 || (b < 2.0 && e.abs() < SINGULARITY_GUARD) {
            out.iter_mut().for_each(|g| *g = 0.0);
            return b < 2.0;
        }
        let abs_et = e.abs() / nb2.sqrt();
        let shape = if b == 2.0 { 1.0 } else { abs_et.powf(b - 2.0) };
        let scale = -c * self.coefficient(abs_et) * shape / nb2;
        let wk = e * e / nb2;
        for ((g, &x), &wj) in out.iter_mut().zip(x_tilde).zip(w) {
            *g = scale * (x * e + wk * wj);
        }
        false
    }

    pub fn gradient(&self, e: f64, x_tilde: &[f64], w: &[f64]) -> Result<Gradient> {
        check_len(w.len(), x_tilde.len())?;
        let mut g = vec![0.0; w.len()];
        let guarded = self.gradient_into(e, x_tilde, w, &mut g);
        Ok(Gradient { g, guarded })
    }

    /// One descent step `w ← w - μ ĝ` on the pair `(x̃, d̃)`. Returns the
    /// a-priori error.
    pub fn descend(
        &self,
        w: &mut [f64],
        x_tilde: &[f64],
        d_tilde: f64,
        scratch: &mut [f64],
        iteration: usize,
    ) -> Result<f64> {
        let e = d_tilde - dot(w, x_tilde);
        self.gradient_into(e, x_tilde, w, scratch);
        let mu = self.params.mu;
        for (wj, g) in w.iter_mut().zip(scratch.iter()) {
            *wj -= mu * g;
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                iteration,
                what: format!("weights after update (error {e})"),
            });
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub g: Vec<f64>,
    pub guarded: bool,
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(Error::Dimension { expected, actual })
    } else {
        Ok(())
    }
}

pub fn rtga_cost(e: f64, w: &[f64], p: &RtgaParams) -> Result<f64> {
    Ok(CostModel::new(Kernel::Rtga, *p)?.cost(e, w))
}

pub fn limit_cost(e: f64, w: &[f64], family: LimitFamily, p: &RtgaParams) -> Result<f64> {
    Ok(CostModel::new(Kernel::Limit(family), *p)?.cost(e, w))
}

pub fn rtga_gradient(e: f64, x_tilde: &[f64], w: &[f64], p: &RtgaParams) -> Result<Gradient> {
    CostModel::new(Kernel::Rtga, *p)?.gradient(e, x_tilde, w)
}

pub fn limit_gradient(
    e: f64,
    x_tilde: &[f64],
    w: &[f64],
    family: LimitFamily,
    p: &RtgaParams,
) -> Result<Gradient> {
    CostModel::new(Kernel::Limit(family), *p)?.gradient(e, x_tilde, w)
}

/// Adaptive weights plus bookkeeping for the main update loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub w: Vec<f64>,
    pub iteration: usize,
    pub sigma_e: f64,
    pub update_count: u64,
    pub censor_count: u64,
    scratch: Vec<f64>,
}

impl FilterState {
    pub fn new(order: usize) -> Self {
        Self::from_weights(vec![0.0; order])
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let n = w.len();
        Self {
            w,
            iteration: 0,
            sigma_e: 0.0,
            update_count: 0,
            censor_count: 0,
            scratch: vec![0.0; n],
        }
    }

    pub fn order(&self) -> usize {
        self.w.len()
    }

    /// Scratch-backed descent used by the reuse pass; counters untouched.
    pub(crate) fn descend_on(
        &mut self,
        model: &CostModel,
        x_tilde: &[f64],
        d_tilde: f64,
    ) -> Result<f64> {
        model.descend(&mut self.w, x_tilde, d_tilde, &mut self.scratch, self.iteration)
    }

    pub fn error_on(&self, x_tilde: &[f64], d_tilde: f64) -> f64 {
        d_tilde - dot(&self.w, x_tilde)
    }

    /// Main-loop update on `(x̃, d̃)`. The error is taken before the update.
    pub fn update_on(
        &mut self,
        model: &CostModel,
        x_tilde: &[f64],
        d_tilde: f64,
        censored: bool,
    ) -> Result<f64> {
        check_len(self.w.len(), x_tilde.len())?;
        let e = if censored {
            self.censor_count += 1;
            self.error_on(x_tilde, d_tilde)
        } else {
            let e = self.descend_on(model, x_tilde, d_tilde)?;
            self.update_count += 1;
            e
        };
        self.iteration += 1;
        Ok(e)
    }
}

/// One step of the weight recursion on a full EIV sample.
pub fn update_step(
    state: &mut FilterState,
    sample: &EivSample,
    model: &CostModel,
    censored: bool,
) -> Result<f64> {
    state.update_on(model, &sample.x_tilde, sample.d_tilde, censored)
}
