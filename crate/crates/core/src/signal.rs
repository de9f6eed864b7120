//! Errors-in-variables data model.
//!
//! The clean input scalar stream feeds a tapped delay line, newest sample
//! first: `x(i) = [x(i), x(i-1), ..., x(i-L+1)]`, zero padded for the first
//! `L - 1` steps. Input noise is added to the scalar stream before the delay
//! line, so the noisy regressor `x̃(i)` is the delay line of noisy scalars and
//! any past regressor can be rebuilt from the scalar history.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseSampler, NoiseSpec};

/// One time step of the errors-in-variables stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EivSample {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub d: f64,
    pub d_tilde: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftEvent {
    pub time: usize,
    pub amount: usize,
}

/// Unknown FIR system, optionally with scheduled right shifts of its
/// impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueSystem {
    weights: Vec<f64>,
    shifts: Vec<ShiftEvent>,
}

impl TrueSystem {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_shifts(weights, Vec::new())
    }

    pub fn with_shifts(weights: Vec<f64>, shifts: Vec<ShiftEvent>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSystem("filter order L must be >= 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidSystem("weights must be finite".into()));
        }
        if shifts.windows(2).any(|p| p[1].time <= p[0].time) {
            return Err(Error::InvalidSystem(
                "shift times must be strictly increasing".into(),
            ));
        }
        Ok(Self { weights, shifts })
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    /// Initial weights, before any shift.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shifts(&self) -> &[ShiftEvent] {
        &self.shifts
    }

    /// Weights in force at time `i` (shifts apply from their time onward).
    pub fn weights_at(&self, i: usize) -> Vec<f64> {
        let mut w = self.weights.clone();
        for ev in self.shifts.iter().take_while(|ev| ev.time <= i) {
            w = shift_right(&w, ev.amount);
        }
        w
    }
}

/// Right shift with zero fill; coefficients shifted past the end are dropped.
pub fn shift_right(w: &[f64], amount: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    if amount < w.len() {
        out[amount..].copy_from_slice(&w[..w.len() - amount]);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// FIR output `w · x`.
pub fn apply_fir(w: &[f64], x_window: &[f64]) -> Result<f64> {
    if w.len() != x_window.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            actual: x_window.len(),
        });
    }
    Ok(dot(w, x_window))
}

/// Zero-mean, unit-variance white Gaussian input.
#[derive(Debug, Clone)]
pub struct WhiteGaussian {
    rng: ChaCha8Rng,
}

impl WhiteGaussian {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Iterator for WhiteGaussian {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.rng.sample(StandardNormal))
    }
}

/// Unit-variance AR(1) process `x(i) = p x(i-1) + sqrt(1-p²) n(i)`, started
/// from its stationary law.
#[derive(Debug, Clone)]
pub struct Ar1 {
    rng: ChaCha8Rng,
    pole: f64,
    gain: f64,
    state: Option<f64>,
}

impl Ar1 {
    pub fn new(pole: f64, seed: u64) -> Result<Self> {
        if !(pole.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR(1) pole {pole} must satisfy |p| < 1"
            )));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pole,
            gain: (1.0 - pole * pole).sqrt(),
            state: None,
        })
    }
}

impl Iterator for Ar1 {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let n: f64 = self.rng.sample(StandardNormal);
        let x = match self.state {
            None => n,
            Some(prev) => self.pole * prev + self.gain * n,
        };
        self.state = Some(x);
        Some(x)
    }
}

/// Borrowed view of the current stream step.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub index: usize,
    pub x: &'a [f64],
    pub x_tilde: &'a [f64],
    pub d: f64,
    pub d_tilde: f64,
    pub true_weights: &'a [f64],
}

/// Streaming EIV generator. Holds the delay lines so long runs need no
/// per-step allocation.
#[derive(Debug, Clone)]
pub struct EivStream<I> {
    system: TrueSystem,
    input: I,
    input_noise: NoiseSampler,
    output_noise: NoiseSampler,
    rng_input_noise: ChaCha8Rng,
    rng_output_noise: ChaCha8Rng,
    clean: Vec<f64>,
    noisy: Vec<f64>,
    weights: Vec<f64>,
    next_shift: usize,
    index: usize,
}

impl<I: Iterator<Item = f64>> EivStream<I> {
    pub fn new(
        system: TrueSystem,
        input: I,
        noise: (NoiseSpec, NoiseSpec),
        seed: u64,
    ) -> Result<Self> {
        let order = system.order();
        let mut rng_input_noise = ChaCha8Rng::seed_from_u64(seed);
        rng_input_noise.set_stream(1);
        let mut rng_output_noise = ChaCha8Rng::seed_from_u64(seed);
        rng_output_noise.set_stream(2);
        Ok(Self {
            weights: system.weights.clone(),
            system,
            input,
            input_noise: NoiseSampler::new(noise.0)?,
            output_noise: NoiseSampler::new(noise.1)?,
            rng_input_noise,
            rng_output_noise,
            clean: vec![0.0; order],
            noisy: vec![0.0; order],
            next_shift: 0,
            index: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.system.order()
    }

    /// Index of the next sample to be produced.
    pub fn position(&self) -> usize {
        self.index
    }

    /// Produce the next step and return a borrowed view of it.
    pub fn advance(&mut self) -> Result<StepView<'_>> {
        let x = self.input.next().ok_or(Error::InputExhausted {
            produced: self.index,
            requested: self.index + 1,
        })?;
        let i = self.index;
        while let Some(ev) = self.system.shifts.get(self.next_shift) {
            if ev.time > i {
                break;
            }
            self.weights = shift_right(&self.weights, ev.amount);
            self.next_shift += 1;
        }
        let u = self.input_noise.sample(&mut self.rng_input_noise);
        self.clean.rotate_right(1);
        self.clean[0] = x;
        self.noisy.rotate_right(1);
        self.noisy[0] = x + u;
        let d = dot(&self.weights, &self.clean);
        let d_tilde = d + self.output_noise.sample(&mut self.rng_output_noise);
        self.index += 1;
        Ok(StepView {
            index: i,
            x: &self.clean,
            x_tilde: &self.noisy,
            d,
            d_tilde,
            true_weights: &self.weights,
        })
    }

    pub fn next_sample(&mut self) -> Result<EivSample> {
        let v = self.advance()?;
        Ok(EivSample {
            x: v.x.to_vec(),
            x_tilde: v.x_tilde.to_vec(),
            d: v.d,
            d_tilde: v.d_tilde,
            index: v.index,
        })
    }
}

/// Materialize `n` samples of the EIV stream.
pub fn synthesize_eiv<I: IntoIterator<Item = f64>>(
    system: TrueSystem,
    input_source: I,
    noise: (NoiseSpec, NoiseSpec),
    n: usize,
    seed: u64,
) -> Result<Vec<EivSample>> {
    if n < system.order() {
        return Err(Error::InvalidParameter(format!(
            "n = {n} must be >= L = {}",
            system.order()
        )));
    }
    let mut stream = EivStream::new(system, input_source.into_iter(), noise, seed)?;
    (0..n)
        .map(|_| {
            stream.next_sample().map_err(|e| match e {
                Error::InputExhausted { produced, .. } => Error::InputExhausted {
                    produced,
                    requested: n,
                },
                other => other,
            })
        })
        .collect()
}
