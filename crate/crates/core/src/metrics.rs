//! NMSD and ERLE learning curves, censoring ratios and operation counts.

use crate::error::{Error, Result};
use crate::filter::RtgaParams;

/// Values are clamped to ±`DB_CLAMP` so CSV output stays finite.
pub const DB_CLAMP: f64 = 300.0;

/// ERLE smoother forgetting factor.
pub const ERLE_LAMBDA: f64 = 0.999;

pub fn to_db(ratio: f64) -> f64 {
    if ratio.is_nan() {
        return f64::NAN;
    }
    if ratio <= 0.0 {
        return -DB_CLAMP;
    }
    (10.0 * ratio.log10()).clamp(-DB_CLAMP, DB_CLAMP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub values_db: Vec<f64>,
    pub runs: usize,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }

    /// Mean over the last `fraction` of the curve, averaged in the linear
    /// domain and returned in dB.
    pub fn tail_mean_db(&self, fraction: f64) -> f64 {
        let n = self.values_db.len();
        if n == 0 {
            return f64::NAN;
        }
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n);
        let mean = self.values_db[n - take..]
            .iter()
            .map(|v| 10f64.powf(v / 10.0))
            .sum::<f64>()
            / take as f64;
        to_db(mean)
    }

    /// First iteration at which the curve is at or below `level_db`.
    pub fn first_below(&self, level_db: f64) -> Option<usize> {
        self.values_db.iter().position(|v| *v <= level_db)
    }

    /// First iteration at which the curve is at or above `level_db`.
    pub fn first_above(&self, level_db: f64) -> Option<usize> {
        self.values_db.iter().position(|v| *v >= level_db)
    }
}

/// ‖w − w_o‖²/‖w_o‖².
pub fn nmsd_ratio(w: &[f64], w_o: &[f64], iteration: usize) -> Result<f64> {
    if w.len() != w_o.len() {
        return Err(Error::Dimension {
            expected: w_o.len(),
            actual: w.len(),
        });
    }
    let den: f64 = w_o.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::UndefinedReference(iteration));
    }
    let num: f64 = w.iter().zip(w_o).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / den)
}

/// Linear-domain running sum of per-run NMSD ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct NmsdAccumulator {
    sum: Vec<f64>,
    runs: usize,
}

impl NmsdAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            runs: 0,
        }
    }

    pub fn add_run(&mut self, ratios: &[f64]) -> Result<()> {
        if ratios.len() != self.sum.len() {
            return Err(Error::Dimension {
                expected: self.sum.len(),
                actual: ratios.len(),
            });
        }
        for (s, r) in self.sum.iter_mut().zip(ratios) {
            *s += r;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn finish(&self) -> LearningCurve {
        let n = self.runs.max(1) as f64;
        LearningCurve {
            values_db: self.sum.iter().map(|s| to_db(s / n)).collect(),
            runs: self.runs,
        }
    }
}

/// NMSD curve from stored weight trajectories (`[run][iteration][tap]`).
pub fn nmsd_db(weight_trajectories: &[Vec<Vec<f64>>], w_o_trajectory: &[Vec<f64>]) -> Result<LearningCurve> {
    let len = w_o_trajectory.len();
    let mut acc = NmsdAccumulator::new(len);
    let mut ratios = vec![0.0; len];
    for run in weight_trajectories {
        if run.len() != len {
            return Err(Error::Dimension {
                expected: len,
                actual: run.len(),
            });
        }
        for (i, (w, w_o)) in run.iter().zip(w_o_trajectory).enumerate() {
            ratios[i] = nmsd_ratio(w, w_o, i)?;
        }
        acc.add_run(&ratios)?;
    }
    Ok(acc.finish())
}

/// Recursive power estimates `Ê(i) = λÊ(i−1) + (1−λ)s²(i)` for the echo and
/// the residual, started at the first squared samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErleSmoother {
    pub echo_power: f64,
    pub residual_power: f64,
    started: bool,
}

impl ErleSmoother {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, d: f64, e: f64) {
        if self.started {
            self.echo_power = ERLE_LAMBDA * self.echo_power + (1.0 - ERLE_LAMBDA) * d * d;
            self.residual_power = ERLE_LAMBDA * self.residual_power + (1.0 - ERLE_LAMBDA) * e * e;
        } else {
            self.echo_power = d * d;
            self.residual_power = e * e;
            self.started = true;
        }
    }

    pub fn erle_db(&self) -> f64 {
        erle_from_powers(self.echo_power, self.residual_power)
    }
}

fn erle_from_powers(ed: f64, ee: f64) -> f64 {
    if ee == 0.0 {
        if ed == 0.0 {
            0.0
        } else {
            DB_CLAMP
        }
    } else {
        to_db(ed / ee)
    }
}

/// Single-run ERLE curve.
pub fn erle_db(d_seq: &[f64], e_seq: &[f64]) -> Result<LearningCurve> {
    if d_seq.len() != e_seq.len() {
        return Err(Error::Dimension {
            expected: d_seq.len(),
            actual: e_seq.len(),
        });
    }
    let mut s = ErleSmoother::new();
    let values_db = d_seq
        .iter()
        .zip(e_seq)
        .map(|(&d, &e)| {
            s.push(d, e);
            s.erle_db()
        })
        .collect();
    Ok(LearningCurve { values_db, runs: 1 })
}

/// Averages smoothed echo and residual powers over runs, then takes the
/// ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ErleAccumulator {
    echo: Vec<f64>,
    residual: Vec<f64>,
    runs: usize,
}

impl ErleAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            echo: vec![0.0; len],
            residual: vec![0.0; len],
            runs: 0,
        }
    }

    pub fn add_run(&mut self, echo_power: &[f64], residual_power: &[f64]) -> Result<()> {
        for seq in [echo_power, residual_power] {
            if seq.len() != self.echo.len() {
                return Err(Error::Dimension {
                    expected: self.echo.len(),
                    actual: seq.len(),
                });
            }
        }
        for (s, v) in self.echo.iter_mut().zip(echo_power) {
            *s += v;
        }
        for (s, v) in self.residual.iter_mut().zip(residual_power) {
            *s += v;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn finish(&self) -> LearningCurve {
        LearningCurve {
            values_db: self
                .echo
                .iter()
                .zip(&self.residual)
                .map(|(&d, &e)| erle_from_powers(d, e))
                .collect(),
            runs: self.runs,
        }
    }
}

/// Fraction of censored decisions; 0 for an empty sequence.
pub fn censoring_ratio(decisions: &[bool]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    decisions.iter().filter(|c| **c).count() as f64 / decisions.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCounts {
    pub additions: f64,
    pub multiplications: f64,
    pub nonlinear: f64,
}

impl OpCounts {
    fn scaled(self, factor: f64) -> Self {
        Self {
            additions: self.additions * factor,
            multiplications: self.multiplications * factor,
            nonlinear: self.nonlinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCountPrediction {
    pub rtga: OpCounts,
    /// Tabulated factor `(1−p)(l + p·l + 1)`.
    pub proposed: OpCounts,
    pub proposed_factor: f64,
    /// Naive factor `(1−p)(1 + l(1−p))`.
    pub naive: OpCounts,
    pub naive_factor: f64,
}

/// Per-iteration operation counts of the plain and censored-reuse updates.
pub fn predicted_op_counts(order: usize, params: &RtgaParams, p_ce: f64, l_reused: usize) -> OpCountPrediction {
    let l = order as f64;
    let lr = l_reused as f64;
    let rtga = OpCounts {
        additions: 4.0 * l + 4.0,
        multiplications: 5.0 * l + 5.0 + 2.0 * params.b + params.a.abs() / params.b,
        nonlinear: 3.0,
    };
    let proposed_factor = (1.0 - p_ce) * (lr + p_ce * lr + 1.0);
    let naive_factor = (1.0 - p_ce) * (1.0 + lr * (1.0 - p_ce));
    OpCountPrediction {
        rtga,
        proposed: rtga.scaled(proposed_factor),
        proposed_factor,
        naive: rtga.scaled(naive_factor),
        naive_factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmsd_examples() {
        let w_o = vec![vec![0.6, 0.8]; 5];
        let zero = vec![vec![vec![0.0, 0.0]; 5]];
        let c = nmsd_db(&zero, &w_o).unwrap();
        assert!(c.values_db.iter().all(|v| v.abs() < 1e-12));
        let exact = vec![w_o.clone()];
        let c = nmsd_db(&exact, &w_o).unwrap();
        assert!(c.values_db.iter().all(|v| *v == -300.0));
        let bad = vec![vec![vec![0.0]; 5]];
        assert!(nmsd_db(&bad, &w_o).is_err());
        assert!(matches!(
            nmsd_ratio(&[1.0], &[0.0], 7),
            Err(Error::UndefinedReference(7))
        ));
    }

    #[test]
    fn nmsd_is_db_of_mean() {
        // Ratios 1 and 0.01: dB of the mean is 10·log10(0.505), not −10.
        let w_o = vec![vec![1.0]];
        let runs = vec![vec![vec![0.0]], vec![vec![0.9]]];
        let c = nmsd_db(&runs, &w_o).unwrap();
        assert!((c.values_db[0] - 10.0 * 0.505f64.log10()).abs() < 1e-12);
        assert_eq!(c.runs, 2);
    }

    #[test]
    fn erle_examples() {
        let d: Vec<f64> = (0..5000).map(|k| (k as f64 * 0.3).sin() + 1.1).collect();
        let c = erle_db(&d, &d).unwrap();
        assert!(c.values_db.iter().all(|v| v.abs() < 1e-9));
        let c = erle_db(&d, &vec![0.0; d.len()]).unwrap();
        assert!(c.values_db.iter().all(|v| *v == 300.0));
        assert!(erle_db(&d, &d[..3]).is_err());
    }

    #[test]
    fn erle_smoother_time_constant() {
        assert_eq!(ERLE_LAMBDA + (1.0 - ERLE_LAMBDA), 1.0);
        // Residual amplitude steps from 1 to 10, so the power goes 1 → 100.
        let mut s = ErleSmoother::new();
        for _ in 0..50_000 {
            s.push(1.0, 1.0);
        }
        let target = 1.0 + 0.9 * 99.0;
        let mut n = 0usize;
        while s.residual_power < target {
            s.push(1.0, 10.0);
            n += 1;
        }
        let exact = (0.1f64.ln() / ERLE_LAMBDA.ln()).ceil() as usize;
        assert!(n.abs_diff(exact) <= 1, "{n} vs {exact}");
        let nominal = 10f64.ln() / 0.001;
        assert!((n as f64 - nominal).abs() / nominal < 0.01);
    }

    #[test]
    fn erle_accumulator_averages_powers() {
        let mut acc = ErleAccumulator::new(1);
        acc.add_run(&[1.0], &[0.1]).unwrap();
        acc.add_run(&[1.0], &[0.001]).unwrap();
        let c = acc.finish();
        assert!((c.values_db[0] - to_db(2.0 / 0.101)).abs() < 1e-12);
    }

    #[test]
    fn censor_ratio_examples() {
        assert_eq!(censoring_ratio(&[false; 10]), 0.0);
        assert_eq!(censoring_ratio(&[true; 10]), 1.0);
        assert_eq!(censoring_ratio(&[true, false, false, true]), 0.5);
    }

    #[test]
    fn op_count_examples() {
        let p = RtgaParams::new(-100.0, 2.0, 0.2, 0.022, 1.0).unwrap();
        let r = predicted_op_counts(9, &p, 0.0, 0);
        assert_eq!(r.rtga.additions, 40.0);
        // 5·9 + 5 + 2·2 + 100/2.
        assert_eq!(r.rtga.multiplications, 104.0);
        assert_eq!(r.rtga.nonlinear, 3.0);
        assert_eq!(r.proposed, r.rtga);
        let r = predicted_op_counts(9, &p, 0.7, 1);
        assert!((r.proposed_factor - 0.81).abs() < 1e-12);
        assert!((r.naive_factor - 0.39).abs() < 1e-12);
        assert_eq!(r.proposed.nonlinear, 3.0);
    }

    #[test]
    fn tail_and_crossings() {
        let c = LearningCurve {
            values_db: vec![0.0, -10.0, -20.0, -20.0],
            runs: 1,
        };
        assert!((c.tail_mean_db(0.5) + 20.0).abs() < 1e-12);
        assert_eq!(c.first_below(-15.0), Some(2));
        assert_eq!(c.first_below(-25.0), None);
        assert_eq!(c.first_above(-5.0), Some(0));
    }
}
