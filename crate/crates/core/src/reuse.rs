//! Reuse scheduling and the reuse pass that runs before each main update.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::censoring::OnlineCensor;
use crate::error::{Error, Result};
use crate::filter::{CostModel, FilterState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReuseScheme {
    #[default]
    None,
    /// Uniformly spaced samples over the retained history.
    Idr,
    /// The current sample, repeated.
    Dr,
    /// The most recent consecutive past samples.
    Undr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReuseConfig {
    pub scheme: ReuseScheme,
    pub l_reused: usize,
    pub window_cap: Option<usize>,
}

impl ReuseConfig {
    pub fn new(scheme: ReuseScheme, l_reused: usize, window_cap: Option<usize>) -> Result<Self> {
        let cfg = Self {
            scheme,
            l_reused,
            window_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn idr(l_reused: usize) -> Self {
        Self {
            scheme: ReuseScheme::Idr,
            l_reused,
            window_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.window_cap {
            if w < self.l_reused + 1 {
                return Err(Error::InvalidParameter(format!(
                    "reuse window {w} must be >= l_reused + 1 = {}",
                    self.l_reused + 1
                )));
            }
        }
        Ok(())
    }

    /// Number of reuse steps actually scheduled per iteration.
    pub fn steps(&self) -> usize {
        match self.scheme {
            ReuseScheme::None => 0,
            _ => self.l_reused,
        }
    }

    /// How many past pairs the history must retain, `None` for all of them.
    pub fn retention(&self) -> Option<usize> {
        match self.scheme {
            ReuseScheme::None | ReuseScheme::Dr => Some(1),
            ReuseScheme::Undr => Some(self.l_reused + 1),
            ReuseScheme::Idr => self.window_cap,
        }
    }
}

/// IDR schedule at time `i` for an order-`order` filter.
///
/// Without a cap: `idx(ii) = L + ⌊(i−L)·ii/(l+1)⌋`. With a cap `W` the span
/// becomes `W_eff = min(i−L, W)` and the anchor `i − W_eff`.
pub fn idr_indices(
    i: usize,
    order: usize,
    l_reused: usize,
    window_cap: Option<usize>,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(l_reused);
    idr_indices_into(i, order, l_reused, window_cap, &mut out)?;
    Ok(out)
}

fn idr_indices_into(
    i: usize,
    order: usize,
    l_reused: usize,
    window_cap: Option<usize>,
    out: &mut Vec<usize>,
) -> Result<()> {
    out.clear();
    if i <= order {
        return Err(Error::TooEarly { i, order });
    }
    let span = match window_cap {
        Some(w) => (i - order).min(w),
        None => i - order,
    };
    let anchor = i - span;
    let denom = l_reused + 1;
    out.extend((1..=l_reused).map(|ii| anchor + span * ii / denom));
    Ok(())
}

/// Scheduled reuse indices for any scheme.
pub fn schedule(i: usize, order: usize, cfg: &ReuseConfig) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    schedule_into(i, order, cfg, &mut out)?;
    Ok(out)
}

fn schedule_into(i: usize, order: usize, cfg: &ReuseConfig, out: &mut Vec<usize>) -> Result<()> {
    out.clear();
    match cfg.scheme {
        ReuseScheme::None => Ok(()),
        ReuseScheme::Idr => idr_indices_into(i, order, cfg.l_reused, cfg.window_cap, out),
        ReuseScheme::Dr => {
            if i <= order {
                return Err(Error::TooEarly { i, order });
            }
            out.extend(std::iter::repeat_n(i, cfg.l_reused));
            Ok(())
        }
        ReuseScheme::Undr => {
            if i <= order {
                return Err(Error::TooEarly { i, order });
            }
            out.extend((1..=cfg.l_reused).rev().map(|k| i.saturating_sub(k)));
            Ok(())
        }
    }
}

/// Observed `(x̃, d̃)` history.
///
/// Only the scalar noisy input stream is stored; regressors are rebuilt from
/// it on demand. With a capacity of `W` pairs the last `W + L − 1` input
/// samples are kept.
#[derive(Debug, Clone)]
pub struct SampleHistory {
    order: usize,
    capacity: Option<usize>,
    inputs: VecDeque<f64>,
    outputs: VecDeque<f64>,
    next: usize,
}

impl SampleHistory {
    pub fn full(order: usize) -> Self {
        Self {
            order,
            capacity: None,
            inputs: VecDeque::new(),
            outputs: VecDeque::new(),
            next: 0,
        }
    }

    pub fn ring(order: usize, pairs: usize) -> Self {
        let pairs = pairs.max(1);
        Self {
            order,
            capacity: Some(pairs),
            inputs: VecDeque::with_capacity(pairs + order),
            outputs: VecDeque::with_capacity(pairs + 1),
            next: 0,
        }
    }

    /// Storage sized for a reuse configuration.
    pub fn for_config(order: usize, cfg: &ReuseConfig) -> Self {
        match cfg.retention() {
            Some(w) => Self::ring(order, w),
            None => Self::full(order),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Append time `self.next_index()`: the newest noisy input scalar and
    /// the observed output.
    pub fn push(&mut self, x_tilde_newest: f64, d_tilde: f64) {
        self.inputs.push_back(x_tilde_newest);
        self.outputs.push_back(d_tilde);
        self.next += 1;
        if let Some(w) = self.capacity {
            if self.outputs.len() > w {
                self.outputs.pop_front();
            }
            let keep = w + self.order - 1;
            while self.inputs.len() > keep {
                self.inputs.pop_front();
            }
        }
    }

    pub fn next_index(&self) -> usize {
        self.next
    }

    /// Inclusive range of retrievable indices.
    pub fn range(&self) -> Option<(usize, usize)> {
        if self.outputs.is_empty() {
            None
        } else {
            Some((self.next - self.outputs.len(), self.next - 1))
        }
    }

    fn check(&self, index: usize) -> Result<()> {
        match self.range() {
            Some((first, last)) if index >= first && index <= last => Ok(()),
            Some((first, last)) => Err(Error::HistoryGap { index, first, last }),
            None => Err(Error::HistoryGap {
                index,
                first: 0,
                last: 0,
            }),
        }
    }

    pub fn output(&self, index: usize) -> Result<f64> {
        self.check(index)?;
        let first = self.next - self.outputs.len();
        Ok(self.outputs[index - first])
    }

    /// Rebuild the newest-first regressor at `index` (zero before time 0).
    pub fn regressor_into(&self, index: usize, out: &mut [f64]) -> Result<()> {
        if out.len() != self.order {
            return Err(Error::Dimension {
                expected: self.order,
                actual: out.len(),
            });
        }
        self.check(index)?;
        let first_input = self.next - self.inputs.len();
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = match index.checked_sub(k) {
                Some(t) if t >= first_input => self.inputs[t - first_input],
                Some(_) => unreachable!("ring keeps L - 1 extra inputs"),
                None => 0.0,
            };
        }
        Ok(())
    }

    pub fn regressor(&self, index: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.order];
        self.regressor_into(index, &mut out)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReuseStats {
    pub scheduled: u64,
    pub executed: u64,
    pub censored: u64,
}

impl ReuseStats {
    pub fn absorb(&mut self, other: ReuseStats) {
        self.scheduled += other.scheduled;
        self.executed += other.executed;
        self.censored += other.censored;
    }

    pub fn censor_ratio(&self) -> f64 {
        if self.scheduled == 0 {
            0.0
        } else {
            self.censored as f64 / self.scheduled as f64
        }
    }
}

/// Reusable buffers for the reuse pass, one per filter instance.
#[derive(Debug, Clone)]
pub struct ReusePass {
    config: ReuseConfig,
    indices: Vec<usize>,
    regressor: Vec<f64>,
}

impl ReusePass {
    pub fn new(config: ReuseConfig, order: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            indices: Vec::with_capacity(config.l_reused),
            regressor: vec![0.0; order],
        })
    }

    pub fn config(&self) -> &ReuseConfig {
        &self.config
    }

    /// Run the scheduled reuse steps at time `i`, updating `state.w` in place.
    ///
    /// Each step is gated on its own error by `censor`. The scale tracker is
    /// read but never updated here.
    pub fn run(
        &mut self,
        i: usize,
        state: &mut FilterState,
        history: &SampleHistory,
        model: &CostModel,
        censor: Option<&OnlineCensor>,
    ) -> Result<ReuseStats> {
        let mut stats = ReuseStats::default();
        if self.config.steps() == 0 {
            return Ok(stats);
        }
        schedule_into(i, state.order(), &self.config, &mut self.indices)?;
        for &idx in &self.indices {
            history.regressor_into(idx, &mut self.regressor)?;
            let d = history.output(idx)?;
            stats.scheduled += 1;
            if let Some(c) = censor {
                let e_temp = state.error_on(&self.regressor, d);
                if c.is_censored(e_temp) {
                    stats.censored += 1;
                    continue;
                }
            }
            state.descend_on(model, &self.regressor, d)?;
            stats.executed += 1;
        }
        Ok(stats)
    }
}

/// One-shot reuse pass.
pub fn reuse_pass(
    i: usize,
    state: &mut FilterState,
    history: &SampleHistory,
    model: &CostModel,
    cfg: &ReuseConfig,
    censor: Option<&OnlineCensor>,
) -> Result<ReuseStats> {
    ReusePass::new(*cfg, state.order())?.run(i, state, history, model, censor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::censoring::{CensorConfig, ScaleEstimator, ScaleState};
    use crate::filter::{Kernel, RtgaParams};
    use crate::noise::NoiseSpec;
    use crate::signal::{EivStream, TrueSystem, WhiteGaussian};
    use proptest::prelude::*;

    fn model(mu: f64) -> CostModel {
        CostModel::new(
            Kernel::Rtga,
            RtgaParams::new(-100.0, 2.0, 0.1, mu, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn index_examples() {
        assert!(idr_indices(8000, 9, 0, None).unwrap().is_empty());
        assert_eq!(idr_indices(8000, 9, 3, None).unwrap(), vec![2006, 4004, 6002]);
        assert_eq!(idr_indices(8000, 9, 1, Some(200)).unwrap(), vec![7900]);
        assert!(matches!(
            idr_indices(9, 9, 1, None),
            Err(Error::TooEarly { i: 9, order: 9 })
        ));
    }

    #[test]
    fn other_schedules() {
        let dr = ReuseConfig::new(ReuseScheme::Dr, 3, None).unwrap();
        assert_eq!(schedule(50, 9, &dr).unwrap(), vec![50, 50, 50]);
        let undr = ReuseConfig::new(ReuseScheme::Undr, 3, None).unwrap();
        assert_eq!(schedule(50, 9, &undr).unwrap(), vec![47, 48, 49]);
        assert!(schedule(50, 9, &ReuseConfig::none()).unwrap().is_empty());
        assert!(ReuseConfig::new(ReuseScheme::Idr, 3, Some(3)).is_err());
        assert!(ReuseConfig::new(ReuseScheme::Idr, 3, Some(4)).is_ok());
    }

    proptest! {
        #[test]
        fn bounded_reduces_to_unbounded(order in 1usize..40, extra in 1usize..500, l in 0usize..8, slack in 0usize..50) {
            let i = order + extra;
            let w = extra + slack;
            prop_assume!(w >= l + 1);
            prop_assert_eq!(
                idr_indices(i, order, l, Some(w)).unwrap(),
                idr_indices(i, order, l, None).unwrap()
            );
        }

        #[test]
        fn indices_ordered_and_inside(order in 1usize..40, extra in 1usize..5000, l in 0usize..8, w in 1usize..400) {
            let i = order + extra;
            prop_assume!(w >= l + 1);
            for cap in [None, Some(w)] {
                let idx = idr_indices(i, order, l, cap).unwrap();
                let span = cap.map_or(i - order, |w| (i - order).min(w));
                let anchor = i - span;
                prop_assert_eq!(idx.len(), l);
                for k in &idx {
                    prop_assert!(*k >= anchor && *k < i);
                }
                if span > l {
                    for pair in idx.windows(2) {
                        prop_assert!(pair[0] < pair[1]);
                    }
                    if let Some(first) = idx.first() {
                        prop_assert!(*first > anchor);
                    }
                }
            }
        }

        #[test]
        fn ring_matches_full(order in 1usize..12, cap in 1usize..30, n in 1usize..120, seed in 0u64..1000) {
            let mut full = SampleHistory::full(order);
            let mut ring = SampleHistory::ring(order, cap);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let x: f64 = rand::Rng::random(&mut rng);
                let d: f64 = rand::Rng::random(&mut rng);
                full.push(x, d);
                ring.push(x, d);
            }
            let (first, last) = ring.range().unwrap();
            prop_assert_eq!(last, n - 1);
            prop_assert_eq!(last + 1 - first, cap.min(n));
            for k in first..=last {
                prop_assert_eq!(ring.regressor(k).unwrap(), full.regressor(k).unwrap());
                prop_assert_eq!(ring.output(k).unwrap(), full.output(k).unwrap());
            }
            if first > 0 {
                let gap = matches!(ring.output(first - 1), Err(Error::HistoryGap { .. }));
                prop_assert!(gap);
            }
        }
    }

    use rand::SeedableRng;

    #[test]
    fn regressor_rebuild() {
        let mut h = SampleHistory::full(3);
        for (t, x) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            h.push(x, 10.0 * t as f64);
        }
        assert_eq!(h.regressor(0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(h.regressor(3).unwrap(), vec![4.0, 3.0, 2.0]);
        assert_eq!(h.output(2).unwrap(), 20.0);
        assert!(matches!(h.output(4), Err(Error::HistoryGap { index: 4, .. })));
    }

    fn filled_history(order: usize, n: usize) -> SampleHistory {
        let sys = TrueSystem::new(vec![0.5; order]).unwrap();
        let mut stream = EivStream::new(
            sys,
            WhiteGaussian::new(1),
            (NoiseSpec::gaussian(0.1), NoiseSpec::gaussian(0.1)),
            2,
        )
        .unwrap();
        let mut h = SampleHistory::full(order);
        for _ in 0..n {
            let v = stream.advance().unwrap();
            h.push(v.x_tilde[0], v.d_tilde);
        }
        h
    }

    #[test]
    fn none_is_identity() {
        let h = filled_history(4, 100);
        let mut s = FilterState::from_weights(vec![0.1, -0.2, 0.3, 0.0]);
        let before = s.clone();
        let stats = reuse_pass(99, &mut s, &h, &model(0.05), &ReuseConfig::none(), None).unwrap();
        assert_eq!(s, before);
        assert_eq!(stats, ReuseStats::default());
    }

    #[test]
    fn dr_repeats_current_sample() {
        let h = filled_history(4, 100);
        let m = model(0.01);
        let mut s = FilterState::new(4);
        let cfg = ReuseConfig::new(ReuseScheme::Dr, 3, None).unwrap();
        reuse_pass(99, &mut s, &h, &m, &cfg, None).unwrap();

        let x = h.regressor(99).unwrap();
        let d = h.output(99).unwrap();
        let mut w = vec![0.0; 4];
        let mut scratch = vec![0.0; 4];
        for _ in 0..3 {
            m.descend(&mut w, &x, d, &mut scratch, 0).unwrap();
        }
        assert_eq!(s.w, w);
    }

    #[test]
    fn dr_steps_share_direction_for_b2() {
        let h = filled_history(4, 100);
        let m = model(1e-6);
        let x = h.regressor(99).unwrap();
        let d = h.output(99).unwrap();
        let w0 = vec![0.0; 4];
        let g0 = m.gradient(d, &x, &w0).unwrap().g;
        let mut s = FilterState::new(4);
        let cfg = ReuseConfig::new(ReuseScheme::Dr, 2, None).unwrap();
        reuse_pass(99, &mut s, &h, &m, &cfg, None).unwrap();
        let n0 = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n1 = s.w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = -g0.iter().zip(&s.w).map(|(a, b)| a * b).sum::<f64>() / (n0 * n1);
        assert!((cos - 1.0).abs() < 1e-9, "{cos}");
    }

    #[test]
    fn huge_threshold_makes_reuse_a_noop() {
        let h = filled_history(4, 200);
        let mut cfg = CensorConfig::with_defaults(0.5, ScaleEstimator::RobustMedian).unwrap();
        cfg.kappa = 1e300;
        let censor = OnlineCensor {
            config: cfg,
            scale: ScaleState::primed(1.0),
        };
        let mut s = FilterState::from_weights(vec![0.2, 0.1, 0.0, -0.1]);
        let before = s.w.clone();
        let stats = reuse_pass(
            199,
            &mut s,
            &h,
            &model(0.05),
            &ReuseConfig::idr(3),
            Some(&censor),
        )
        .unwrap();
        assert_eq!(s.w, before);
        assert_eq!(stats.censored, 3);
        assert_eq!(stats.executed, 0);
    }

    #[test]
    fn gap_is_reported() {
        let mut h = SampleHistory::ring(4, 10);
        for k in 0..100 {
            h.push(k as f64, 0.0);
        }
        let mut s = FilterState::new(4);
        let err = reuse_pass(99, &mut s, &h, &model(0.01), &ReuseConfig::idr(2), None).unwrap_err();
        assert!(matches!(err, Error::HistoryGap { first: 90, last: 99, .. }));
    }

    /// Iterations until ‖w − w_o‖ < 1e-2 on a noiseless 2-tap system.
    fn iterations_to_converge(cfg: ReuseConfig) -> usize {
        let w_o = vec![-0.6, 0.8];
        let order = 2;
        let sys = TrueSystem::new(w_o.clone()).unwrap();
        let mut stream = EivStream::new(
            sys,
            WhiteGaussian::new(7),
            (NoiseSpec::silent(), NoiseSpec::silent()),
            8,
        )
        .unwrap();
        let m = model(0.02);
        let mut state = FilterState::new(order);
        let mut hist = SampleHistory::for_config(order, &cfg);
        let mut pass = ReusePass::new(cfg, order).unwrap();
        for i in 0..100_000 {
            let v = stream.advance().unwrap();
            hist.push(v.x_tilde[0], v.d_tilde);
            let (x, d) = (v.x_tilde.to_vec(), v.d_tilde);
            if i < order {
                continue;
            }
            if i > order {
                pass.run(i, &mut state, &hist, &m, None).unwrap();
            }
            state.update_on(&m, &x, d, false).unwrap();
            let dist = state
                .w
                .iter()
                .zip(&w_o)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist < 1e-2 {
                return i;
            }
        }
        usize::MAX
    }

    #[test]
    fn idr_converges_faster_noiseless() {
        let plain = iterations_to_converge(ReuseConfig::none());
        let idr = iterations_to_converge(ReuseConfig::idr(3));
        assert!(plain < usize::MAX);
        assert!(idr < plain, "idr {idr} vs plain {plain}");
    }
}
