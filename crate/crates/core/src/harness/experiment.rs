//! Monte-Carlo system identification and tracking.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{
    nmsd_ratio, predicted_op_counts, ErleAccumulator, ErleSmoother, LearningCurve, NmsdAccumulator,
    OpCountPrediction,
};
use crate::noise::{case_spec, NoiseSpec};
use crate::reuse::ReuseStats;
use crate::signal::{EivStream, TrueSystem, WhiteGaussian};

use super::algorithm::{AdaptiveFilter, AlgorithmSpec};
use super::config::{ExperimentConfig, Mode};
use super::io::{curves_table, format_sig6, CsvTable};

/// Stream used to draw the per-run true weights.
const WEIGHT_STREAM: u64 = 3;

/// Unit-norm Gaussian weight vector for a run seed.
pub fn random_unit_weights(order: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WEIGHT_STREAM);
    loop {
        let w: Vec<f64> = (0..order).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return w.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Per-iteration deviation measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deviation {
    /// ‖w − w_o‖²/‖w_o‖².
    Normalized,
    /// ‖w − w_o‖².
    Absolute,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TrialPlan<'a> {
    pub specs: &'a [AlgorithmSpec],
    pub order: usize,
    pub samples: usize,
    pub deviation: Deviation,
    pub track_erle: bool,
}

/// Everything one filter produced in one run.
#[derive(Debug, Clone, Default)]
pub(crate) struct Track {
    pub deviation: Vec<f64>,
    pub echo_power: Vec<f64>,
    pub residual_power: Vec<f64>,
    pub counters: Counters,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Main-loop decisions at or after the midpoint.
    pub steady_decisions: u64,
    pub steady_censored: u64,
    /// All main-loop decisions (one per active iteration).
    pub active: u64,
    pub censored: u64,
    pub reuse: ReuseStats,
}

impl Counters {
    fn absorb(&mut self, o: &Counters) {
        self.steady_decisions += o.steady_decisions;
        self.steady_censored += o.steady_censored;
        self.active += o.active;
        self.censored += o.censored;
        self.reuse.absorb(o.reuse);
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn steady_censor_ratio(&self) -> f64 {
        Self::ratio(self.steady_censored, self.steady_decisions)
    }

    pub fn censor_ratio(&self) -> f64 {
        Self::ratio(self.censored, self.active)
    }

    /// Main plus reuse updates actually executed, per active iteration.
    pub fn executed_per_iteration(&self) -> f64 {
        Self::ratio(self.active - self.censored + self.reuse.executed, self.active)
    }
}

/// Drive every filter in `plan` over one EIV stream.
pub(crate) fn run_trial<I: Iterator<Item = f64>>(
    plan: &TrialPlan<'_>,
    system: TrueSystem,
    input: I,
    noise: (NoiseSpec, NoiseSpec),
    seed: u64,
) -> Result<Vec<Track>> {
    let mut stream = EivStream::new(system, input, noise, seed)?;
    let mut filters = plan
        .specs
        .iter()
        .map(|s| AdaptiveFilter::new(s, plan.order))
        .collect::<Result<Vec<_>>>()?;
    let n = plan.samples;
    let mut tracks: Vec<Track> = plan
        .specs
        .iter()
        .map(|_| Track {
            deviation: Vec::with_capacity(n),
            echo_power: Vec::with_capacity(if plan.track_erle { n } else { 0 }),
            residual_power: Vec::with_capacity(if plan.track_erle { n } else { 0 }),
            counters: Counters::default(),
        })
        .collect();
    let mut smoothers = vec![ErleSmoother::new(); plan.specs.len()];
    let steady_from = n / 2;
    for i in 0..n {
        let v = stream.advance()?;
        for ((f, t), sm) in filters.iter_mut().zip(&mut tracks).zip(&mut smoothers) {
            let out = f.step(i, v.x_tilde, v.d_tilde)?;
            let w = f.weights();
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    iteration: i,
                    what: "weights".into(),
                });
            }
            let dev = match plan.deviation {
                Deviation::Normalized => nmsd_ratio(w, v.true_weights, i)?,
                Deviation::Absolute => w
                    .iter()
                    .zip(v.true_weights)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
            };
            t.deviation.push(dev);
            if plan.track_erle {
                sm.push(v.d, out.error);
                t.echo_power.push(sm.echo_power);
                t.residual_power.push(sm.residual_power);
            }
            if out.active {
                let c = &mut t.counters;
                c.active += 1;
                c.censored += out.censored as u64;
                if i >= steady_from {
                    c.steady_decisions += 1;
                    c.steady_censored += out.censored as u64;
                }
            }
        }
    }
    for (f, t) in filters.iter().zip(&mut tracks) {
        t.counters.reuse = f.reuse_stats();
    }
    Ok(tracks)
}

/// Ordered reduction of per-run tracks.
#[derive(Debug, Clone)]
pub(crate) struct Aggregate {
    pub deviation: Vec<NmsdAccumulator>,
    pub erle: Vec<ErleAccumulator>,
    pub counters: Vec<Counters>,
}

impl Aggregate {
    fn new(algorithms: usize, samples: usize, erle: bool) -> Self {
        Self {
            deviation: (0..algorithms).map(|_| NmsdAccumulator::new(samples)).collect(),
            erle: if erle {
                (0..algorithms).map(|_| ErleAccumulator::new(samples)).collect()
            } else {
                Vec::new()
            },
            counters: vec![Counters::default(); algorithms],
        }
    }

    fn absorb(&mut self, tracks: Vec<Track>) -> Result<()> {
        for (k, t) in tracks.into_iter().enumerate() {
            self.deviation[k].add_run(&t.deviation)?;
            if let Some(acc) = self.erle.get_mut(k) {
                acc.add_run(&t.echo_power, &t.residual_power)?;
            }
            self.counters[k].absorb(&t.counters);
        }
        Ok(())
    }
}

/// Runs `trial(r)` for every run index, in parallel batches, reducing in
/// run order so the result does not depend on scheduling.
pub(crate) fn monte_carlo<F>(plan: &TrialPlan<'_>, runs: usize, trial: F) -> Result<Aggregate>
where
    F: Fn(usize) -> Result<Vec<Track>> + Sync,
{
    let mut agg = Aggregate::new(plan.specs.len(), plan.samples, plan.track_erle);
    let batch = (rayon::current_num_threads() * 2).max(4);
    let mut start = 0;
    while start < runs {
        let end = (start + batch).min(runs);
        let results: Vec<Result<Vec<Track>>> = (start..end)
            .into_par_iter()
            .map(|r| {
                trial(r).map_err(|e| Error::RunFailed {
                    run: r,
                    source: Box::new(e),
                })
            })
            .collect();
        for res in results {
            agg.absorb(res?)?;
        }
        start = end;
    }
    Ok(agg)
}

/// Per-algorithm figures for the text summary.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub label: String,
    pub tail_db: f64,
    pub counters: Counters,
    /// Reused samples per iteration.
    pub l_reused: usize,
    pub predicted: OpCountPrediction,
    pub final_erle_db: Option<f64>,
}

impl AlgorithmSummary {
    pub(crate) fn new(spec: &AlgorithmSpec, order: usize, curve: &LearningCurve, tail: f64, counters: Counters) -> Self {
        let p = spec.censor.map_or(0.0, |c| c.p_ce);
        Self {
            label: spec.label(),
            tail_db: curve.tail_mean_db(tail),
            counters,
            l_reused: spec.reuse.steps(),
            predicted: predicted_op_counts(order, &spec.params, p, spec.reuse.steps()),
            final_erle_db: None,
        }
    }

    /// `(1 − p̂)(1 + l(1 − p̂_r))` with measured ratios.
    pub fn product_form(&self) -> f64 {
        let c = &self.counters;
        (1.0 - c.censor_ratio()) * (1.0 + self.l_reused as f64 * (1.0 - c.reuse.censor_ratio()))
    }

    /// `(1 − p̂) + l(1 − p̂_r)`: main and reuse gates act independently.
    pub fn independent_form(&self) -> f64 {
        let c = &self.counters;
        (1.0 - c.censor_ratio()) + self.l_reused as f64 * (1.0 - c.reuse.censor_ratio())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub description: String,
    pub curves: Vec<(String, LearningCurve)>,
    pub erle: Vec<(String, LearningCurve)>,
    pub summaries: Vec<AlgorithmSummary>,
    /// Primary output for theory and sweep modes.
    pub table: Option<CsvTable>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(mode: Mode, description: String) -> Self {
        Self {
            mode,
            description,
            curves: Vec::new(),
            erle: Vec::new(),
            summaries: Vec::new(),
            table: None,
            notes: Vec::new(),
        }
    }

    pub fn curve(&self, label: &str) -> Option<&LearningCurve> {
        self.curves.iter().find(|(l, _)| l == label).map(|(_, c)| c)
    }

    pub fn summary(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.label == label)
    }

    /// The CSV written to the main output path.
    pub fn primary_table(&self) -> Result<CsvTable> {
        match &self.table {
            Some(t) => Ok(t.clone()),
            None => curves_table(&self.curves),
        }
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", self.description).unwrap();
        for n in &self.notes {
            writeln!(s, "note: {n}").unwrap();
        }
        for a in &self.summaries {
            let c = &a.counters;
            writeln!(s, "\n[{}]", a.label).unwrap();
            writeln!(s, "tail_db = {}", format_sig6(a.tail_db)).unwrap();
            if let Some(e) = a.final_erle_db {
                writeln!(s, "final_erle_db = {}", format_sig6(e)).unwrap();
            }
            writeln!(s, "censor_ratio_steady = {}", format_sig6(c.steady_censor_ratio())).unwrap();
            writeln!(s, "censor_ratio_all = {}", format_sig6(c.censor_ratio())).unwrap();
            writeln!(s, "reuse_censor_ratio = {}", format_sig6(c.reuse.censor_ratio())).unwrap();
            writeln!(s, "executed_updates_per_iteration = {}", format_sig6(c.executed_per_iteration())).unwrap();
            writeln!(s, "independent_gate_form = {}", format_sig6(a.independent_form())).unwrap();
            writeln!(s, "product_form = {}", format_sig6(a.product_form())).unwrap();
            let p = &a.predicted;
            writeln!(
                s,
                "ops_plain = {} add, {} mul, {} nonlinear",
                format_sig6(p.rtga.additions),
                format_sig6(p.rtga.multiplications),
                p.rtga.nonlinear
            )
            .unwrap();
            writeln!(
                s,
                "ops_tabulated_factor = {} ({} add, {} mul)",
                format_sig6(p.proposed_factor),
                format_sig6(p.proposed.additions),
                format_sig6(p.proposed.multiplications)
            )
            .unwrap();
            writeln!(
                s,
                "ops_naive_factor = {} ({} add, {} mul)",
                format_sig6(p.naive_factor),
                format_sig6(p.naive.additions),
                format_sig6(p.naive.multiplications)
            )
            .unwrap();
        }
        s
    }

    /// Sibling output paths: `x.csv` gives `x.erle.csv` and `x.summary.txt`.
    pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
        (out.with_extension("erle.csv"), out.with_extension("summary.txt"))
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.primary_table()?.write(out)?;
        let (erle, summary) = Self::output_paths(out);
        if !self.erle.is_empty() {
            curves_table(&self.erle)?.write(&erle)?;
        }
        std::fs::write(summary, self.summary_text())?;
        Ok(())
    }
}

fn describe(cfg: &ExperimentConfig, samples: usize) -> String {
    format!(
        "mode = {:?}, case = {}, order = {}, samples = {}, runs = {}, seed = {}",
        cfg.mode(),
        cfg.experiment.case,
        cfg.order(),
        samples,
        cfg.runs(),
        cfg.experiment.seed
    )
    .to_lowercase()
}

/// Sysid and tracking share this path; tracking adds the shift schedule.
fn run_identification(cfg: &ExperimentConfig, specs: &[AlgorithmSpec]) -> Result<ExperimentReport> {
    let order = cfg.order();
    let samples = cfg.samples();
    let noise = case_spec(cfg.experiment.case)?;
    let shifts = if cfg.mode() == Mode::Tracking {
        cfg.tracking.shifts.clone()
    } else {
        Vec::new()
    };
    let base = cfg.experiment.seed;
    let plan = TrialPlan {
        specs,
        order,
        samples,
        deviation: Deviation::Normalized,
        track_erle: false,
    };
    let agg = monte_carlo(&plan, cfg.runs(), |r| {
        let seed = base.wrapping_add(r as u64);
        let system = TrueSystem::with_shifts(random_unit_weights(order, seed), shifts.clone())?;
        run_trial(&plan, system, WhiteGaussian::new(seed), noise, seed)
    })?;
    let mut report = ExperimentReport::new(cfg.mode(), describe(cfg, samples));
    for (k, spec) in specs.iter().enumerate() {
        let curve = agg.deviation[k].finish();
        report.summaries.push(AlgorithmSummary::new(
            spec,
            order,
            &curve,
            cfg.experiment.tail_fraction,
            agg.counters[k],
        ));
        report.curves.push((spec.label(), curve));
    }
    dedupe_labels(&mut report);
    Ok(report)
}

/// Suffix repeated labels with their position so CSV columns stay unique.
pub(crate) fn dedupe_labels(report: &mut ExperimentReport) {
    let labels: Vec<String> = report.curves.iter().map(|(l, _)| l.clone()).collect();
    for (k, label) in labels.iter().enumerate() {
        if labels.iter().filter(|l| *l == label).count() > 1 {
            let new = format!("{label}_{k}");
            report.curves[k].0 = new.clone();
            if let Some((l, _)) = report.erle.get_mut(k) {
                *l = new.clone();
            }
            if let Some(s) = report.summaries.get_mut(k) {
                s.label = new;
            }
        }
    }
}

pub fn run_sysid(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_identification(cfg, &cfg.algorithms()?)
}

pub fn run_tracking(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_identification(cfg, &cfg.algorithms()?)
}

/// Identification with explicit algorithm specs, bypassing the name list.
pub fn run_sysid_with(cfg: &ExperimentConfig, specs: &[AlgorithmSpec]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no algorithms given".into()));
    }
    run_identification(cfg, specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{Kernel, LimitFamily, RtgaParams};
    use crate::harness::algorithm::Preset;
    use crate::reuse::ReuseConfig;

    fn small(mode: Mode) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_mode(mode);
        c.experiment.runs = Some(3);
        c.experiment.samples = Some(600);
        c
    }

    #[test]
    fn unit_weights() {
        let w = random_unit_weights(9, 4);
        assert!((w.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w, random_unit_weights(9, 4));
        assert_ne!(w, random_unit_weights(9, 5));
    }

    #[test]
    fn noiseless_descent_is_monotone() {
        let spec = AlgorithmSpec {
            preset: Preset::Gdtls,
            kernel: Kernel::Limit(LimitFamily::Tlmp),
            params: RtgaParams::new(2.0, 2.0, 1.0, 0.005, 1.0).unwrap(),
            censor: None,
            reuse: ReuseConfig::none(),
        };
        let plan = TrialPlan {
            specs: std::slice::from_ref(&spec),
            order: 4,
            samples: 3000,
            deviation: Deviation::Normalized,
            track_erle: false,
        };
        let system = TrueSystem::new(random_unit_weights(4, 1)).unwrap();
        let t = run_trial(
            &plan,
            system,
            WhiteGaussian::new(1),
            (NoiseSpec::silent(), NoiseSpec::silent()),
            1,
        )
        .unwrap();
        let dev = &t[0].deviation;
        let smoothed: Vec<f64> = dev.chunks(100).map(|c| c.iter().sum::<f64>()).collect();
        assert!(smoothed.windows(2).all(|p| p[1] <= p[0]), "{smoothed:?}");
        assert!(dev[2999] < 1e-3 * dev[10]);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let c = small(Mode::Sysid);
        let a = run_sysid(&c).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_sysid(&c).unwrap());
        assert_eq!(a.primary_table().unwrap().render(), b.primary_table().unwrap().render());
        assert_eq!(a.summary_text(), b.summary_text());
    }

    #[test]
    fn tracking_without_shifts_matches_sysid() {
        let mut t = small(Mode::Tracking);
        t.tracking.shifts.clear();
        t.reuse.window = Some(50);
        let mut s = small(Mode::Sysid);
        s.reuse.window = Some(50);
        let a = run_tracking(&t).unwrap();
        let b = run_sysid(&s).unwrap();
        assert_eq!(a.curves, b.curves);
    }

    #[test]
    fn independent_gate_identity() {
        let mut c = small(Mode::Sysid);
        c.experiment.samples = Some(3000);
        c.algorithm.names = vec!["proposed".into()];
        c.censoring.p_ce = 0.5;
        let r = run_sysid(&c).unwrap();
        let s = &r.summaries[0];
        let measured = s.counters.executed_per_iteration();
        let rel = (measured - s.independent_form()).abs() / measured;
        assert!(rel < 0.02, "{measured} vs {}", s.independent_form());
    }

    #[test]
    fn counts_split_main_and_reuse() {
        let c = small(Mode::Sysid);
        let r = run_sysid(&c).unwrap();
        let plain = r.summary("rtga").unwrap();
        assert_eq!(plain.counters.active, 3 * (600 - 9));
        assert_eq!(plain.counters.censored, 0);
        assert_eq!(plain.counters.reuse.scheduled, 0);
        let prop = r.summary("proposed_p30_l3").unwrap();
        assert_eq!(prop.counters.reuse.scheduled, 3 * 3 * (600 - 10));
        assert!(prop.counters.censored > 0);
    }

    #[test]
    fn failed_runs_are_reported() {
        let c = small(Mode::Sysid);
        let specs = c.algorithms().unwrap();
        let plan = TrialPlan {
            specs: &specs,
            order: 9,
            samples: 50,
            deviation: Deviation::Normalized,
            track_erle: false,
        };
        let res = monte_carlo(&plan, 6, |r| {
            if r >= 4 {
                Err(Error::NonFinite {
                    iteration: 7,
                    what: "weights".into(),
                })
            } else {
                run_trial(
                    &plan,
                    TrueSystem::new(random_unit_weights(9, r as u64)).unwrap(),
                    WhiteGaussian::new(r as u64),
                    case_spec(1).unwrap(),
                    r as u64,
                )
            }
        });
        match res {
            Err(Error::RunFailed { run: 4, source }) => {
                assert!(matches!(*source, Error::NonFinite { iteration: 7, .. }))
            }
            other => panic!("expected run 4 to fail, got {other:?}"),
        }
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sub/nmsd.csv");
        let r = run_sysid(&small(Mode::Sysid)).unwrap();
        r.write(&out).unwrap();
        let t = CsvTable::read(&out).unwrap();
        assert_eq!(t.header, ["iteration", "rtga", "proposed_p30_l3"]);
        assert_eq!(t.rows.len(), 600);
        let text = std::fs::read_to_string(dir.path().join("sub/nmsd.summary.txt")).unwrap();
        assert!(text.contains("[proposed_p30_l3]"));
    }
}
