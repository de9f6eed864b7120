//! Predicted against simulated steady-state MSD.

use crate::censoring::CensorConfig;
use crate::error::Result;
use crate::filter::{Kernel, RtgaParams};
use crate::metrics::to_db;
use crate::reuse::ReuseConfig;
use crate::signal::{TrueSystem, WhiteGaussian};
use crate::theory::{effective_shape, steady_state_msd, TheoryInputs};

use super::algorithm::{AlgorithmSpec, Preset};
use super::config::{ExperimentConfig, TheorySetting};
use super::experiment::{monte_carlo, random_unit_weights, run_trial, Deviation, ExperimentReport, TrialPlan};
use super::io::{format_sig6, CsvTable};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub label: String,
    pub alpha: f64,
    pub theory_db: f64,
    pub simulated_db: f64,
}

impl TheoryRow {
    pub fn gap_db(&self) -> f64 {
        self.simulated_db - self.theory_db
    }
}

fn compare_one(cfg: &ExperimentConfig, w_o: &[f64], s: &TheorySetting) -> Result<TheoryRow> {
    let th = &cfg.theory;
    let si2 = s.input.total_variance();
    let so2 = s.output.total_variance();
    let alpha = effective_shape(w_o, &s.input, &s.output)?;
    let inputs = TheoryInputs::white(w_o, si2, so2, alpha, s.a, s.b, s.c, 1.0 - th.p_ce)?;
    let theory_db = to_db(steady_state_msd(&inputs, th.mu)?);

    let censor = if th.p_ce > 0.0 {
        let c = &cfg.censoring;
        Some(CensorConfig::new(th.p_ce, c.window, c.tau, c.estimator)?)
    } else {
        None
    };
    let spec = AlgorithmSpec {
        preset: Preset::Rtga,
        kernel: Kernel::Rtga,
        params: RtgaParams::new(s.a, s.b, s.c, th.mu, so2 / si2)?,
        censor,
        reuse: ReuseConfig::none(),
    };
    let plan = TrialPlan {
        specs: std::slice::from_ref(&spec),
        order: w_o.len(),
        samples: cfg.samples(),
        deviation: Deviation::Absolute,
        track_erle: false,
    };
    let base = cfg.experiment.seed;
    let agg = monte_carlo(&plan, cfg.runs(), |r| {
        let seed = base.wrapping_add(r as u64);
        run_trial(
            &plan,
            TrueSystem::new(w_o.to_vec())?,
            WhiteGaussian::new(seed),
            (s.input, s.output),
            seed,
        )
    })?;
    let simulated_db = agg.deviation[0].finish().tail_mean_db(cfg.experiment.tail_fraction);
    Ok(TheoryRow {
        label: s.label.clone(),
        alpha,
        theory_db,
        simulated_db,
    })
}

/// One row per configured setting. The true weights are fixed by the base
/// seed and shared by every run.
pub fn theory_rows(cfg: &ExperimentConfig) -> Result<Vec<TheoryRow>> {
    cfg.validate()?;
    let w_o = random_unit_weights(cfg.order(), cfg.experiment.seed);
    cfg.theory
        .settings
        .iter()
        .map(|s| compare_one(cfg, &w_o, s))
        .collect()
}

pub fn run_theory_compare(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let rows = theory_rows(cfg)?;
    let mut table = CsvTable::new(
        ["setting", "alpha", "theory_msd_db", "simulated_msd_db", "gap_db"]
            .map(String::from)
            .to_vec(),
    );
    for r in &rows {
        table.push(vec![
            r.label.clone(),
            format_sig6(r.alpha),
            format_sig6(r.theory_db),
            format_sig6(r.simulated_db),
            format_sig6(r.gap_db()),
        ]);
    }
    let mut report = ExperimentReport::new(
        cfg.mode(),
        format!(
            "mode = theory, order = {}, samples = {}, runs = {}, seed = {}, mu = {}, p_ce = {}",
            cfg.order(),
            cfg.samples(),
            cfg.runs(),
            cfg.experiment.seed,
            cfg.theory.mu,
            cfg.theory.p_ce
        ),
    );
    for r in &rows {
        report.notes.push(format!(
            "{}: theory {} dB, simulated {} dB, gap {} dB",
            r.label,
            format_sig6(r.theory_db),
            format_sig6(r.simulated_db),
            format_sig6(r.gap_db())
        ));
    }
    report.table = Some(table);
    Ok(report)
}
