//! Cost surfaces over a 2-tap grid and one-parameter sweeps.

use crate::error::{Error, Result};
use crate::filter::CostModel;
use crate::noise::NoiseSpec;
use crate::signal::{EivStream, TrueSystem, WhiteGaussian};

use super::config::{ExperimentConfig, Mode, SweepKind, SweepParameter};
use super::experiment::{run_sysid, ExperimentReport};
use super::io::{format_sig6, CsvTable};

/// Sample-mean cost of each model over a grid centred on `w_o`.
///
/// Rows are `w1,w2,<cost per model>`; `w1` varies fastest.
pub fn cost_surface(
    models: &[(String, CostModel)],
    w_o: &[f64],
    noise: (NoiseSpec, NoiseSpec),
    extent: f64,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<CsvTable> {
    if w_o.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            actual: w_o.len(),
        });
    }
    if points < 2 || samples == 0 {
        return Err(Error::InvalidParameter(
            "a surface needs at least 2 points per axis and 1 sample".into(),
        ));
    }
    let mut stream = EivStream::new(TrueSystem::new(w_o.to_vec())?, WhiteGaussian::new(seed), noise, seed)?;
    let mut data = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v = stream.advance()?;
        data.push(([v.x_tilde[0], v.x_tilde[1]], v.d_tilde));
    }
    let mut header = vec!["w1".to_string(), "w2".to_string()];
    header.extend(models.iter().map(|(n, _)| n.clone()));
    let mut table = CsvTable::new(header);
    let step = 2.0 * extent / (points - 1) as f64;
    for j in 0..points {
        for i in 0..points {
            let w = [w_o[0] - extent + i as f64 * step, w_o[1] - extent + j as f64 * step];
            let mut row = vec![format_sig6(w[0]), format_sig6(w[1])];
            for (_, m) in models {
                let mean = data
                    .iter()
                    .map(|(x, d)| m.cost(d - w[0] * x[0] - w[1] * x[1], &w))
                    .sum::<f64>()
                    / samples as f64;
                row.push(format_sig6(mean));
            }
            table.push(row);
        }
    }
    Ok(table)
}

fn apply(cfg: &mut ExperimentConfig, p: SweepParameter, v: f64) {
    match p {
        SweepParameter::PCe => cfg.censoring.p_ce = v,
        SweepParameter::LReused => cfg.reuse.l_reused = v.round().max(0.0) as usize,
        _ => {
            for name in cfg.algorithm.names.clone() {
                let o = cfg.algorithm.overrides.entry(name).or_default();
                match p {
                    SweepParameter::Mu => o.mu = Some(v),
                    SweepParameter::A => o.a = Some(v),
                    SweepParameter::B => o.b = Some(v),
                    SweepParameter::C => o.c = Some(v),
                    SweepParameter::PCe | SweepParameter::LReused => unreachable!(),
                }
            }
        }
    }
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = &cfg.sweep;
    let mut report = ExperimentReport::new(
        Mode::Sweep,
        format!(
            "mode = sweep, kind = {:?}, case = {}, seed = {}",
            s.kind, cfg.experiment.case, cfg.experiment.seed
        )
        .to_lowercase(),
    );
    match s.kind {
        SweepKind::CostSurface => {
            let specs = cfg.algorithms()?;
            let noise = (NoiseSpec::gaussian(s.noise_variance), NoiseSpec::gaussian(s.noise_variance));
            let models = specs
                .iter()
                .map(|sp| {
                    let mut params = sp.params;
                    params.phi = 1.0;
                    Ok((sp.preset.name().to_string(), CostModel::new(sp.kernel, params)?))
                })
                .collect::<Result<Vec<_>>>()?;
            report.table = Some(cost_surface(
                &models,
                &s.w_o,
                noise,
                s.extent,
                s.points,
                cfg.samples(),
                cfg.experiment.seed,
            )?);
        }
        SweepKind::Parameter => {
            let p = s.parameter.ok_or_else(|| Error::InvalidParameter("sweep.parameter missing".into()))?;
            let mut header = vec!["value".to_string()];
            header.extend(cfg.algorithm.names.iter().cloned());
            let mut table = CsvTable::new(header);
            for &v in &s.values {
                let mut c = cfg.clone();
                c.experiment.mode = Mode::Sysid;
                apply(&mut c, p, v);
                let r = run_sysid(&c)?;
                let mut row = vec![format_sig6(v)];
                row.extend(r.summaries.iter().map(|a| format_sig6(a.tail_db)));
                for a in &r.summaries {
                    report.notes.push(format!(
                        "{:?} = {}: {} tail {} dB, censor ratio {}",
                        p,
                        format_sig6(v),
                        a.label,
                        format_sig6(a.tail_db),
                        format_sig6(a.counters.steady_censor_ratio())
                    ));
                }
                table.push(row);
            }
            report.table = Some(table);
        }
    }
    Ok(report)
}
