use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rtga_core::harness::{self, ExperimentConfig, ExperimentReport, Mode};

#[derive(Parser)]
#[command(name = "rtga", version, about = "Robust total-least-squares adaptive filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// System identification under one of the five noise cases.
    Sysid(Common),
    /// System identification with a mid-run shift of the true system.
    Tracking(Common),
    /// Echo cancellation on a 512-tap echo path.
    Aec(Common),
    /// Predicted against simulated steady-state MSD.
    Theory(Common),
    /// Cost surfaces and one-parameter sweeps.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML). Defaults for the subcommand are used without it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Primary CSV output. The summary and any ERLE curves are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    case: Option<u8>,
    /// Comma-separated algorithm names, e.g. `rtga,proposed,gdtls`.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    /// Target censoring ratio in [0, 1).
    #[arg(long)]
    pce: Option<f64>,
    /// Number of reused past samples per iteration.
    #[arg(long)]
    reuse: Option<usize>,
    /// Cap on how far back reuse may reach.
    #[arg(long)]
    window: Option<usize>,
}

impl Common {
    fn config(&self, mode: Mode) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::for_mode(mode),
        };
        cfg.experiment.mode = mode;
        let e = &mut cfg.experiment;
        e.runs = self.runs.or(e.runs);
        e.seed = self.seed.unwrap_or(e.seed);
        e.case = self.case.unwrap_or(e.case);
        if let Some(out) = &self.out {
            e.output = Some(out.clone());
        }
        if let Some(names) = &self.algo {
            cfg.algorithm.names = names.iter().map(|n| n.trim().to_string()).collect();
        }
        cfg.censoring.p_ce = self.pce.unwrap_or(cfg.censoring.p_ce);
        cfg.reuse.l_reused = self.reuse.unwrap_or(cfg.reuse.l_reused);
        cfg.reuse.window = self.window.or(cfg.reuse.window);
        Ok(cfg)
    }
}

fn default_out(mode: Mode) -> PathBuf {
    let name = match mode {
        Mode::Sysid => "sysid",
        Mode::Tracking => "tracking",
        Mode::Aec => "aec",
        Mode::Theory => "theory",
        Mode::Sweep => "sweep",
    };
    PathBuf::from(format!("{name}.csv"))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let (mode, common) = match &cli.command {
        Command::Sysid(c) => (Mode::Sysid, c),
        Command::Tracking(c) => (Mode::Tracking, c),
        Command::Aec(c) => (Mode::Aec, c),
        Command::Theory(c) => (Mode::Theory, c),
        Command::Sweep(c) => (Mode::Sweep, c),
    };
    let cfg = common.config(mode)?;
    let report: ExperimentReport = harness::run(&cfg)?;
    let out = cfg.experiment.output.clone().unwrap_or_else(|| default_out(mode));
    report.write(&out).with_context(|| format!("writing {}", out.display()))?;
    let (erle, summary) = ExperimentReport::output_paths(&out);
    let mut text = report.summary_text();
    text.push_str(&format!("\nwrote {}\n", out.display()));
    if !report.erle.is_empty() {
        text.push_str(&format!("wrote {}\n", erle.display()));
    }
    text.push_str(&format!("wrote {}\n", summary.display()));
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
