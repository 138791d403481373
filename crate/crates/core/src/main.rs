use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use qrepsim::config::{self, RunConfig, RunMode};
use qrepsim::engine::{self, EngineError};
use qrepsim::oracle;
use qrepsim::output::{self, OutputError, ReportInput};
use qrepsim::swap::BinMemory;

/// Satellite quantum-repeater simulator.
#[derive(Parser, Debug)]
#[command(name = "qrepsim", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.mode`.
    #[arg(long, value_enum)]
    mode: Option<RunMode>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides `run.step_s`.
    #[arg(long)]
    step_s: Option<f64>,
    /// Overrides `run.seed` (swap-bench only).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.night_only`.
    #[arg(long)]
    night_only: bool,
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("cannot create {0}: {1}")]
    OutDir(PathBuf, std::io::Error),
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) -> Result<(), config::ConfigError> {
    let mut note = |k: &str, v: String| {
        log::info!("override {k} = {v} (command line)");
        cfg.resolved.push((k.into(), v, "command line".into()));
    };
    if let Some(m) = cli.mode {
        note("run.mode", m.label().into());
    }
    if let Some(s) = cli.step_s {
        note("run.step_s", s.to_string());
    }
    if let Some(s) = cli.seed {
        note("run.seed", s.to_string());
    }
    if cli.night_only {
        note("run.night_only", "true".into());
    }
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(s) = cli.step_s {
        if !(s > 0.0 && s.is_finite()) {
            return Err(config::ConfigError::Range { path: "--step-s".into(), line: None, msg: "must be positive".into() });
        }
        cfg.scenario.step_s = s;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.night_only {
        cfg.scenario.night_only = true;
    }
    Ok(())
}

fn run(cfg: &RunConfig, out: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out).map_err(|e| RunError::OutDir(out.into(), e))?;
    let report = out.join("report.toml");
    let sc = &cfg.scenario;
    match cfg.mode {
        RunMode::Pass => {
            let res = engine::simulate_pass(sc, cfg.half_window_s)?;
            output::emit_timeseries(&res.records, &out.join("timeseries.csv"))?;
            let passes: Vec<_> = res.summary.into_iter().collect();
            match passes.first() {
                Some(p) => log::info!(
                    "pass {:.0} s, peak secure {:.3} Hz, secure total {:.1}",
                    p.duration_s,
                    p.peak.secure,
                    p.totals.secure
                ),
                None => log::warn!("no linked steps in the window"),
            }
            output::emit_report(cfg, &ReportInput { passes: &passes, ..Default::default() }, &report)?;
        }
        RunMode::Sweep => {
            let cells = engine::sweep(sc, &cfg.sweep.altitudes_km, &cfg.sweep.ratios, cfg.sweep.half_window_s)?;
            output::emit_sweep(&cells, &out.join("sweep.csv"))?;
            output::emit_report(cfg, &ReportInput { sweep: &cells, ..Default::default() }, &report)?;
        }
        RunMode::Annual => {
            let res = engine::annual_campaign(sc, &cfg.annual.campaign(true))?;
            log::info!(
                "{} passes, secure total {:.0}, night {:.0}",
                res.passes.len(),
                res.total.secure,
                res.night_total.secure
            );
            output::emit_timeseries(&res.records, &out.join("timeseries.csv"))?;
            output::emit_passes(&res.passes, &out.join("passes.csv"))?;
            output::emit_cumulative(&res, &out.join("cumulative.csv"))?;
            let dl = if cfg.annual.delta_lambda_deg.is_empty() {
                Vec::new()
            } else {
                engine::delta_lambda_study(sc, &cfg.annual.delta_lambda_deg, 86_400.0, 900.0)?
            };
            output::emit_report(cfg, &ReportInput { campaign: Some(&res), delta_lambda: &dl, ..Default::default() }, &report)?;
        }
        RunMode::SwapBench => {
            let b = &cfg.bench;
            let mem = BinMemory {
                ln_p: -1.0 / b.tau_bins,
                ln_coh: -1.0 / b.coherence_bins,
                eta_ret: b.eta_ret,
                eta_plus: b.eta_plus,
            };
            let cells =
                oracle::bench_grid(&b.eta, &b.d_rt_bins, (b.d_cut_a_bins, b.d_cut_b_bins), mem, b.n_bins, b.batches, cfg.seed);
            output::emit_bench(&cells, &out.join("bench.csv"))?;
            output::emit_report(cfg, &ReportInput { bench: &cells, ..Default::default() }, &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = apply_overrides(&cli, &mut cfg) {
        eprintln!("config error: {e}");
        return ExitCode::from(1);
    }
    match run(&cfg, &cli.out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
