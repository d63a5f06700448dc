use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mfid_core::experiment::{execute, ExperimentConfig, ExperimentReport};
use mfid_core::prelude::*;

#[derive(Parser)]
#[command(name = "mfid", version, about = "Identify mean-field particle dynamics from snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a catalog model and store the snapshots.
    Simulate(SimulateArgs),
    /// Identify a model from stored snapshots.
    Identify(IdentifyArgs),
    /// Run the full pipeline from a TOML config.
    Run(RunArgs),
    /// Run a sweep described by flags instead of a config file.
    Sweep(SweepArgs),
    /// Summarize a report directory and regenerate its CSV files.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    preset: Preset,
    /// Model variant, e.g. `const`, `w20`, `critical`.
    #[arg(long)]
    variant: Option<String>,
    #[arg(short = 'N', long, default_value_t = 2000)]
    particles: usize,
    #[arg(short = 'M', long, default_value_t = 1)]
    experiments: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Extrinsic noise ratio.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    timepoints: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Dataset written by `simulate`.
    data: PathBuf,
    /// Library and discretization defaults.
    #[arg(long)]
    preset: Preset,
    #[arg(long)]
    bins: Option<usize>,
    /// Write the weak system here.
    #[arg(long)]
    dump_system: Option<PathBuf>,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    preset: Preset,
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(short = 'N', long, value_delimiter = ',', required = true)]
    particles: Vec<usize>,
    #[arg(short = 'M', long, value_delimiter = ',')]
    experiments: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value = "mfid-out")]
    output: PathBuf,
    #[arg(long)]
    dump_system: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing `report.json`.
    dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when a cell recorded an error.
fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a).map(|_| true),
        Command::Identify(a) => identify_cmd(a).map(|_| true),
        Command::Run(a) => {
            let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
            let mut cfg = ExperimentConfig::from_toml(&text)?;
            if let Some(o) = a.output {
                cfg.experiment.output = o;
            }
            if let Some(t) = a.trials {
                cfg.experiment.trials = t;
            }
            if let Some(s) = a.seed {
                cfg.experiment.seed = s;
            }
            finish(execute(cfg)?)
        }
        Command::Sweep(a) => {
            let mut cfg = ExperimentConfig::for_preset(a.preset);
            cfg.experiment.trials = a.trials;
            cfg.experiment.seed = a.seed;
            cfg.experiment.output = a.output;
            cfg.experiment.dump_system = a.dump_system;
            cfg.sweep.variants = a.variants;
            cfg.sweep.particles = a.particles;
            cfg.sweep.experiments = a.experiments;
            cfg.sweep.noise = a.noise;
            cfg.discretization.bins = a.bins;
            finish(execute(cfg)?)
        }
        Command::Report(a) => {
            let path = a.dir.join("report.json");
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report = ExperimentReport::from_json(&text)?;
            report.write(&a.dir)?;
            emit(&report.summary_text());
            Ok(!report.has_errors())
        }
    }
}

fn finish(report: ExperimentReport) -> anyhow::Result<bool> {
    let dir = report.config.experiment.output.clone();
    report.write(&dir)?;
    emit(&report.summary_text());
    emit(&format!("wrote {}\n", dir.display()));
    Ok(!report.has_errors())
}

fn simulate_cmd(a: SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::for_preset(a.preset);
    cfg.sweep.particles = vec![a.particles];
    cfg.sweep.experiments = vec![a.experiments];
    cfg.sweep.noise = vec![a.noise];
    if let Some(v) = a.variant {
        cfg.sweep.variants = vec![v];
    }
    cfg.simulation.timepoints = a.timepoints;
    let cfg = cfg.resolve()?;
    let cell = &cfg.cells()[0];
    let model = cfg.model(cell)?;
    let init = cfg.simulation.init.clone().expect("resolved");
    let data = simulate(&model, &init, &cfg.sim_config(cell, a.seed))?;
    let data = if a.noise > 0.0 { add_extrinsic_noise(&data, a.noise, a.seed)? } else { data };
    data.write_to(BufWriter::new(File::create(&a.out)?))?;
    let (m, l, n, d) = data.shape();
    log::info!("{}: {m} experiments x {l} timepoints x {n} particles x {d} dims", model.name);
    Ok(())
}

fn identify_cmd(a: IdentifyArgs) -> anyhow::Result<()> {
    let data = ParticleDataset::read_from(BufReader::new(File::open(&a.data)?))
        .with_context(|| format!("reading {}", a.data.display()))?;
    if data.dim() != a.preset.dim() {
        bail!("dataset is {}-dimensional but {} expects {}", data.dim(), a.preset, a.preset.dim());
    }
    let lib = TrialLibrary::preset(a.preset);
    let mut opts = IdentifyOptions::for_preset(a.preset);
    if let Some(b) = a.bins {
        opts.bins = b;
    }
    opts.keep_system = a.dump_system.is_some();
    let fit = identify(&data, &lib, &opts)?;
    if let (Some(path), Some(sys)) = (&a.dump_system, &fit.system) {
        sys.write_to(BufWriter::new(File::create(path)?))?;
    }
    if a.json {
        let out = serde_json::json!({
            "terms": fit.terms(&lib),
            "lambda": fit.solution.lambda,
            "loss": fit.solution.loss,
            "residual": fit.solution.residual,
            "condition": fit.condition.condition,
            "times": fit.times,
        });
        emit(&(serde_json::to_string_pretty(&out)? + "\n"));
    } else {
        emit(&fit.pretty(&lib));
    }
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}
