use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weave_mcmc::diagnostics::write_summaries_csv;
use weave_mcmc::harness::{
    pretune_only, run_experiment, run_limit_check, run_trace, tune_only, write_limit_csv, write_trace_csv,
    ExperimentConfig,
};
use weave_mcmc::{Error, Result};

/// Weave-Metropolis samplers and benchmark harness.
#[derive(Parser)]
#[command(name = "weave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-tune, tune, sample and print the summary table.
    Run(Experiment),
    /// Pre-tune and tune step sizes, printing the choices as JSON.
    Tune(Experiment),
    /// Run the adaptive pre-tuning only and print the estimated center and scale.
    Pretune(Experiment),
    /// Dump a weave trajectory as CSV.
    Trace(TraceArgs),
    /// Compare weave iterates with the limiting ODE over a grid of step sizes.
    LimitCheck(LimitArgs),
}

/// Configuration file plus per-key overrides; flags win over the file.
#[derive(Args)]
struct Experiment {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated kernel names, or `all`.
    #[arg(long)]
    kernel: Option<String>,
    /// Step size or angle, or `auto`.
    #[arg(long)]
    h: Option<String>,
    /// Steps per proposal.
    #[arg(short = 'L', long = "steps")]
    steps: Option<String>,
    /// Random-walk proposal scale, or `auto`.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    jitter: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    burnin: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "pretune-iters")]
    pretune_iters: Option<String>,
    /// Acceptance rate the tuner aims for, overriding each kernel's default.
    #[arg(long = "auto-ar")]
    auto_ar: Option<String>,
    /// Output directory for `summary.csv` and `report.json`.
    #[arg(long)]
    out: Option<String>,
}

impl Experiment {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("target", &self.target),
            ("dataset", &self.dataset),
            ("kernel", &self.kernel),
            ("h", &self.h),
            ("L", &self.steps),
            ("s", &self.s),
            ("jitter", &self.jitter),
            ("iters", &self.iters),
            ("burnin", &self.burnin),
            ("chains", &self.chains),
            ("seed", &self.seed),
            ("pretune_iters", &self.pretune_iters),
            ("auto_ar", &self.auto_ar),
            ("out", &self.out),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| Error::Config(format!("--{key}: {e}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    target: String,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    h: f64,
    #[arg(short = 'L', long = "steps", default_value_t = 40)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long)]
    target: String,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated step sizes.
    #[arg(long = "h-grid", value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    h_grid: Vec<f64>,
    /// Time horizon.
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let report = run_experiment(&args.config()?)?;
            write_summaries_csv(io::stdout().lock(), &report.rows)?;
        }
        Command::Tune(args) => {
            let records = tune_only(&args.config()?)?;
            serde_json::to_writer_pretty(io::stdout().lock(), &records)?;
            println!();
        }
        Command::Pretune(args) => {
            let p = pretune_only(&args.config()?)?;
            let value = serde_json::json!({
                "center": p.pre.center().as_slice(),
                "scale": p.pre.sigma().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "final_state": p.final_x.as_slice(),
                "acceptance_rate": p.acceptance_rate,
            });
            serde_json::to_writer_pretty(io::stdout().lock(), &value)?;
            println!();
        }
        Command::Trace(args) => {
            let model = args.target.parse::<weave_mcmc::harness::TargetSpec>()?.build(args.dataset.as_deref())?;
            let trace = run_trace(model.as_ref(), args.h, args.steps, args.seed)?;
            write_trace_csv(sink(&args.out)?, &trace)?;
        }
        Command::LimitCheck(args) => {
            let model = args.target.parse::<weave_mcmc::harness::TargetSpec>()?.build(args.dataset.as_deref())?;
            let rows = run_limit_check(model.as_ref(), &args.h_grid, args.t_end, args.dt)?;
            write_limit_csv(sink(&args.out)?, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
