use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lalm_core::harness::{self, ExperimentConfig, ReferenceMode};
use lalm_core::{Method, StepMode};

#[derive(Parser)]
#[command(
    name = "lalm",
    version,
    about = "Linearized augmented Lagrangian solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its convergence trace as CSV.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// JSON file with any of the keys below; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bpdn, qcqp, minimax or tiny:<equality-qp|scalar-qcqp|scalar-bpdn>.
    #[arg(long)]
    problem: Option<String>,
    /// lalm, blalm or pdyn.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho_y: Option<f64>,
    #[arg(long)]
    rho_z: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop once the residuals fall below this value; 0 runs the full budget.
    #[arg(long)]
    tol: Option<f64>,
    /// Initial step for backtracking.
    #[arg(long)]
    eta0: Option<f64>,
    /// analytic, backtracking or auto.
    #[arg(long)]
    step: Option<StepMode>,
    #[arg(long)]
    backtrack_factor: Option<f64>,
    /// Record every N epochs instead of the default schedule.
    #[arg(long)]
    record_every: Option<usize>,
    /// Leave the time column empty.
    #[arg(long)]
    no_time: bool,
    /// auto, off or long-run.
    #[arg(long)]
    reference: Option<ReferenceMode>,
    /// Load the problem from a JSON instance file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Write the problem as a JSON instance file.
    #[arg(long)]
    dump_instance: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    qcqp_m: Option<usize>,
    #[arg(long)]
    qcqp_p: Option<usize>,
    #[arg(long)]
    minimax_m: Option<usize>,
    #[arg(long)]
    minimax_p: Option<usize>,
    /// CSV trace path; the trace goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field {
            $cfg.$field = v;
        })*
    };
}

impl SolveArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let args = self;
        overlay!(
            cfg,
            args,
            problem,
            method,
            seed,
            beta,
            delta,
            blocks,
            epochs,
            tol,
            step,
            backtrack_factor,
            reference,
            rows,
            cols,
            sparsity,
            noise,
            qcqp_m,
            qcqp_p,
            minimax_m,
            minimax_p
        );
        for (slot, v) in [
            (&mut cfg.rho_y, args.rho_y),
            (&mut cfg.rho_z, args.rho_z),
            (&mut cfg.eta0, args.eta0),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        if args.record_every.is_some() {
            cfg.record_every = args.record_every;
        }
        for (slot, v) in [
            (&mut cfg.out, args.out),
            (&mut cfg.instance, args.instance),
            (&mut cfg.dump_instance, args.dump_instance),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        cfg.no_time |= args.no_time;
        Ok(cfg)
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let cfg = args.into_config()?;
    let outcome = harness::run(&cfg)?;
    let out = &outcome.output;
    if cfg.out.is_none() {
        out.trace.write_csv(io::stdout().lock())?;
    }
    let last = out.trace.last().context("empty trace")?;
    eprintln!(
        "{} on {}: {} epochs, converged {}, obj {:.10e}, feas {:.3e}, kkt {:.3e}",
        cfg.method, cfg.problem, out.epochs, out.converged, last.obj, last.feas, last.kkt_stat
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
