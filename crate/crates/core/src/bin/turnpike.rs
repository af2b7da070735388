//! Command-line front end: runs named experiments over one or more
//! horizons, compares finished report bundles, and dumps the heat model's
//! tracking target as plot-ready CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use turnpike::heat::{reference_field, HeatConfig};
use turnpike::registry::{build_model, ModelConfig, MODEL_NAMES};
use turnpike::report::{compare_runs, run_experiment, AdjointSign, ExperimentSpec};
use turnpike::{Error, Result};

#[derive(Parser)]
#[command(name = "turnpike", version, about = "Interval turnpike diagnostics for finite-horizon optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model on a single horizon and write a report bundle.
    Run(RunArgs),
    /// Solve one model across a horizon sweep and write one bundle per
    /// horizon plus a summary table.
    Sweep(RunArgs),
    /// Compare finished report bundles of one model across horizons.
    Compare(CompareArgs),
    /// Write the heat model's tracking target as `x,y,value` CSV.
    ReferenceField(ReferenceFieldArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Registered model name.
    #[arg(long, value_parser = MODEL_NAMES)]
    model: Option<String>,
    /// JSON model configuration document (alternative to --model).
    #[arg(long, conflicts_with = "model")]
    config: Option<PathBuf>,
    /// Horizon; repeatable for `sweep`, defaults to the model's horizon.
    #[arg(long = "horizon", value_name = "T")]
    horizons: Vec<f64>,
    /// Detection threshold; repeatable, decreasing. Default: 0.1 0.01.
    #[arg(long = "eps", value_name = "EPS")]
    epsilons: Vec<f64>,
    /// Time step; the model default when absent.
    #[arg(long)]
    dt: Option<f64>,
    /// Heat grid as NXxNY, e.g. 30x10.
    #[arg(long)]
    grid: Option<String>,
    /// Output root; defaults to $TURNPIKE_OUT_ROOT, then ./turnpike-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sign convention of emitted adjoint vectors.
    #[arg(long, value_enum, default_value = "internal")]
    adjoint_sign: SignArg,
    /// Seed of the randomized derivative check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient tolerance of the dynamic solver.
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Iteration cap of the dynamic solver.
    #[arg(long)]
    max_outer_iters: Option<usize>,
    /// Controllability window of the exact-controllability audit.
    #[arg(long, default_value_t = 1.0)]
    t_c: f64,
    /// Skip spectral certificates.
    #[arg(long)]
    no_spectral: bool,
    /// Skip the inequality audits.
    #[arg(long)]
    no_audits: bool,
    /// Skip the exponential envelope fit.
    #[arg(long)]
    no_fits: bool,
    /// Skip the adjoint Sobolev-norm computation.
    #[arg(long)]
    no_w_norm: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SignArg {
    Internal,
    Negated,
}

#[derive(Args)]
struct CompareArgs {
    /// Bundle directories (each holding a report.json), at least two.
    #[arg(required = true, num_args = 2..)]
    bundles: Vec<PathBuf>,
}

#[derive(Args)]
struct ReferenceFieldArgs {
    /// Heat grid as NXxNY.
    #[arg(long, default_value = "30x10")]
    grid: String,
    /// Destination file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let err = || Error::InvalidArgument(format!("grid '{text}' is not of the form NXxNY"));
    if parts.len() != 2 {
        return Err(err());
    }
    let nx = parts[0].trim().parse().map_err(|_| err())?;
    let ny = parts[1].trim().parse().map_err(|_| err())?;
    Ok((nx, ny))
}

fn model_config(args: &RunArgs) -> Result<ModelConfig> {
    let mut config = match (&args.model, &args.config) {
        (Some(name), None) => ModelConfig::by_name(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "exactly one of --model ({}) or --config is required",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    if let Some(grid) = &args.grid {
        let (nx, ny) = parse_grid(grid)?;
        match &mut config {
            ModelConfig::Heat2d(heat) => {
                heat.nx = nx;
                heat.ny = ny;
            }
            _ => return Err(Error::InvalidArgument("--grid applies only to heat2d".into())),
        }
    }
    Ok(config)
}

fn experiment_spec(args: &RunArgs, sweep: bool) -> Result<ExperimentSpec> {
    let model = model_config(args)?;
    let horizons = if args.horizons.is_empty() {
        if sweep {
            return Err(Error::InvalidArgument("sweep needs at least one --horizon".into()));
        }
        vec![build_model(&model)?.default_horizon]
    } else {
        if !sweep && args.horizons.len() > 1 {
            return Err(Error::InvalidArgument("run takes a single --horizon; use sweep".into()));
        }
        args.horizons.clone()
    };
    let epsilons = if args.epsilons.is_empty() { vec![0.1, 0.01] } else { args.epsilons.clone() };
    let mut spec = ExperimentSpec::new(model, horizons, epsilons);
    spec.dt = args.dt;
    spec.grad_tol = args.grad_tol;
    spec.max_outer_iters = args.max_outer_iters;
    spec.t_c = args.t_c;
    spec.spectral = !args.no_spectral;
    spec.audits = !args.no_audits;
    spec.fits = !args.no_fits;
    spec.w_norm = !args.no_w_norm;
    spec.adjoint_sign = match args.adjoint_sign {
        SignArg::Internal => AdjointSign::Internal,
        SignArg::Negated => AdjointSign::Negated,
    };
    spec.seed = args.seed;
    spec.out = args.out.clone();
    spec.validate()?;
    Ok(spec)
}

/// Runs the sweep and prints one summary row per horizon. Returns false
/// when some dynamic solve hit its iteration cap.
fn cmd_run(args: &RunArgs, sweep: bool) -> Result<bool> {
    let spec = experiment_spec(args, sweep)?;
    let summary = run_experiment(&spec)?;
    println!(
        "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>9}  {}",
        "T", "nu", "theta", "rho", "exceed", "fit_mu", "bundle"
    );
    for run in &summary.runs {
        let t = &run.report.turnpike;
        println!(
            "{:>8}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>9}  {}{}",
            run.horizon,
            t.state_intervals[0].length,
            t.adjoint_intervals[0].length,
            t.rho[0],
            t.exceedance[0],
            t.fit.as_ref().map_or("n/a".into(), |f| format!("{:.4}", f.mu)),
            run.dir.display(),
            if run.report.converged { "" } else { "  [not converged]" },
        );
    }
    println!("summary: {}", summary.out_root.join("summary.csv").display());
    if !summary.all_converged {
        eprintln!("warning: some runs hit the iteration cap; bundles carry converged=false");
    }
    Ok(summary.all_converged)
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let cmp = compare_runs(&args.bundles)?;
    println!("model: {}   epsilon: {}", cmp.model, cmp.epsilon);
    println!(
        "{:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:>9}  {:>11}  {:>11}",
        "T", "nu", "theta", "rho", "exceed", "fit_mu", "expstab_c", "excont_c"
    );
    let opt = |v: Option<f64>| v.map_or("n/a".into(), |x| format!("{x:.4}"));
    for row in &cmp.rows {
        println!(
            "{:>8}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>9}  {:>11}  {:>11}{}{}",
            row.horizon,
            row.nu,
            row.theta,
            row.rho,
            row.exceedance,
            opt(row.fit_mu),
            opt(row.expstab_c),
            opt(row.excont_c),
            if row.converged { "" } else { "  [not converged]" },
            if row.short_interval { "  [short/empty interval]" } else { "" },
        );
    }
    if !cmp.nu_monotone {
        println!("flag: detected interval length does not grow monotonically with T");
    }
    if cmp.any_short_interval {
        println!("flag: some run detected an empty or very short interval");
    }
    Ok(())
}

fn cmd_reference_field(args: &ReferenceFieldArgs) -> Result<()> {
    let (nx, ny) = parse_grid(&args.grid)?;
    let config = HeatConfig { nx, ny, ..HeatConfig::default() };
    let field = reference_field(&config)?;
    let mut text = String::from("x,y,value\n");
    for i in 0..=nx {
        for j in 0..=ny {
            let x = config.lx * i as f64 / nx as f64;
            let y = config.ly * j as f64 / ny as f64;
            text.push_str(&format!(
                "{:.17e},{:.17e},{:.17e}\n",
                x,
                y,
                field.values[i * (ny + 1) + j]
            ));
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_run(args, true),
        Command::Compare(args) => cmd_compare(args).map(|()| true),
        Command::ReferenceField(args) => cmd_reference_field(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
