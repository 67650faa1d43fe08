use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rdbounds::harness::{
    emit_sweep, emit_tables, run_experiment, run_sweep, ConfigOverrides, ExperimentConfig, FluxMode, MuChoice,
    OutputFormat,
};
use rdbounds::problem::PresetId;

/// Output root used when neither --out nor the config names a directory.
const OUT_ENV: &str = "RDBOUNDS_OUT";

#[derive(Parser)]
#[command(name = "rdbounds", version, about = "Two-sided error bounds for parabolic reaction-diffusion problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (or sweep) described by a JSON config.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; defaults to the config's `output`, then $RDBOUNDS_OUT/<name>, then results/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    preset: Option<PresetId>,
    /// Cells per axis, e.g. `40` or `50,50`.
    #[arg(long, value_delimiter = ',')]
    mesh: Option<Vec<usize>>,
    #[arg(long)]
    slabs: Option<usize>,
    /// average | optimize | optimize+enrich
    #[arg(long)]
    flux: Option<FluxMode>,
    /// zero | one | optimal
    #[arg(long)]
    mu: Option<MuChoice>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Bulk marking parameters, e.g. `0.2,0.3,0.4`.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// csv | json
    #[arg(long)]
    format: Option<OutputFormat>,
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    if let Some(o) = &config.output {
        return o.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"));
    root.join(&config.name)
}

fn run(args: RunArgs) -> rdbounds::Result<bool> {
    let mut config = ExperimentConfig::load(&args.config)?;
    ConfigOverrides {
        preset: args.preset,
        mesh: args.mesh,
        slabs: args.slabs,
        flux: args.flux,
        mu: args.mu,
        kappa: args.kappa,
        theta: args.theta,
        seed: args.seed,
        format: args.format,
        output: args.out,
    }
    .apply(&mut config);
    let dir = output_dir(&config);

    let violations = if config.sweep.is_empty() {
        let report = run_experiment(&config)?;
        for row in &report.rows {
            println!(
                "t={:<8.4} err²/[u]²={:<12.4e} I_maj={:<8} I_min={:<8} I_eff={}",
                row.t,
                row.err_rel.unwrap_or(f64::NAN),
                fmt(row.i_maj),
                fmt(row.i_min),
                fmt(row.i_eff),
            );
        }
        if report.exact {
            println!("approximation is exact: all bounds vanish");
        }
        emit_tables(&report, &dir, config.format)?;
        report.violations
    } else {
        let sweep = run_sweep(&config)?;
        for run in &sweep.runs {
            let last = run.report.final_row();
            println!(
                "{:<32} I_maj={:<8} I_min={:<8} I_eff={}",
                run.label,
                fmt(last.and_then(|r| r.i_maj)),
                fmt(last.and_then(|r| r.i_min)),
                fmt(last.and_then(|r| r.i_eff)),
            );
        }
        emit_sweep(&sweep, &dir, config.format)?;
        sweep.runs.into_iter().flat_map(|r| r.report.violations).collect()
    };
    println!("tables written to {}", dir.display());
    for v in &violations {
        eprintln!(
            "GUARANTEE VIOLATED: {:?} at level {}: bound² = {:e}, error² = {:e} (relative slack {:e})",
            v.bound, v.k, v.bound_sq, v.err_sq, v.rel_slack
        );
    }
    Ok(violations.is_empty())
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
