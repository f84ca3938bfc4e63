use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use yamabe_cli::{run, startup_self_tests, CliError, Outcome, RunConfig, RunOptions};

/// Singular Yamabe asymptotics laboratory.
#[derive(Debug, Parser)]
#[command(name = "yamabe", version, about)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the one in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplies every check tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Size of the worker pool.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized check fleets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_outputs(cfg: &RunConfig, out_dir: &PathBuf, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(&cfg.output.json), outcome.record.to_json()?)?;
    if let Some(t) = &outcome.table {
        t.write(&out_dir.join(&cfg.output.csv))?;
    }
    if let (Some(name), Some(json)) = (&cfg.collar.export, &outcome.collar_export) {
        std::fs::write(out_dir.join(name), json)?;
    }
    Ok(())
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    startup_self_tests()?;
    let opts = RunOptions {
        seed: args.seed,
        tol_scale: args.tol_scale,
    };
    let outcome = run(&cfg, &opts)?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    write_outputs(&cfg, &out_dir, &outcome)?;
    for c in &outcome.record.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        println!("{status} {:<36} residual {:.3e} tol {:.3e}", c.name, c.residual, c.tol);
    }
    for line in &outcome.diagnostics {
        eprintln!("{line}");
    }
    Ok(outcome.record.passed())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
