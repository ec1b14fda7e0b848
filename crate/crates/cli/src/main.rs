use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fdcurve_cli::{catalog_listing, run, CliError, RunConfig, RunOptions};

/// Run the analyses and constructions listed in a TOML config.
#[derive(Parser, Debug)]
#[command(name = "fdcurve", version, about)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH", required_unless_present = "list_catalog")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampling seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for intra-task parallelism.
    #[arg(long, value_name = "K")]
    jobs: Option<usize>,
    /// Print the map, field, form and task catalogs and exit.
    #[arg(long)]
    list_catalog: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if args.list_catalog {
        print!("{}", catalog_listing());
        return ExitCode::SUCCESS;
    }
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fdcurve: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(args: &Args) -> Result<u8, CliError> {
    let path = args.config.as_ref().expect("clap requires --config");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    if let Some(k) = args.jobs {
        if k == 0 {
            return Err(CliError::config("--jobs", "need at least one worker"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::config("out", "give --out or set `out` in the config"))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let report = run(&cfg, &RunOptions { out: out.clone(), seed })?;
    eprintln!("report: {}", out.join(fdcurve_cli::REPORT_FILE).display());
    Ok(report.exit_code)
}
