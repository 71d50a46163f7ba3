use cclt_cli::run::write_error;
use cclt_cli::{load_config, run, CliError, Invocation, Subcommand};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Brownian and geodesic central limit estimators for cocycles over square-tiled surfaces.
#[derive(Parser, Debug)]
#[command(name = "cclt", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut out = args.out.clone().unwrap_or_else(|| PathBuf::from("cclt-out"));
    let result = load_config(args.config.as_deref()).and_then(|(cfg, base)| {
        let inv = Invocation::new(args.subcommand, cfg, base, args.out.clone(), args.seed, args.threads)?;
        out = inv.out.clone();
        run(&inv)
    });
    match result {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&out, &e),
    }
}

fn fail(out: &std::path::Path, e: &CliError) -> ExitCode {
    write_error(out, e);
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
