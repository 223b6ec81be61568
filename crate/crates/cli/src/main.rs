use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use projpost_cli::{execute, init_threads, Command, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// 1-D deblurring at fixed hyperparameters under several constraints
    Deblur,
    /// CT reconstruction with the hierarchical Gibbs sampler
    Ct,
    /// Boundary densities on the quarter disc
    Density,
    /// Theory checks; exits 4 when a suite fails
    Verify,
}

/// Posterior sampling for linear inverse problems with convex constraints.
///
/// Exit status: 0 success, 1 i/o error, 2 configuration error, 3 numerical
/// failure, 4 verification failure. PROJPOST_THREADS sets the thread count.
#[derive(Debug, Parser)]
#[command(name = "projpost", version)]
struct Args {
    command: Cmd,
    /// TOML configuration, or a manifest.toml from an earlier run to replay it
    #[arg(long)]
    config: PathBuf,
    /// CT at 100x100 pixels, 180 angles, 140 rays, 15000 sweeps
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default runs/<command>)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match args.command {
        Cmd::Deblur => Command::Deblur,
        Cmd::Ct => Command::Ct,
        Cmd::Density => Command::Density,
        Cmd::Verify => Command::Verify,
    };
    let overrides = Overrides {
        full_scale: args.full_scale,
        seed: args.seed,
        out: args.out,
    };
    let result = init_threads().and_then(|()| execute(command, &args.config, &overrides));
    let result = result.and_then(|run| {
        for line in &run.outcome.report {
            println!("{line}");
        }
        println!("outputs in {}", run.out_dir.display());
        let run = run.checked()?;
        if run.replayed {
            println!("replay matches the manifest ({} files)", run.manifest.outputs.len());
        }
        Ok(run)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("projpost: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
