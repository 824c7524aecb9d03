use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pendantss::cli::{exit, exit_code, run, Command, RunManifest};

#[derive(Parser)]
#[command(version, about = "Trend removal, denoising and blind deconvolution of peak signals")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file, or `preset:<name>`
    #[arg(long, global = true)]
    config: Option<String>,
    /// Existing directory receiving the artifacts
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Noise seed (battery: offset of the evaluation seeds)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads, 0 for all cores
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Synthesize a dataset
    Generate,
    /// Run the solver once
    Solve,
    /// Tune the penalty parameters on the configured realization
    Gridsearch,
    /// Evaluate over independent noise realizations
    Battery,
    /// Validate artifacts in the output directory and summarize them
    Report,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::OK };
            return ExitCode::from(code as u8);
        }
    };
    env_logger::Builder::new().filter_level(args.log_level).init();
    if args.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    let manifest = RunManifest {
        command: match args.command {
            Cmd::Generate => Command::Generate,
            Cmd::Solve => Command::Solve,
            Cmd::Gridsearch => Command::Gridsearch,
            Cmd::Battery => Command::Battery,
            Cmd::Report => Command::Report,
        },
        config: args.config,
        output_dir: args.out,
        seed: args.seed,
    };
    match run(&manifest) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
