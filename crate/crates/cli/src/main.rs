use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stonet_cli::config::schema_text;
use stonet_cli::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_train, resolve_threads, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "stonet", version, about = "Causal StoNet experiments")]
struct Cli {
    /// Print every accepted config key and exit.
    #[arg(long, global = true)]
    print_schema: bool,

    /// Flat TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to $STONET_THREADS, then the core count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate train/val/test CSVs with truth sidecars.
    Simulate,
    /// Fit a model and write its checkpoint.
    Train,
    /// AIPW estimate from a checkpoint.
    Estimate,
    /// Score an estimate report against truth.
    Evaluate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_schema {
        print!("{}", schema_text());
        return Ok(());
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Config("no command given (simulate, train, estimate, evaluate)".into()))?;
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out_dir = cli.out;
    }
    let env = std::env::var(stonet_cli::THREADS_ENV).ok();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = resolve_threads(cli.threads, env.as_deref())? {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Simulate => {
            for p in cmd_simulate(&cfg)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Train => {
            let ckpt = cmd_train(&cfg)?;
            println!("wrote {}", ckpt.display());
            Ok(())
        }
        Command::Estimate => {
            print!("{}", cmd_estimate(&cfg)?.to_text());
            Ok(())
        }
        Command::Evaluate => {
            print!("{}", cmd_evaluate(&cfg)?.to_text());
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
