use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ghz_cli::config::TEMPLATE;
use ghz_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "ghzlab",
    version,
    about = "Simulate and characterise a four-photon GHZ chip"
)]
struct Args {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GHZLAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run one experiment.
    Run {
        command: Command,
        /// TOML config; built-in defaults when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a commented default config.
    ConfigInit {
        #[arg(default_value = "ghzlab.toml")]
        path: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match dispatch(args.action) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(action: Action) -> Result<(), CliError> {
    match action {
        Action::ConfigInit { path, force } => {
            if path.exists() && !force {
                return Err(CliError::Config(format!(
                    "{} exists; pass --force to overwrite",
                    path.display()
                )));
            }
            std::fs::write(&path, TEMPLATE).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Action::Run {
            command,
            config,
            out,
        } => {
            let cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            let artifacts = run(command, &cfg, config.as_deref(), &out)?;
            for line in &artifacts.summary {
                println!("{line}");
            }
            for (name, _) in &artifacts.files {
                println!("wrote {}", out.join(name).display());
            }
            Ok(())
        }
    }
}
