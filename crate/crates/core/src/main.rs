use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gfast_sim::harness::{parse_config, run_scenario, selftest};
use gfast_sim::profile::{ProfileId, SystemProfile};

#[derive(Parser)]
#[command(
    name = "gfast-sim",
    version,
    about = "Multi-user DSL crosstalk cancellation and precoding simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List the built-in system profiles.
    Profiles,
    /// Run the closed-form oracle checks.
    Selftest,
}

fn run(config: PathBuf, out: Option<PathBuf>, jobs: usize) -> Result<()> {
    let text = std::fs::read_to_string(&config)
        .with_context(|| format!("reading {}", config.display()))?;
    let scenario = parse_config(&text).with_context(|| format!("parsing {}", config.display()))?;
    let tables = run_scenario(&scenario, jobs)?;
    let dir = out.unwrap_or_else(|| scenario.out_dir.clone());
    for name in tables.write_to(&dir)? {
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn profiles() {
    println!("name,tones,tone_width_hz,start_mhz,stop_mhz,symbol_rate,total_power_dbm,bit_cap");
    for id in ProfileId::ALL {
        let p = SystemProfile::new(id);
        println!(
            "{},{},{},{:.3},{:.3},{},{},{}",
            p.name(),
            p.tone_count,
            p.tone_width,
            p.start_freq / 1e6,
            p.stop_freq / 1e6,
            p.symbol_rate,
            p.total_power_dbm,
            p.bit_cap
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, jobs } => run(config, out, jobs),
        Command::Profiles => {
            profiles();
            Ok(())
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for check in &checks {
                println!("{check}");
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("selftest failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
