//! `lbx`: generate hard instances, run baselines, audit, and tabulate bounds.

mod audit;
mod bound;
mod config;
mod gen;
mod output;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lbx_core::error::InstanceError;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "lbx", version, about = "Hard instances and audits for parallel convex optimization lower bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a scalar config field, e.g. `--set setting.d=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan parameters and write instance documents.
    Gen(Common),
    /// Run every algorithm on every instance and seed.
    Run {
        #[command(flatten)]
        common: Common,
        /// Rounds per run; same as `--set run.budget=M`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Certificate, concentration, minimax and gap audits.
    Audit(Common),
    /// Tabulate the lower-bound formulas.
    Bound(Common),
    /// Assemble the produced artifacts into one report.
    Report(Common),
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_FLAGS: u8 = 3;

fn workers() -> Result<Option<usize>> {
    match std::env::var("LBX_WORKERS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("LBX_WORKERS={v:?} is not a count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (name, common, extra) = match &cli.command {
        Command::Gen(c) => ("gen", c, vec![]),
        Command::Run { common, budget } => ("run", common, budget.map(|b| vec![format!("run.budget={b}")]).unwrap_or_default()),
        Command::Audit(c) => ("audit", c, vec![]),
        Command::Bound(c) => ("bound", c, vec![]),
        Command::Report(c) => ("report", c, vec![]),
    };
    let overrides: Vec<String> = common.set.iter().cloned().chain(extra).collect();
    let loaded = config::load(&common.config, &overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let dir = loaded.config.output.dir.clone();
    output::log_line(&dir, &format!("{name} start config_hash={}", loaded.hash))?;
    let flagged = pool.install(|| -> Result<bool> {
        match &cli.command {
            Command::Gen(_) => gen::cmd_gen(&loaded).map(|_| false),
            Command::Run { .. } => run::cmd_run(&loaded).map(|_| false),
            Command::Audit(_) => audit::cmd_audit(&loaded),
            Command::Bound(_) => bound::cmd_bound(&loaded).map(|_| false),
            Command::Report(_) => report::cmd_report(&loaded).map(|_| false),
        }
    });
    let status = match &flagged {
        Ok(false) => "ok",
        Ok(true) => "flags",
        Err(_) => "error",
    };
    output::log_line(&dir, &format!("{name} end {status}"))?;
    flagged
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_FLAGS),
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e.chain().any(|c| {
                matches!(c.downcast_ref::<InstanceError>(), Some(InstanceError::Infeasible(_) | InstanceError::InvalidSetting(_)))
            });
            ExitCode::from(if infeasible { EXIT_INFEASIBLE } else { EXIT_INTERNAL })
        }
    }
}
