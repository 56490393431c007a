use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qadv_cli::commands::{self, AttackArgs, AttackKind, MemberStatus, Run};
use qadv_cli::config::{parse_epsilon_grid, parse_subset, ExperimentConfig};

/// Output root used when neither `--out` nor the config sets one explicitly.
const OUT_ENV: &str = "QADV_OUT";

#[derive(Parser)]
#[command(
    name = "qadv",
    version,
    about = "Adversarial robustness experiments for simulated quantum classifiers"
)]
struct Cli {
    /// TOML experiment config; defaults reproduce the Ising campaign.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (falls back to QADV_OUT, then the config's `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Classifier ids, e.g. "1,3,6".
    #[arg(long, global = true)]
    subset: Option<String>,
    /// `start:step:stop` or a comma-separated list.
    #[arg(long = "epsilon-grid", global = true)]
    epsilon_grid: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and cache the train/validation/test datasets.
    Ingest,
    /// Train every roster member, resuming from existing checkpoints.
    Train,
    /// Run an attack campaign against trained checkpoints.
    Attack {
        #[arg(value_enum)]
        kind: Kind,
    },
    /// Evaluate a closed-form bound from key=value arguments.
    Bounds {
        /// theorem1, lemma_a1, levy, hoeffding, qnfl or qnfl_unitary
        name: String,
        /// Inputs such as d=256 mu=0.05 R0=0.5
        args: Vec<String>,
    },
    /// Join run artifacts into report.txt.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    UniversalExample,
    UniversalPerturbation,
    Transfer,
}

fn load_run(cli: &Cli) -> Result<Run> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &cli.subset {
        cfg.attack.subset = parse_subset(s)?;
    }
    if let Some(g) = &cli.epsilon_grid {
        parse_epsilon_grid(g)?;
        cfg.attack.epsilon_grid = g.clone();
    }
    let out = match (&cli.out, std::env::var_os(OUT_ENV)) {
        (Some(o), _) => o.clone(),
        (None, Some(root)) => PathBuf::from(root),
        (None, None) => cfg.out.clone(),
    };
    Run::new(cfg, out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Bounds { name, args } => print!("{}", commands::bounds(name, args)?),
        Command::Ingest => {
            let run = load_run(&cli)?;
            for path in commands::ingest(&run)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train => {
            let run = load_run(&cli)?;
            let mut failed = 0;
            for (id, status) in commands::train_roster(&run)? {
                match status {
                    MemberStatus::Trained { accuracy } => {
                        println!("classifier-{id}: trained, test accuracy {accuracy:.3}")
                    }
                    MemberStatus::Resumed { accuracy } => {
                        println!("classifier-{id}: resumed, test accuracy {accuracy:.3}")
                    }
                    MemberStatus::Failed(e) => {
                        failed += 1;
                        eprintln!("classifier-{id}: failed: {e}");
                    }
                }
            }
            println!("wrote {}", run.summary_path().display());
            if failed > 0 {
                anyhow::bail!("{failed} roster member(s) failed to train");
            }
        }
        Command::Attack { kind } => {
            let run = load_run(&cli)?;
            let kind = match kind {
                Kind::UniversalExample => AttackKind::UniversalExample,
                Kind::UniversalPerturbation => AttackKind::UniversalPerturbation,
                Kind::Transfer => AttackKind::Transfer,
            };
            let args = AttackArgs::from_config(&run.cfg)?;
            println!("wrote {}", commands::attack(&run, kind, &args)?.display());
        }
        Command::Report => {
            let run = load_run(&cli)?;
            print!("{}", commands::report(&run)?);
        }
    }
    Ok(())
}
