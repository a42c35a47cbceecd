use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use citl::agent::TrainObjective;
use citl::harness::{self, HarnessError, RunConfig, Split};

#[derive(Parser)]
#[command(name = "citl", version, about = "Contrastive instruction-trajectory learning on synthetic navigation graphs")]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Seen,
    Unseen,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic dataset.
    Gen,
    /// Train on the seen split.
    Train {
        /// Dataset directory (defaults to the config's data_dir).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Imitation + actor-critic only, no contrastive terms.
        #[arg(long)]
        baseline: bool,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "unseen")]
        split: SplitArg,
    },
    /// Train and evaluate the ablation matrix over the configured seeds.
    Ablate {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the oracle verification suite.
    Check,
}

fn data_dir(arg: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    arg.or_else(|| cfg.data_dir.clone())
        .ok_or_else(|| HarnessError::Config("no dataset directory: pass --data or set data_dir".into()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("citl_out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match cli.cmd {
        Cmd::Gen => {
            let m = harness::cmd_gen(&cfg, &out)?;
            println!(
                "wrote {} seen and {} unseen graphs to {}",
                m.seen_graphs.len(),
                m.unseen_graphs.len(),
                out.display()
            );
        }
        Cmd::Train { data, baseline } => {
            let data = data_dir(data, &cfg)?;
            let objective = if baseline {
                TrainObjective::IlRlOnly
            } else {
                TrainObjective::Composite
            };
            let s = harness::cmd_train(&cfg, &data, &out, cfg.seed, objective)?;
            println!(
                "{} steps; seen SR {:.3} SPL {:.3}; unseen SR {:.3} SPL {:.3}",
                s.steps, s.seen.sr, s.seen.spl, s.unseen.sr, s.unseen.spl
            );
        }
        Cmd::Eval { data, checkpoint, split } => {
            let data = data_dir(data, &cfg)?;
            let split = match split {
                SplitArg::Seen => Split::Seen,
                SplitArg::Unseen => Split::Unseen,
            };
            let m = harness::cmd_eval(&cfg, &data, &checkpoint, split, &out)?;
            println!(
                "{}: TL {:.2} NE {:.2} SR {:.3} SPL {:.3} nDTW {:.3} CLS {:.3} SDTW {:.3}",
                split.name(),
                m.tl,
                m.ne,
                m.sr,
                m.spl,
                m.ndtw,
                m.cls,
                m.sdtw
            );
        }
        Cmd::Ablate { data } => {
            let data = data_dir(data, &cfg)?;
            harness::cmd_ablate(&cfg, &data, &out)?;
            print!("{}", std::fs::read_to_string(Path::new(&out).join("ablation.txt"))?);
        }
        Cmd::Check => {
            for o in harness::cmd_check(cfg.seed, Some(&out))? {
                println!("{}", o.line());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
