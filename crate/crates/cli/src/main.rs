//! `uasnav`: build a landmark world, train a policy, evaluate it, match
//! imagery, and fly closed-loop missions, all driven by one config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uasnav_core::Error;

#[derive(Parser)]
#[command(name = "uasnav", version, about = "Landmark-lattice UAS navigation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Directory for all artifacts (overrides `output_dir`).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize or ingest the world raster and cut the landmark crops.
    BuildEnv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world_seed: Option<u64>,
    },
    /// Train a Q-learning policy and compare it with the exact optimum.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll out a policy from seeded uniform starts.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Policy file (default: `<output_dir>/policy.txt`).
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Match an observation against a landmark image.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        landmark: PathBuf,
        /// Write a side-by-side correspondence figure here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fly a closed-loop mission over the built world.
    Fly {
        #[command(flatten)]
        common: Common,
        /// Policy file (default: `<output_dir>/policy.txt`).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Start landmark as `col,row`.
        #[arg(long, value_parser = parse_cell)]
        start: Option<(usize, usize)>,
        /// Goal landmark as `col,row`.
        #[arg(long, value_parser = parse_cell)]
        goal: Option<(usize, usize)>,
        #[arg(long)]
        perturb_seed: Option<u64>,
    },
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (c, r) = s.split_once(',').ok_or("expected col,row")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(c)?, p(r)?))
}

/// Flag values become overrides applied after `--set`, so flags win.
fn overrides(common: &Common, flags: &[(&str, Option<String>)]) -> Vec<String> {
    let mut out = common.set.clone();
    if let Some(dir) = &common.output_dir {
        out.push(format!("output_dir={:?}", dir.display().to_string()));
    }
    for (key, value) in flags {
        if let Some(v) = value {
            out.push(format!("{key}={v}"));
        }
    }
    out
}

fn s<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

fn run(cli: Cli) -> Result<commands::Report, Error> {
    let load = |common: &Common, flags: &[(&str, Option<String>)]| {
        let loaded = config::load(common.config.as_deref(), &overrides(common, flags))?;
        for line in &loaded.defaulted {
            eprintln!("{line}");
        }
        Ok::<_, Error>(loaded.config)
    };
    match cli.command {
        Command::BuildEnv { common, world_seed } => {
            let cfg = load(&common, &[("imagery.world_seed", s(world_seed))])?;
            commands::build_env(&cfg)
        }
        Command::Train { common, episodes, seed } => {
            let cfg = load(&common, &[("train.episodes", s(episodes)), ("train.seed", s(seed))])?;
            commands::train(&cfg)
        }
        Command::Eval { common, policy, episodes, seed } => {
            let cfg = load(&common, &[("train.eval_episodes", s(episodes)), ("train.eval_seed", s(seed))])?;
            commands::eval(&cfg, policy.as_deref())
        }
        Command::Match { common, obs, landmark, svg } => {
            let cfg = load(&common, &[])?;
            commands::match_pair(&cfg, &obs, &landmark, svg.as_deref())
        }
        Command::Fly { common, policy, start, goal, perturb_seed } => {
            let cfg = load(
                &common,
                &[
                    ("mission.start_col", s(start.map(|c| c.0))),
                    ("mission.start_row", s(start.map(|c| c.1))),
                    ("grid.goal_col", s(goal.map(|c| c.0))),
                    ("grid.goal_row", s(goal.map(|c| c.1))),
                    ("mission.perturb_seed", s(perturb_seed)),
                ],
            )?;
            commands::fly(&cfg, policy.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            let tail: String = report.fields.iter().map(|(k, v)| format!(" {k}={v}")).collect();
            if report.failed {
                println!("status=error kind=runtime{tail}");
                ExitCode::from(3)
            } else {
                println!("status=ok{tail}");
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            let (code, kind) = if e.is_config_error() { (2, "config") } else { (3, "runtime") };
            eprintln!("error: {e}");
            println!("status=error kind={kind} message={:?}", e.to_string());
            ExitCode::from(code)
        }
    }
}
