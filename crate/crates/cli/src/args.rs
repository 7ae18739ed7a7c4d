use clap::{Args, Parser, Subcommand};
use oran_ts::benchmarks::SchemeId;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "oran-ts", version, about = "Mixed-numerology traffic steering with multi-agent DDQN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents, then evaluate them greedily.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint, or a scheme that needs no training.
    Evaluate(EvaluateArgs),
    /// Train and evaluate at every power budget of a list.
    Sweep(SweepArgs),
    /// Relaxed bound, exhaustive search and heuristic on random tiny instances.
    Oracle(OracleArgs),
    /// Evaluate a checkpoint on traces loaded from a dump.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file; the built-in desk-scale config when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config override `dotted.path=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seeds as a comma list, ranges `a..b` allowed.
    #[arg(long, default_value = "0", value_parser = parse_seeds)]
    pub seed: SeedList,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Concurrent workers; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "proposed", value_delimiter = ',')]
    pub scheme: Vec<SchemeId>,
    /// Overrides `learning.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Copy of the checkpoint; only valid with a single scheme and seed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dump the evaluation traces of every worker under this directory.
    #[arg(long)]
    pub dump_traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "proposed")]
    pub scheme: SchemeId,
    /// Required for learned schemes.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dump_traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "proposed,uniform_phi,fixed_numerology", value_delimiter = ',')]
    pub scheme: Vec<SchemeId>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Power budgets in dBm.
    #[arg(long, default_value = "10,16,22,28,34,40,46", value_delimiter = ',')]
    pub powers: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Overrides applied to every tiny instance, `dotted.path=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub instances: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "proposed")]
    pub scheme: SchemeId,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory holding `gains.csv` and `arrivals.csv`.
    #[arg(long)]
    pub traces: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.parse().map_err(|_| format!("bad seed range `{part}`"))?;
                let b: u64 = b.parse().map_err(|_| format!("bad seed range `{part}`"))?;
                if a >= b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(out))
}
