//! Command-line front end: experiment documents, grid sweeps and CSV output.

mod run;
mod spec;

pub use run::{evaluate, run_experiment, ResultRow, Table, HEADER};
pub use spec::{
    mining_profile, Axis, ExperimentSpec, Grid, GridPoint, Kind, LanGroup, PairAxes, ProfileAxes,
    SettingsDocument, SplitAxes, Topology,
};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::edtmc::{self, BuildOptions};
use crate::error::{Error, Result};
use crate::markov::solver_by_name;
use crate::netmodel::NetworkScenario;

/// Environment variable capping worker threads; 0 or unset means automatic.
pub const THREADS_ENV: &str = "CHAINCAP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "chaincap", version, about = "Blockchain capacity over unreliable links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated-chain capacity for any number of miners.
    Edtmc {
        #[command(flatten)]
        common: Common,
        /// Write `state_id,r_vector,pi,omega` for the first point.
        #[arg(long)]
        dump_states: Option<PathBuf>,
        /// Write the dense transition matrix for the first point.
        #[arg(long, requires = "dump_states")]
        dump_matrix: Option<PathBuf>,
    },
    /// Exact two-miner capacity.
    ClosedForm(Common),
    /// Strong-consistency probabilities for two miners.
    Strong(Common),
    /// Slot-by-slot simulation.
    Simulate(Common),
    /// Closed form against the two baselines and simulation.
    Compare(Common),
    /// Any experiment document, with its own model list.
    Sweep(Common),
}

impl Command {
    fn kind(&self) -> Kind {
        match self {
            Command::Edtmc { .. } => Kind::EdtmcCapacity,
            Command::ClosedForm(_) => Kind::ClosedForm,
            Command::Strong(_) => Kind::StrongConsistency,
            Command::Simulate(_) => Kind::Simulate,
            Command::Compare(_) => Kind::CompareBaselines,
            Command::Sweep(_) => Kind::Sweep,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Edtmc { common, .. }
            | Command::ClosedForm(common)
            | Command::Strong(common)
            | Command::Simulate(common)
            | Command::Compare(common)
            | Command::Sweep(common) => common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment document, or a scenario document with simulation settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed of the document.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppresses the summary on stderr.
    #[arg(long)]
    pub quiet: bool,

    /// Mining rates of a single point, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["config", "scenario"])]
    pub rates: Option<Vec<f64>>,
    /// Scenario document for a single point.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<PathBuf>,
    /// Uniform link probability.
    #[arg(long, conflicts_with_all = ["config", "a12", "a21"])]
    pub alpha: Option<f64>,
    /// Two-miner link from miner 1 to miner 2.
    #[arg(long, requires = "a21", conflicts_with = "config")]
    pub a12: Option<f64>,
    /// Two-miner link from miner 2 to miner 1.
    #[arg(long, requires = "a12", conflicts_with = "config")]
    pub a21: Option<f64>,
    /// complete, star or line.
    #[arg(long, conflicts_with = "config")]
    pub topology: Option<String>,
    /// Fixed truncation instead of raising it until convergence.
    #[arg(long, conflicts_with = "config")]
    pub k: Option<usize>,
    /// Models to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,

    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub replications: Option<u64>,
    /// Fork-choice rule: longest-chain or ghost-two-miner.
    #[arg(long)]
    pub rule: Option<String>,
    /// Bound on the two-miner lead pair for the consistency chain.
    #[arg(long)]
    pub bound: Option<u32>,
}

impl Common {
    /// The document named by `--config`, or one built from the inline flags.
    pub fn spec(&self, kind: Kind) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let spec = ExperimentSpec::from_json(&read(path)?)?;
                match spec.kind {
                    Some(k) if k != kind && kind != Kind::Sweep => {
                        return Err(Error::Config(format!(
                            "document kind `{}` does not match subcommand `{}`",
                            k.name(),
                            kind.name()
                        )))
                    }
                    _ => spec,
                }
            }
            None => self.inline_spec(kind)?,
        };
        if spec.kind.is_none() {
            spec.kind = Some(kind);
        }
        if let Some(m) = &self.models {
            spec.models = Some(m.clone());
        }
        let s = &mut spec.settings;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.tolerance {
            s.tolerance = v;
        }
        if let Some(v) = self.slots {
            s.slots = v;
        }
        if let Some(v) = self.replications {
            s.replications = v;
        }
        if let Some(v) = &self.rule {
            s.rule = v.clone();
        }
        if let Some(v) = self.bound {
            s.bound = v;
        }
        Ok(spec)
    }

    fn inline_spec(&self, kind: Kind) -> Result<ExperimentSpec> {
        let mut grid = Grid {
            k: self.k.map(|k| vec![k]),
            ..Grid::default()
        };
        if let Some(path) = &self.scenario {
            let s: NetworkScenario =
                serde_json::from_str(&read(path)?).map_err(|e| Error::Config(e.to_string()))?;
            if self.topology.is_some() || self.alpha.is_some() || self.a12.is_some() {
                return Err(Error::Config("`--scenario` carries its own links".into()));
            }
            grid.scenarios = Some(vec![s]);
        } else {
            let rates = self
                .rates
                .clone()
                .ok_or_else(|| Error::Config("give `--config`, `--scenario` or `--rates`".into()))?;
            grid.rates = Some(vec![rates]);
            match (self.a12, self.a21) {
                (Some(x), Some(y)) => {
                    if self.topology.is_some() {
                        return Err(Error::Config("`--a12`/`--a21` exclude `--topology`".into()));
                    }
                    grid.a12 = Some(Axis::Values(vec![x]));
                    grid.a21 = Some(Axis::Values(vec![y]));
                }
                _ => {
                    grid.alpha = self.alpha.map(|a| Axis::Values(vec![a]));
                    grid.topology = self
                        .topology
                        .as_deref()
                        .map(|t| {
                            serde_json::from_value(serde_json::Value::String(t.to_string()))
                                .map(|t: Topology| vec![t])
                                .map_err(|_| Error::UnknownStrategy {
                                    kind: "topology",
                                    name: t.to_string(),
                                    available: "complete, star, line".into(),
                                })
                        })
                        .transpose()?;
                }
            }
        }
        Ok(ExperimentSpec {
            kind: Some(kind),
            description: None,
            models: None,
            grid,
            settings: SettingsDocument::default(),
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Sizes the global worker pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

/// Runs one parsed command line and reports how many rows failed.
pub fn execute(cli: &Cli) -> Result<Table> {
    let common = cli.command.common();
    let spec = common.spec(cli.command.kind())?;
    let table = run_experiment(&spec, common.out.as_deref())?;
    if let Command::Edtmc {
        dump_states: Some(states),
        dump_matrix,
        ..
    } = &cli.command
    {
        dump_first_point(&table, states, dump_matrix.as_deref())?;
    }
    Ok(table)
}

fn dump_first_point(table: &Table, states: &Path, matrix: Option<&Path>) -> Result<()> {
    let row = table
        .rows
        .first()
        .ok_or_else(|| Error::Config("nothing to dump: the grid is empty".into()))?;
    let k = row
        .metrics
        .k_used
        .ok_or_else(|| Error::Config("nothing to dump: the first point has no truncated chain".into()))?;
    let options = BuildOptions {
        max_states: table.settings.max_states,
    };
    let chain = edtmc::build_chain_with(&row.point.scenario, k, options)?;
    let pi = solver_by_name(&table.settings.solver)?.solve(&chain)?;
    edtmc::write_debug_csv(&chain, &pi, states, matrix)
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.command.common().quiet;
    let outcome = configure_threads().and_then(|()| execute(&cli));
    match outcome {
        Ok(table) => {
            let failed = table.failures();
            if !quiet {
                let dest = cli
                    .command
                    .common()
                    .out
                    .as_ref()
                    .map_or("stdout".to_string(), |p| p.display().to_string());
                eprintln!("{} rows written to {dest}, {failed} failed", table.rows.len());
                for (i, row) in table.rows.iter().enumerate().filter(|(_, r)| r.failed()) {
                    eprintln!("  point {i}: {}", row.errors.join("; "));
                }
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("chaincap").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn inline_two_miner_point() {
        let cli = parse(&["closed-form", "--rates", "0.2,0.4", "--a12", "0.2", "--a21", "0.8"]);
        let spec = cli.command.common().spec(cli.command.kind()).unwrap();
        let p = spec.points().unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].scenario.link(0, 1), 0.2);
        assert_eq!(spec.kind(), Kind::ClosedForm);
    }

    #[test]
    fn settings_overrides() {
        let cli = parse(&["simulate", "--rates", "0.1,0.2", "--seed", "7", "--slots", "900", "--rule", "ghost"]);
        let st = cli.command.common().spec(Kind::Simulate).unwrap().settings();
        assert_eq!((st.seed, st.slots, st.rule.as_str()), (7, 900, "ghost"));
    }

    #[test]
    fn conflicting_flags_are_rejected() {
        let args = ["chaincap", "edtmc", "--config", "x.json", "--rates", "0.1"];
        assert!(Cli::try_parse_from(args).is_err());
        assert!(Cli::try_parse_from(["chaincap", "closed-form", "--a12", "0.1"]).is_err());
    }

    #[test]
    fn unknown_topology() {
        let cli = parse(&["edtmc", "--rates", "0.1,0.1", "--topology", "ring"]);
        assert!(matches!(
            cli.command.common().spec(Kind::EdtmcCapacity),
            Err(Error::UnknownStrategy { .. })
        ));
    }

    #[test]
    fn kind_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, r#"{"kind":"simulate","grid":{"rates":[[0.1]]}}"#).unwrap();
        let cli = parse(&["strong", "--config", path.to_str().unwrap()]);
        assert!(cli.command.common().spec(Kind::StrongConsistency).is_err());
        let cli = parse(&["sweep", "--config", path.to_str().unwrap()]);
        assert_eq!(cli.command.common().spec(Kind::Sweep).unwrap().kind(), Kind::Simulate);
    }
}
