//! Command-line front end: query trust, run operations and scenarios, export
//! DOT and print federation lists. Every command writes line-delimited
//! report records and maps its outcome to an exit code.

pub mod dot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;
use trustweave_core::federation::FederationPolicy;
use trustweave_core::operations::OperationStatus;
use trustweave_core::report::{render, ReportRecord};
use trustweave_core::scenario::{outcome_record, Scenario, ScenarioError, ScenarioRunner};
use trustweave_core::simnet::BuildError;
use trustweave_core::trust_core::{GraphParseError, TrustError, UnknownContext};
use trustweave_core::trust_network::crawl::evaluate_in_graph;
use trustweave_core::trust_network::{path_score, DEFAULT_MAX_DEPTH};
use trustweave_core::{AggregationStrategy, Basis, EntityId, TrustContext, TrustGraph, TrustValue};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_EVIDENCE: i32 = 3;
pub const EXIT_TERMINATED: i32 = 4;
pub const EXIT_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "trustweave", version, about = "Trust-gated identity operations over a simulated network")]
pub struct Cli {
    /// Trust graph file.
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Scenario file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Trust context, e.g. MakeGoodAssertions or make-good-assertions.
    #[arg(long, global = true, default_value = "MakeGoodAssertions")]
    pub context: String,
    /// Aggregation strategy: max or psum.
    #[arg(long, global = true)]
    pub strategy: Option<AggregationStrategy>,
    #[arg(long, global = true)]
    pub max_depth: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long, global = true, env = "TRUSTWEAVE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Write DOT here instead of standard output.
    #[arg(long, global = true)]
    pub dot_out: Option<PathBuf>,
    /// Also write the network event log here.
    #[arg(long, global = true)]
    pub log_out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate SINK from SOURCE's point of view.
    QueryTrust { source: String, sink: String },
    /// Run the single SSO operation a scenario declares.
    RunSso,
    /// Run every operation and feedback round of a scenario.
    RunScenario,
    /// Print the graph, or what SOURCE can reach in --context, as DOT.
    ExportDot { source: Option<String> },
    /// Print every entity's federation list.
    Federations,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Graph {
        path: PathBuf,
        source: GraphParseError,
    },
    #[error("{path}: {source}")]
    Scenario {
        path: PathBuf,
        source: ScenarioError,
    },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Context(#[from] UnknownContext),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error("{0}")]
    Usage(String),
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub code: i32,
    pub report: String,
    /// Network event log, for commands that run the simulator.
    pub log: Option<String>,
}

/// Exit code for a finished operation.
pub fn exit_code(status: OperationStatus) -> i32 {
    match status {
        OperationStatus::Succeeded => EXIT_OK,
        OperationStatus::TerminatedAtTrustCheck(_) => EXIT_TERMINATED,
        OperationStatus::Failed(_) | OperationStatus::Running => EXIT_FAILED,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_graph(path: &Path) -> Result<TrustGraph, CliError> {
    TrustGraph::parse(&read(path)?).map_err(|source| CliError::Graph {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a scenario and the graph file it includes, resolved against the
/// scenario's directory.
pub fn load_scenario(path: &Path) -> Result<(Scenario, String), CliError> {
    let scenario = Scenario::parse(&read(path)?).map_err(|source| CliError::Scenario {
        path: path.to_path_buf(),
        source,
    })?;
    let graph_text = match &scenario.graph {
        Some(rel) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            let text = read(&full)?;
            TrustGraph::parse(&text).map_err(|source| CliError::Graph { path: full, source })?;
            text
        }
        None => String::new(),
    };
    Ok((scenario, graph_text))
}

fn entity(raw: &str) -> Result<EntityId, CliError> {
    EntityId::new(raw).map_err(|e| CliError::Usage(e.to_string()))
}

fn need<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

impl Cli {
    fn context(&self) -> Result<TrustContext, CliError> {
        Ok(TrustContext::parse_loose(&self.context)?)
    }

    fn threshold(&self) -> Result<TrustValue, CliError> {
        Ok(TrustValue::new(self.threshold.unwrap_or(0.5))?)
    }

    fn depth(&self) -> Result<usize, CliError> {
        match self.max_depth.unwrap_or(DEFAULT_MAX_DEPTH) {
            0 => Err(TrustError::InvalidDepth.into()),
            d => Ok(d),
        }
    }

    /// Scenario with command-line overrides applied.
    fn scenario(&self) -> Result<(Scenario, String), CliError> {
        let (mut sc, graph) = load_scenario(need(&self.scenario, "--scenario")?)?;
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(s) = self.strategy {
            sc.strategy = s;
        }
        if let Some(d) = self.max_depth {
            sc.max_depth = d;
        }
        Ok((sc, graph))
    }
}

/// Runs one command. Input problems come back as `Err` and map to exit 2.
pub fn execute(cli: &Cli) -> Result<Execution, CliError> {
    match &cli.command {
        Command::QueryTrust { source, sink } => query_trust(cli, source, sink),
        Command::RunSso => run_sso(cli),
        Command::RunScenario => run_scenario(cli),
        Command::ExportDot { source } => export_dot(cli, source.as_deref()),
        Command::Federations => federations(cli),
    }
}

fn query_trust(cli: &Cli, source: &str, sink: &str) -> Result<Execution, CliError> {
    let graph = load_graph(need(&cli.graph, "--graph")?)?;
    let (source, sink, context) = (entity(source)?, entity(sink)?, cli.context()?);
    let strategy = cli.strategy.unwrap_or_default();
    let eval = evaluate_in_graph(&graph, &source, &sink, &context, strategy, cli.depth()?, cli.seed.unwrap_or(0));
    let rating = &eval.rating;
    let mut records = vec![ReportRecord::new("rating")
        .field("source", &source)
        .field("sink", &sink)
        .field("context", &context)
        .field("strategy", strategy)
        .field("value", rating.value)
        .field("basis", rating.basis)
        .field("paths", eval.paths.len())];
    for &i in &eval.contributing {
        let path = &eval.paths[i];
        let arcs: Vec<String> = path
            .arcs
            .iter()
            .map(|a| format!("{}>{}:{}:{}", a.trustor, a.trustee, a.kind, a.value))
            .collect();
        records.push(
            ReportRecord::new("path")
                .field("route", path)
                .field("arcs", arcs.join(","))
                .field("score", path_score(path)?),
        );
    }
    let code = if rating.basis == Basis::None { EXIT_NO_EVIDENCE } else { EXIT_OK };
    Ok(Execution {
        code,
        report: render(&records),
        log: None,
    })
}

fn run_sso(cli: &Cli) -> Result<Execution, CliError> {
    let (sc, graph) = cli.scenario()?;
    let [op] = sc.operations.as_slice() else {
        return Err(CliError::Usage(format!(
            "run-sso needs exactly one operation, scenario declares {}",
            sc.operations.len()
        )));
    };
    if op.spec.name != "sso" {
        return Err(CliError::Usage(format!("operation `{}` is not sso", op.spec.name)));
    }
    let mut net = sc.build(&graph)?;
    let id = net
        .start_operation(&op.spec, op.bindings.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let log = net.run_until_quiet();
    let outcome = net.outcome(id).expect("started above");
    let mut records: Vec<ReportRecord> = log
        .records()
        .iter()
        .filter(|r| matches!(r.kind.as_str(), "message" | "check" | "action"))
        .cloned()
        .collect();
    records.push(outcome_record(None, &outcome));
    Ok(Execution {
        code: exit_code(outcome.status),
        report: render(&records),
        log: Some(net.log().render()),
    })
}

fn run_scenario(cli: &Cli) -> Result<Execution, CliError> {
    let (sc, graph) = cli.scenario()?;
    let mut runner = ScenarioRunner::new(sc, &graph)?;
    let (outcomes, records) = runner.run_all();
    let failed = outcomes.iter().any(|o| matches!(o.status, OperationStatus::Failed(_)));
    Ok(Execution {
        code: if failed { EXIT_FAILED } else { EXIT_OK },
        report: render(&records),
        log: Some(runner.network.log().render()),
    })
}

fn export_dot(cli: &Cli, source: Option<&str>) -> Result<Execution, CliError> {
    let graph = load_graph(need(&cli.graph, "--graph")?)?;
    let text = match source {
        None => dot::to_dot(graph.arcs(), &[]),
        Some(s) => {
            let source = entity(s)?;
            let sub = dot::reachable_subgraph(&graph, &source, &cli.context()?, cli.depth()?);
            dot::to_dot(&sub, &[source])
        }
    };
    match &cli.dot_out {
        Some(path) => {
            fs::write(path, &text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(Execution {
                code: EXIT_OK,
                report: String::new(),
                log: None,
            })
        }
        None => Ok(Execution {
            code: EXIT_OK,
            report: text,
            log: None,
        }),
    }
}

/// Each entity's federation list, computed from the loaded trust state with
/// referrals crawled from the other entities.
fn federations(cli: &Cli) -> Result<Execution, CliError> {
    let (graph, mut entities, strategy, depth, seed) = match (&cli.graph, &cli.scenario) {
        (Some(path), None) => {
            let g = load_graph(path)?;
            let entities = g.entities();
            (g, entities, cli.strategy.unwrap_or_default(), cli.depth()?, cli.seed.unwrap_or(0))
        }
        (None, Some(_)) => {
            let (sc, text) = cli.scenario()?;
            let mut combined = text;
            if !combined.is_empty() && !combined.ends_with('\n') {
                combined.push('\n');
            }
            combined.push_str(&sc.inline_arcs);
            let g = TrustGraph::parse(&combined).map_err(|source| CliError::Graph {
                path: cli.scenario.clone().expect("matched"),
                source,
            })?;
            let entities = sc.entities.iter().map(|e| e.id.clone()).collect();
            (g, entities, sc.strategy, sc.max_depth, sc.seed)
        }
        _ => return Err(CliError::Usage("give exactly one of --graph or --scenario".into())),
    };
    entities.extend(graph.entities());
    let policy = FederationPolicy {
        context: cli.context()?,
        threshold: cli.threshold()?,
        refresh_every: 1,
    };
    let mut records = Vec::new();
    for owner in &entities {
        let mut members = Vec::new();
        for peer in entities.iter().filter(|p| *p != owner) {
            let eval = evaluate_in_graph(&graph, owner, peer, &policy.context, strategy, depth, seed);
            if eval.rating.meets(policy.threshold) {
                members.push(format!("{peer}:{}", eval.rating.value));
            }
        }
        records.push(
            ReportRecord::new("federation")
                .field("owner", owner)
                .field("context", &policy.context)
                .field("threshold", policy.threshold)
                .field("members", members.join(",")),
        );
    }
    Ok(Execution {
        code: EXIT_OK,
        report: render(&records),
        log: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trustweave_core::operations::{FailureReason, RelationshipId};

    #[test]
    fn exit_code_table() {
        let table = [
            (OperationStatus::Succeeded, 0),
            (OperationStatus::TerminatedAtTrustCheck(RelationshipId::C), 4),
            (OperationStatus::TerminatedAtTrustCheck(RelationshipId::D), 4),
            (OperationStatus::TerminatedAtTrustCheck(RelationshipId::G), 4),
            (OperationStatus::Failed(FailureReason::Timeout), 5),
            (OperationStatus::Failed(FailureReason::AuthenticationFailed), 5),
            (OperationStatus::Failed(FailureReason::AssertionRejected), 5),
            (OperationStatus::Failed(FailureReason::ProtocolViolation), 5),
            (OperationStatus::Failed(FailureReason::Unverified), 5),
            (OperationStatus::Running, 5),
        ];
        for (status, code) in table {
            assert_eq!(exit_code(status), code, "{status}");
        }
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "trustweave",
            "query-trust",
            "A",
            "C",
            "--graph",
            "g.txt",
            "--strategy",
            "psum",
            "--max-depth",
            "3",
            "--seed",
            "7",
        ])
        .unwrap();
        assert_eq!(cli.strategy, Some(AggregationStrategy::ProbabilisticSumDisjoint));
        assert_eq!(cli.seed, Some(7));
        assert!(Cli::try_parse_from(["trustweave", "query-trust", "A", "C", "--strategy", "mean"]).is_err());
    }
}
