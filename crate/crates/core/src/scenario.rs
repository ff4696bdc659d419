//! Scenario files: entities, identities, adversaries, operations and
//! feedback rounds, one directive per line.
//!
//! ```text
//! seed 7
//! graph trust.graph
//! rounds 3
//! entity alice roles=user
//! entity idp1 roles=idp
//! identity alice idp=idp1 secret=pw attr.name=Alice
//! adversary idp1 bad-asserter
//! operation sso user=alice sp=shop sp-idp=idp2 user-idp=idp1 threshold-c=0.5
//! federation context=MakeGoodAssertions threshold=0.5 refresh-every=1
//! ```
//!
//! `arc` records may also appear inline. Custom operations are declared in
//! `spec <name> ... end` blocks and run with `operation <name> role=entity`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use thiserror::Error;

use crate::federation::FederationPolicy;
use crate::identity_model::{EntityId, EntityRole};
use crate::operations::{
    LocalAction, OperationOutcome, OperationSpec, OperationStatus, PayloadKind, RelationshipId, Role, Step,
};
use crate::report::ReportRecord;
use crate::simnet::{build_network, AdversaryKind, BuildError, EntityDecl, IdentityDecl, Network, NetworkConfig};
use crate::sso::{build_attribute_query_spec, build_sso_spec, SsoParams};
use crate::trust_core::{Tick, TrustContext, TrustValue, UpdateParams, DEFAULT_ALPHA, DEFAULT_REFEREE_PENALTY};
use crate::trust_network::{AggregationStrategy, DEFAULT_MAX_DEPTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationDecl {
    pub line: usize,
    pub spec: OperationSpec,
    pub bindings: BTreeMap<Role, EntityId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub graph: Option<PathBuf>,
    /// Inline `arc` records, in graph text format.
    pub inline_arcs: String,
    pub drop_probability: f64,
    pub max_ticks: Tick,
    pub max_depth: usize,
    pub strategy: AggregationStrategy,
    pub alpha: f64,
    pub referee_penalty: f64,
    pub rounds: u32,
    pub entities: Vec<EntityDecl>,
    pub identities: Vec<IdentityDecl>,
    pub adversaries: Vec<(EntityId, AdversaryKind)>,
    pub operations: Vec<OperationDecl>,
    pub federation: Option<FederationPolicy>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            graph: None,
            inline_arcs: String::new(),
            drop_probability: 0.0,
            max_ticks: crate::operations::DEFAULT_MAX_TICKS,
            max_depth: DEFAULT_MAX_DEPTH,
            strategy: AggregationStrategy::default(),
            alpha: DEFAULT_ALPHA,
            referee_penalty: DEFAULT_REFEREE_PENALTY,
            rounds: 1,
            entities: Vec::new(),
            identities: Vec::new(),
            adversaries: Vec::new(),
            operations: Vec::new(),
            federation: None,
        }
    }
}

struct Line<'a> {
    no: usize,
    words: Vec<&'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.no,
            message: message.into(),
        }
    }

    /// Single positional argument.
    fn arg(&self) -> Result<&'a str, ScenarioError> {
        match self.words.as_slice() {
            [_, value] => Ok(value),
            _ => Err(self.err(format!("`{}` takes exactly one value", self.words[0]))),
        }
    }

    fn parse_arg<T: std::str::FromStr>(&self) -> Result<T, ScenarioError> {
        let raw = self.arg()?;
        raw.parse()
            .map_err(|_| self.err(format!("invalid value `{raw}` for `{}`", self.words[0])))
    }

    /// `key=value` pairs from position `from` on; duplicate keys rejected.
    fn pairs(&self, from: usize) -> Result<Vec<(&'a str, &'a str)>, ScenarioError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for w in self.words.iter().skip(from) {
            let (k, v) = w.split_once('=').ok_or_else(|| self.err(format!("expected key=value, found `{w}`")))?;
            if !seen.insert(k) {
                return Err(self.err(format!("duplicate key `{k}`")));
            }
            out.push((k, v));
        }
        Ok(out)
    }

    fn entity(&self, raw: &str) -> Result<EntityId, ScenarioError> {
        EntityId::new(raw).map_err(|e| self.err(e.to_string()))
    }

    fn value(&self, key: &str, raw: &str) -> Result<TrustValue, ScenarioError> {
        raw.parse::<f64>()
            .ok()
            .and_then(|v| TrustValue::new(v).ok())
            .ok_or_else(|| self.err(format!("`{key}` must be a number in [0, 1], found `{raw}`")))
    }
}

fn list(raw: &str) -> Vec<String> {
    raw.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Line, operation name and bindings of an `operation` line awaiting validation.
type PendingOp = (usize, String, Vec<(String, String)>);

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::default();
        let mut specs: BTreeMap<String, OperationSpec> = BTreeMap::new();
        let mut open_spec: Option<(usize, OperationSpec)> = None;
        let mut declared: BTreeSet<EntityId> = BTreeSet::new();
        let mut seen_settings: BTreeSet<&str> = BTreeSet::new();
        let mut pending_ops: Vec<PendingOp> = Vec::new();
        let mut adversary_lines: Vec<(usize, EntityId)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let line = Line {
                no: idx + 1,
                words: content.split_whitespace().collect(),
            };
            let head = line.words[0];

            if let Some((_, spec)) = open_spec.as_mut() {
                if head == "end" {
                    let (_, spec) = open_spec.take().expect("open");
                    specs.insert(spec.name.clone(), spec);
                } else {
                    parse_spec_line(&line, spec)?;
                }
                continue;
            }

            if matches!(
                head,
                "seed" | "graph" | "drop-probability" | "max-ticks" | "max-depth" | "strategy" | "alpha"
                    | "referee-penalty" | "rounds" | "federation"
            ) && !seen_settings.insert(head)
            {
                return Err(line.err(format!("`{head}` given twice")));
            }

            match head {
                "seed" => sc.seed = line.parse_arg()?,
                "graph" => sc.graph = Some(PathBuf::from(line.arg()?)),
                "drop-probability" => {
                    let p: f64 = line.parse_arg()?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(line.err("drop-probability must be in [0, 1]"));
                    }
                    sc.drop_probability = p;
                }
                "max-ticks" => sc.max_ticks = line.parse_arg()?,
                "max-depth" => {
                    sc.max_depth = line.parse_arg()?;
                    if sc.max_depth == 0 {
                        return Err(line.err("max-depth must be at least 1"));
                    }
                }
                "strategy" => sc.strategy = line.arg()?.parse().map_err(|e: String| line.err(e))?,
                "alpha" => {
                    sc.alpha = line.parse_arg()?;
                    UpdateParams::new(sc.alpha, DEFAULT_REFEREE_PENALTY).map_err(|e| line.err(e.to_string()))?;
                }
                "referee-penalty" => {
                    sc.referee_penalty = line.parse_arg()?;
                    UpdateParams::new(DEFAULT_ALPHA, sc.referee_penalty).map_err(|e| line.err(e.to_string()))?;
                }
                "rounds" => sc.rounds = line.parse_arg()?,
                "arc" => {
                    sc.inline_arcs.push_str(content);
                    sc.inline_arcs.push('\n');
                }
                "entity" => {
                    let Some(raw_id) = line.words.get(1) else {
                        return Err(line.err("entity needs an id"));
                    };
                    let id = line.entity(raw_id)?;
                    let mut roles = BTreeSet::new();
                    for (k, v) in line.pairs(2)? {
                        match k {
                            "roles" => {
                                for r in list(v) {
                                    roles.insert(r.parse::<EntityRole>().map_err(|e| line.err(e))?);
                                }
                            }
                            other => return Err(line.err(format!("unknown entity key `{other}`"))),
                        }
                    }
                    if roles.is_empty() {
                        return Err(line.err("entity needs roles=..."));
                    }
                    if !declared.insert(id.clone()) {
                        return Err(line.err(format!("duplicate entity `{id}`")));
                    }
                    sc.entities.push(EntityDecl { id, roles });
                }
                "identity" => {
                    let Some(raw_id) = line.words.get(1) else {
                        return Err(line.err("identity needs a subject"));
                    };
                    let subject = line.entity(raw_id)?;
                    let (mut idp, mut secret, mut presents) = (None, None, None);
                    let mut attributes = BTreeMap::new();
                    for (k, v) in line.pairs(2)? {
                        match k {
                            "idp" => idp = Some(line.entity(v)?),
                            "secret" => secret = Some(v.to_string()),
                            "presents" => presents = Some(v.to_string()),
                            _ => match k.strip_prefix("attr.") {
                                Some(name) if !name.is_empty() => {
                                    attributes.insert(name.to_string(), v.to_string());
                                }
                                _ => return Err(line.err(format!("unknown identity key `{k}`"))),
                            },
                        }
                    }
                    let idp = idp.ok_or_else(|| line.err("identity needs idp=..."))?;
                    let secret = secret.ok_or_else(|| line.err("identity needs secret=..."))?;
                    sc.identities.push(IdentityDecl {
                        subject,
                        idp,
                        presents: presents.unwrap_or_else(|| secret.clone()),
                        secret,
                        attributes,
                    });
                }
                "adversary" => {
                    let (Some(raw_id), Some(kind)) = (line.words.get(1), line.words.get(2)) else {
                        return Err(line.err("adversary needs an entity and a kind"));
                    };
                    let id = line.entity(raw_id)?;
                    let pairs = line.pairs(3)?;
                    let kind = match (*kind, pairs.as_slice()) {
                        ("lying-referee", [("inflation", v)]) => format!("lying-referee:{v}")
                            .parse()
                            .map_err(|e: String| line.err(e))?,
                        ("lying-referee", []) => AdversaryKind::LyingReferee { inflation: 1.0 },
                        ("bad-asserter", []) => AdversaryKind::BadAsserter,
                        ("tampering-forwarder", []) => AdversaryKind::TamperingForwarder,
                        (k, []) => return Err(line.err(format!("unknown adversary kind `{k}`"))),
                        _ => return Err(line.err("unexpected adversary options")),
                    };
                    adversary_lines.push((line.no, id.clone()));
                    sc.adversaries.push((id, kind));
                }
                "operation" => {
                    let Some(name) = line.words.get(1) else {
                        return Err(line.err("operation needs a kind"));
                    };
                    let pairs = line.pairs(2)?.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
                    pending_ops.push((line.no, name.to_string(), pairs));
                }
                "spec" => {
                    let name = line.arg()?;
                    if matches!(name, "sso" | "attribute-query") || specs.contains_key(name) {
                        return Err(line.err(format!("spec `{name}` already defined")));
                    }
                    open_spec = Some((
                        line.no,
                        OperationSpec {
                            name: name.to_string(),
                            roles: BTreeSet::new(),
                            steps: Vec::new(),
                            requested_attributes: Vec::new(),
                        },
                    ));
                }
                "federation" => {
                    let (mut context, mut threshold, mut every) = (None, None, 1);
                    for (k, v) in line.pairs(1)? {
                        match k {
                            "context" => {
                                context = Some(TrustContext::parse_loose(v).map_err(|e| line.err(e.to_string()))?)
                            }
                            "threshold" => threshold = Some(line.value(k, v)?),
                            "refresh-every" => {
                                every = v.parse().map_err(|_| line.err(format!("invalid refresh-every `{v}`")))?
                            }
                            other => return Err(line.err(format!("unknown federation key `{other}`"))),
                        }
                    }
                    sc.federation = Some(FederationPolicy {
                        context: context.ok_or_else(|| line.err("federation needs context=..."))?,
                        threshold: threshold.ok_or_else(|| line.err("federation needs threshold=..."))?,
                        refresh_every: every,
                    });
                }
                other => return Err(line.err(format!("unknown directive `{other}`"))),
            }
        }
        if let Some((no, spec)) = open_spec {
            return Err(ScenarioError {
                line: no,
                message: format!("spec `{}` is missing `end`", spec.name),
            });
        }
        for (no, name, pairs) in pending_ops {
            let line = Line { no, words: vec![] };
            sc.operations.push(operation(&line, &name, &pairs, &specs, &declared)?);
        }
        for (no, who) in adversary_lines {
            if !declared.contains(&who) {
                return Err(ScenarioError {
                    line: no,
                    message: format!("adversary on unknown entity `{who}`"),
                });
            }
        }
        Ok(sc)
    }

    pub fn config(&self) -> NetworkConfig {
        NetworkConfig {
            seed: self.seed,
            drop_probability: self.drop_probability,
            max_ticks: self.max_ticks,
            adversaries: self.adversaries.clone(),
            update: UpdateParams::new(self.alpha, self.referee_penalty).expect("validated at parse"),
            max_depth: self.max_depth,
            strategy: self.strategy,
        }
    }

    /// Builds the network from the included graph text plus inline arcs.
    pub fn build(&self, graph_text: &str) -> Result<Network, BuildError> {
        let mut text = graph_text.to_string();
        if !text.is_empty() && !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&self.inline_arcs);
        build_network(self.config(), &text, &self.entities, &self.identities)
    }
}

fn parse_spec_line(line: &Line, spec: &mut OperationSpec) -> Result<(), ScenarioError> {
    let role = |raw: &str| raw.parse::<Role>().map_err(|e| line.err(e));
    match line.words.as_slice() {
        ["roles", rs] => {
            for r in list(rs) {
                spec.roles.insert(role(&r)?);
            }
        }
        ["attributes", attrs] => spec.requested_attributes = list(attrs),
        ["message", from, to, kind, rest @ ..] if rest.len() <= 1 => {
            let kind: PayloadKind = kind.parse().map_err(|e: String| line.err(e))?;
            spec.steps.push(Step::message(role(from)?, role(to)?, kind, rest.first().copied().unwrap_or("")));
        }
        ["check", rel, threshold] => {
            let rel: RelationshipId = rel.parse().map_err(|e: String| line.err(e))?;
            spec.steps.push(Step::check(rel, line.value("check", threshold)?));
        }
        ["action", r, "authenticate"] => spec.steps.push(Step::action(role(r)?, LocalAction::Authenticate)),
        ["action", r, "verify-assertion"] => spec.steps.push(Step::action(role(r)?, LocalAction::VerifyAssertion)),
        ["action", r, "issue-assertion", rest @ ..] => {
            let (mut subject, mut audience) = (None, None);
            for (k, v) in line.pairs(3)? {
                match k {
                    "subject" => subject = Some(role(v)?),
                    "audience" => audience = Some(role(v)?),
                    other => return Err(line.err(format!("unknown issue-assertion key `{other}`"))),
                }
            }
            let _ = rest;
            spec.steps.push(Step::action(
                role(r)?,
                LocalAction::IssueAssertion {
                    subject: subject.ok_or_else(|| line.err("issue-assertion needs subject=..."))?,
                    audience: audience.ok_or_else(|| line.err("issue-assertion needs audience=..."))?,
                },
            ));
        }
        _ => return Err(line.err(format!("unknown spec line `{}`", line.words.join(" ")))),
    }
    Ok(())
}

fn operation(
    line: &Line,
    name: &str,
    pairs: &[(String, String)],
    specs: &BTreeMap<String, OperationSpec>,
    declared: &BTreeSet<EntityId>,
) -> Result<OperationDecl, ScenarioError> {
    let mut bindings = BTreeMap::new();
    let mut sso = SsoParams::default();
    let mut threshold_d = sso.threshold_d;
    for (k, v) in pairs {
        if let Ok(role) = k.parse::<Role>() {
            let id = line.entity(v)?;
            if !declared.contains(&id) {
                return Err(line.err(format!("unknown entity `{id}`")));
            }
            bindings.insert(role, id);
            continue;
        }
        match (name, k.as_str()) {
            ("sso", "threshold-c") => sso.threshold_c = line.value(k, v)?,
            ("sso", "threshold-d") => sso.threshold_d = line.value(k, v)?,
            ("sso", "gh-checks") => sso.internal_checks = Some(line.value(k, v)?),
            ("attribute-query", "threshold-d") => threshold_d = line.value(k, v)?,
            ("sso" | "attribute-query", "attributes") => sso.attributes_requested = list(v),
            _ => return Err(line.err(format!("unknown key `{k}` for operation `{name}`"))),
        }
    }
    let spec = match name {
        "sso" => build_sso_spec(&sso),
        "attribute-query" => build_attribute_query_spec(threshold_d, sso.attributes_requested.clone()),
        custom => specs
            .get(custom)
            .cloned()
            .ok_or_else(|| line.err(format!("unknown operation `{custom}`")))?,
    };
    crate::operations::validate_spec(&spec).map_err(|errs| {
        let text: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        line.err(format!("invalid spec `{}`: {}", spec.name, text.join("; ")))
    })?;
    if let Some(role) = spec.roles.iter().find(|r| !bindings.contains_key(r)) {
        return Err(line.err(format!("operation `{name}` is missing binding {role}=...")));
    }
    if let Some(role) = bindings.keys().find(|r| !spec.roles.contains(r)) {
        return Err(line.err(format!("operation `{name}` has no role {role}")));
    }
    Ok(OperationDecl {
        line: line.no,
        spec,
        bindings,
    })
}

/// Steps a scenario round by round.
pub struct ScenarioRunner {
    pub scenario: Scenario,
    pub network: Network,
    round: u32,
}

impl ScenarioRunner {
    pub fn new(scenario: Scenario, graph_text: &str) -> Result<Self, BuildError> {
        let network = scenario.build(graph_text)?;
        Ok(ScenarioRunner {
            scenario,
            network,
            round: 0,
        })
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Header and the loaded ratings.
    pub fn preamble(&self) -> Vec<ReportRecord> {
        let arcs: usize = self.network.directory().entities().map(|e| e.manager.store().len()).sum();
        let mut out = vec![ReportRecord::new("scenario")
            .field("seed", self.scenario.seed)
            .field("entities", self.network.directory().len())
            .field("arcs", arcs)
            .field("operations", self.scenario.operations.len())
            .field("rounds", self.scenario.rounds)];
        out.extend(self.ratings());
        out
    }

    /// Every stored arc, in entity then store order.
    pub fn ratings(&self) -> Vec<ReportRecord> {
        let mut out = Vec::new();
        for e in self.network.directory().entities() {
            for arc in e.manager.store().arcs() {
                out.push(
                    ReportRecord::new("rating")
                        .field("round", self.round)
                        .field("trustor", &arc.trustor)
                        .field("trustee", &arc.trustee)
                        .field("context", &arc.context)
                        .field("kind", arc.kind)
                        .field("value", arc.value),
                );
            }
        }
        out
    }

    /// Runs every declared operation once, applies feedback, refreshes
    /// federations when due, and snapshots ratings.
    pub fn run_round(&mut self) -> (Vec<OperationOutcome>, Vec<ReportRecord>) {
        self.round += 1;
        let mut records = vec![ReportRecord::new("round").field("round", self.round)];
        let mut ids = Vec::new();
        for op in &self.scenario.operations {
            match self.network.start_operation(&op.spec, op.bindings.clone()) {
                Ok(id) => ids.push(id),
                Err(e) => records.push(
                    ReportRecord::new("error")
                        .field("round", self.round)
                        .field("line", op.line)
                        .field("message", e),
                ),
            }
        }
        self.network.run_until_quiet();
        let outcomes: Vec<OperationOutcome> =
            ids.iter().filter_map(|id| self.network.outcome(*id)).collect();
        for o in &outcomes {
            records.push(outcome_record(Some(self.round), o));
        }
        records.extend(self.network.experience_feedback(&outcomes));
        if let Some(policy) = self.scenario.federation.clone() {
            if self.refreshed_at(&policy, self.round) {
                records.extend(self.network.refresh_federations(&policy));
            }
        }
        records.extend(self.ratings());
        (outcomes, records)
    }

    /// Runs all remaining rounds; returns outcomes and the full report.
    pub fn run_all(&mut self) -> (Vec<OperationOutcome>, Vec<ReportRecord>) {
        let mut records = self.preamble();
        let mut outcomes = Vec::new();
        while self.round < self.scenario.rounds {
            let (o, r) = self.run_round();
            outcomes.extend(o);
            records.extend(r);
        }
        // Final lists, unless the last round just refreshed them.
        if let Some(policy) = self.scenario.federation.clone() {
            if !self.refreshed_at(&policy, self.round) {
                records.extend(self.network.refresh_federations(&policy));
            }
        }
        (outcomes, records)
    }

    fn refreshed_at(&self, policy: &FederationPolicy, round: u32) -> bool {
        round > 0 && policy.refresh_every > 0 && u64::from(round) % policy.refresh_every == 0
    }
}

/// One summary record for an outcome, tagged with its round when it ran
/// as part of a scenario.
pub fn outcome_record(round: Option<u32>, o: &OperationOutcome) -> ReportRecord {
    let mut rec = ReportRecord::new("outcome");
    if let Some(r) = round {
        rec = rec.field("round", r);
    }
    rec = rec.field("op", o.instance_id).field("spec", &o.spec_name).field("status", o.status);
    if let OperationStatus::TerminatedAtTrustCheck(r) = o.status {
        rec = rec.field("relationship", r);
    }
    if let Some(a) = &o.assertion {
        let attrs: Vec<String> = a.attributes.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        rec = rec.field("issuer", &a.issuer).field("audience", &a.audience).field("attrs", attrs.join(","));
    }
    rec
}
