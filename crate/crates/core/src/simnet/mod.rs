//! Deterministic in-memory network.
//!
//! Every envelope goes through one global FIFO queue. The envelopes a single
//! handler emits are shuffled with the seeded RNG before they are enqueued,
//! and each may be dropped with the configured probability. Handlers run to
//! completion, one delivery per tick, on a single thread.

mod adversary;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::federation::{refresh_federations, FederationPolicy};
use crate::identity_model::{derive_signing_key, Credential, Entity, EntityId, EntityRole, PartialIdentity};
use crate::operations::{
    instantiate, Body, Directory, DuplicateEntity, Effect, FailureReason, InstantiateError, OpPayload,
    OperationInstance, OperationOutcome, OperationSpec, OperationStatus, Role, TranscriptEntry, DEFAULT_MAX_TICKS,
};
use crate::report::{render, ReportRecord};
use crate::trust_core::{
    ExperienceReport, GraphParseError, PenaltyStatus, Tick, TrustContext, TrustError, TrustGraph, UpdateParams,
};
use crate::trust_network::crawl::Crawl;
use crate::trust_network::{answer_query, AggregationStrategy, Basis, DEFAULT_MAX_DEPTH};

pub use adversary::{apply_adversary, AdversaryKind};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub seed: u64,
    /// Probability in [0, 1] that an envelope is silently lost.
    pub drop_probability: f64,
    /// Per-instance liveness bound, in ticks.
    pub max_ticks: Tick,
    pub adversaries: Vec<(EntityId, AdversaryKind)>,
    pub update: UpdateParams,
    pub max_depth: usize,
    pub strategy: AggregationStrategy,
}

impl NetworkConfig {
    pub fn new(seed: u64) -> Self {
        NetworkConfig {
            seed,
            drop_probability: 0.0,
            max_ticks: DEFAULT_MAX_TICKS,
            adversaries: Vec::new(),
            update: UpdateParams::default(),
            max_depth: DEFAULT_MAX_DEPTH,
            strategy: AggregationStrategy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Operation { step: usize, body: OpPayload },
    ReferralQuery {
        crawl: u64,
        trustee: EntityId,
        context: TrustContext,
    },
    /// Wire-form referral lines.
    ReferralAnswer { crawl: u64, lines: Vec<Vec<u8>> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageEnvelope {
    pub seq: u64,
    pub from: EntityId,
    pub to: EntityId,
    pub instance_id: Option<u64>,
    pub payload: Payload,
    pub sent_at: Tick,
}

/// Ordered records of everything the network did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<ReportRecord>,
}

impl EventLog {
    pub fn records(&self) -> &[ReportRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn render(&self) -> String {
        render(&self.records)
    }

    fn push(&mut self, record: ReportRecord) {
        self.records.push(record);
    }
}

/// An entity declared by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityDecl {
    pub id: EntityId,
    pub roles: BTreeSet<EntityRole>,
}

/// A subject registered at an IdP, and the secret the subject presents.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityDecl {
    pub subject: EntityId,
    pub idp: EntityId,
    pub secret: String,
    pub presents: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("graph {0}")]
    Parse(#[from] GraphParseError),
    #[error(transparent)]
    Duplicate(#[from] DuplicateEntity),
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("{0} is not an identity provider")]
    NotAnIdP(EntityId),
    #[error("drop probability {0} outside [0, 1]")]
    DropProbability(f64),
    #[error(transparent)]
    Trust(#[from] TrustError),
}

#[derive(Debug, Clone)]
struct CrawlTask {
    instance: u64,
    step: usize,
    checker: EntityId,
    crawl: Crawl,
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    dir: Directory,
    adversaries: BTreeMap<EntityId, AdversaryKind>,
    ground_truth: BTreeMap<(EntityId, EntityId), BTreeMap<String, String>>,
    queue: VecDeque<MessageEnvelope>,
    rng: ChaCha8Rng,
    tick: Tick,
    next_seq: u64,
    next_instance: u64,
    next_crawl: u64,
    instances: BTreeMap<u64, OperationInstance>,
    crawls: BTreeMap<u64, CrawlTask>,
    log: EventLog,
    finished: BTreeSet<u64>,
    tap: Option<Vec<MessageEnvelope>>,
}

/// Builds a network: one node per declared entity, trust stores loaded from
/// the graph text, keys derived from the seed.
pub fn build_network(
    config: NetworkConfig,
    graph_text: &str,
    entities: &[EntityDecl],
    identities: &[IdentityDecl],
) -> Result<Network, BuildError> {
    if !(0.0..=1.0).contains(&config.drop_probability) {
        return Err(BuildError::DropProbability(config.drop_probability));
    }
    let mut dir = Directory::new();
    for decl in entities {
        let mut entity = Entity::new(
            decl.id.clone(),
            decl.roles.iter().copied(),
            derive_signing_key(config.seed, &decl.id),
        );
        *entity.manager.store_mut() = crate::trust_core::TrustStore::with_params(decl.id.clone(), config.update);
        entity.manager.max_depth = config.max_depth;
        entity.manager.strategy = config.strategy;
        dir.insert(entity)?;
    }
    let known: BTreeSet<EntityId> = dir.ids().cloned().collect();
    let graph = TrustGraph::parse_checked(graph_text, &known)?;
    for arc in graph.arcs() {
        let owner = dir.get_mut(&arc.trustor).expect("checked parse");
        owner.manager.store_mut().record_arc(arc.clone())?;
    }
    let mut ground_truth = BTreeMap::new();
    for decl in identities {
        for who in [&decl.subject, &decl.idp] {
            if !dir.contains(who) {
                return Err(BuildError::UnknownEntity(who.clone()));
            }
        }
        let idp = dir.get_mut(&decl.idp).expect("checked above");
        if !idp.is_idp() {
            return Err(BuildError::NotAnIdP(decl.idp.clone()));
        }
        idp.register_identity(PartialIdentity {
            owner: decl.subject.clone(),
            attributes: decl.attributes.clone(),
            credential: Credential::shared_secret(decl.secret.as_bytes()),
        });
        let subject = dir.get_mut(&decl.subject).expect("checked above");
        subject
            .wallet
            .insert(decl.idp.clone(), Credential::shared_secret(decl.presents.as_bytes()));
        ground_truth.insert((decl.idp.clone(), decl.subject.clone()), decl.attributes.clone());
    }
    let mut adversaries = BTreeMap::new();
    for (who, kind) in &config.adversaries {
        if !dir.contains(who) {
            return Err(BuildError::UnknownEntity(who.clone()));
        }
        adversaries.insert(who.clone(), *kind);
    }
    Ok(Network {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        config,
        dir,
        adversaries,
        ground_truth,
        queue: VecDeque::new(),
        tick: 0,
        next_seq: 0,
        next_instance: 1,
        next_crawl: 1,
        instances: BTreeMap::new(),
        crawls: BTreeMap::new(),
        log: EventLog::default(),
        finished: BTreeSet::new(),
        tap: None,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn directory_mut(&mut self) -> &mut Directory {
        &mut self.dir
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn is_quiet(&self) -> bool {
        self.queue.is_empty()
    }

    /// Starts recording every delivered envelope.
    pub fn enable_tap(&mut self) {
        self.tap = Some(Vec::new());
    }

    pub fn take_tap(&mut self) -> Vec<MessageEnvelope> {
        self.tap.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn outcome(&self, instance: u64) -> Option<OperationOutcome> {
        self.instances.get(&instance).map(OperationInstance::outcome)
    }

    /// Registers and starts an operation; returns its instance id.
    pub fn start_operation(
        &mut self,
        spec: &OperationSpec,
        bindings: BTreeMap<Role, EntityId>,
    ) -> Result<u64, InstantiateError> {
        for entity in bindings.values() {
            if !self.dir.contains(entity) {
                return Err(InstantiateError::UnknownEntity(entity.clone()));
            }
        }
        let id = self.next_instance;
        let mut nonce = vec![0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        let instance = instantiate(spec, bindings, id, nonce, self.tick, self.config.max_ticks)?;
        self.next_instance += 1;
        self.launch(instance);
        Ok(id)
    }

    /// Runs an already instantiated operation to a terminal status.
    pub fn run_instance(&mut self, instance: OperationInstance) -> OperationOutcome {
        let id = instance.id();
        self.next_instance = self.next_instance.max(id + 1);
        self.launch(instance);
        self.run_until_quiet();
        self.instances[&id].outcome()
    }

    fn launch(&mut self, mut instance: OperationInstance) {
        let id = instance.id();
        let mut record = ReportRecord::new("op-start")
            .field("op", id)
            .field("tick", self.tick)
            .field("spec", &instance.spec().name);
        for (role, entity) in instance.bindings() {
            record = record.field(&role.to_string(), entity);
        }
        self.log.push(record);
        let effects = instance.start(&mut self.dir, self.tick);
        self.instances.insert(id, instance);
        self.after_handler(id, 0);
        self.apply_effects(id, effects);
    }

    /// Processes queued envelopes until none remain. Pending crawls are then
    /// finished with what they have, and instances still running time out.
    /// Returns the records logged during this call.
    pub fn run_until_quiet(&mut self) -> EventLog {
        let start = self.log.len();
        loop {
            if let Some(env) = self.queue.pop_front() {
                self.deliver(env);
                continue;
            }
            if let Some(&cid) = self.crawls.keys().next() {
                self.complete_crawl(cid);
                continue;
            }
            let running: Vec<u64> = self
                .instances
                .iter()
                .filter(|(_, i)| !i.status().is_terminal())
                .map(|(id, _)| *id)
                .collect();
            for id in running {
                self.time_out(id);
            }
            break;
        }
        EventLog {
            records: self.log.records[start..].to_vec(),
        }
    }

    fn time_out(&mut self, id: u64) {
        let before = self.instances[&id].transcript().len();
        self.instances.get_mut(&id).expect("known instance").time_out();
        self.after_handler(id, before);
    }

    fn deliver(&mut self, env: MessageEnvelope) {
        self.tick += 1;
        self.log.push(ReportRecord::new("deliver").field("seq", env.seq).field("tick", self.tick));
        if let Some(tap) = self.tap.as_mut() {
            tap.push(env.clone());
        }
        match &env.payload {
            Payload::Operation { step, body } => {
                let id = env.instance_id.expect("operation envelopes carry an instance id");
                if let Some(instance) = self.instances.get_mut(&id) {
                    let before = instance.transcript().len();
                    let effects = instance.on_message(&env.from, &env.to, *step, body, &mut self.dir, self.tick);
                    self.after_handler(id, before);
                    self.apply_effects(id, effects);
                }
            }
            Payload::ReferralQuery { crawl, trustee, context } => {
                let Some(responder) = self.dir.get(&env.to) else {
                    return;
                };
                let lines = answer_query(responder.manager.store(), trustee, context, responder.signing_key())
                    .iter()
                    .map(|r| r.encode().into_bytes())
                    .collect();
                let reply = self.envelope(
                    env.to.clone(),
                    env.from.clone(),
                    env.instance_id,
                    Payload::ReferralAnswer { crawl: *crawl, lines },
                );
                self.send_batch(vec![reply]);
            }
            Payload::ReferralAnswer { crawl, lines } => {
                let Some(task) = self.crawls.get_mut(crawl) else {
                    return;
                };
                if task.checker != env.to {
                    return;
                }
                let queries = task.crawl.on_answer(&env.from, lines, self.dir.keys());
                let (trustee, context, done) =
                    (task.crawl.trustee().clone(), task.crawl.context().clone(), task.crawl.is_done());
                let checker = task.checker.clone();
                let instance = task.instance;
                let batch = queries
                    .into_iter()
                    .map(|q| {
                        self.envelope(
                            checker.clone(),
                            q,
                            Some(instance),
                            Payload::ReferralQuery {
                                crawl: *crawl,
                                trustee: trustee.clone(),
                                context: context.clone(),
                            },
                        )
                    })
                    .collect();
                self.send_batch(batch);
                if done {
                    self.complete_crawl(*crawl);
                }
            }
        }
        self.enforce_deadlines();
    }

    fn enforce_deadlines(&mut self) {
        let late: Vec<u64> = self
            .instances
            .iter()
            .filter(|(_, i)| !i.status().is_terminal() && self.tick > i.deadline())
            .map(|(id, _)| *id)
            .collect();
        for id in late {
            self.time_out(id);
        }
    }

    fn apply_effects(&mut self, instance: u64, effects: Vec<Effect>) {
        let mut batch = Vec::new();
        for effect in effects {
            match effect {
                Effect::Send { from, to, step, payload } => {
                    batch.push(self.envelope(from, to, Some(instance), Payload::Operation { step, body: payload }));
                }
                Effect::Gather {
                    step,
                    checker,
                    subject,
                    context,
                } => {
                    let Some(entity) = self.dir.get(&checker) else {
                        continue;
                    };
                    let depth = entity.manager.max_depth;
                    let (crawl, queries) = Crawl::start(&entity.manager, subject.clone(), context.clone(), depth);
                    let cid = self.next_crawl;
                    self.next_crawl += 1;
                    self.log.push(
                        ReportRecord::new("crawl-start")
                            .field("crawl", cid)
                            .field("op", instance)
                            .field("checker", &checker)
                            .field("subject", &subject)
                            .field("context", &context)
                            .field("queries", queries.len()),
                    );
                    self.crawls.insert(
                        cid,
                        CrawlTask {
                            instance,
                            step,
                            checker: checker.clone(),
                            crawl,
                        },
                    );
                    for q in queries {
                        batch.push(self.envelope(
                            checker.clone(),
                            q,
                            Some(instance),
                            Payload::ReferralQuery {
                                crawl: cid,
                                trustee: subject.clone(),
                                context: context.clone(),
                            },
                        ));
                    }
                    if self.crawls[&cid].crawl.is_done() {
                        self.send_batch(std::mem::take(&mut batch));
                        self.complete_crawl(cid);
                    }
                }
            }
        }
        self.send_batch(batch);
    }

    /// Replaces the checker's referral cache with what the crawl verified and
    /// resumes the waiting check.
    fn complete_crawl(&mut self, cid: u64) {
        let Some(task) = self.crawls.remove(&cid) else {
            return;
        };
        let result = task.crawl.finish();
        for (from, reason) in &result.rejected {
            self.log.push(
                ReportRecord::new("reject")
                    .field("crawl", cid)
                    .field("from", from)
                    .field("reason", reason),
            );
        }
        let mut accepted = 0;
        if let Some((entity, keys)) = self.dir.entity_and_keys(&task.checker) {
            entity.manager.clear_referrals();
            for r in result.referrals {
                if entity.manager.accept_referral(r, keys).is_ok() {
                    accepted += 1;
                }
            }
        }
        self.log.push(
            ReportRecord::new("crawl-done")
                .field("crawl", cid)
                .field("tick", self.tick)
                .field("referrals", accepted)
                .field("rejected", result.rejected.len())
                .field("unanswered", result.unanswered.len()),
        );
        if let Some(instance) = self.instances.get_mut(&task.instance) {
            let before = instance.transcript().len();
            let effects = instance.on_referrals_ready(task.step, &mut self.dir, self.tick);
            self.after_handler(task.instance, before);
            self.apply_effects(task.instance, effects);
        }
    }

    fn envelope(&mut self, from: EntityId, to: EntityId, instance_id: Option<u64>, payload: Payload) -> MessageEnvelope {
        let seq = self.next_seq;
        self.next_seq += 1;
        MessageEnvelope {
            seq,
            from,
            to,
            instance_id,
            payload,
            sent_at: self.tick,
        }
    }

    /// Shuffles one handler's output, lets adversaries rewrite their own
    /// envelopes, then enqueues or drops each.
    fn send_batch(&mut self, mut batch: Vec<MessageEnvelope>) {
        batch.shuffle(&mut self.rng);
        for mut env in batch {
            if let Some(kind) = self.adversaries.get(&env.from).copied() {
                let key = self.dir.get(&env.from).expect("adversary is an entity").signing_key().clone();
                if apply_adversary(kind, &env.from.clone(), &key, &mut env) {
                    self.log.push(
                        ReportRecord::new("adversary")
                            .field("seq", env.seq)
                            .field("node", &env.from)
                            .field("kind", kind),
                    );
                }
            }
            self.log.push(send_record(&env));
            if self.config.drop_probability > 0.0 && self.rng.gen_bool(self.config.drop_probability) {
                self.log.push(ReportRecord::new("drop").field("seq", env.seq));
                continue;
            }
            self.queue.push_back(env);
        }
    }

    fn after_handler(&mut self, id: u64, before: usize) {
        let instance = &self.instances[&id];
        for entry in &instance.transcript()[before..] {
            self.log.push(transcript_record(id, entry));
        }
        let status = *instance.status();
        if status.is_terminal() && self.finished.insert(id) {
            self.log.push(
                ReportRecord::new("status")
                    .field("op", id)
                    .field("tick", self.tick)
                    .field("status", status),
            );
        }
    }

    /// Applies each participant's feedback rules to finished operations.
    ///
    /// The relying IdP rates the user's IdP on the assertion it received:
    /// 1.0 if it verified and every attribute matches what the subject
    /// registered, otherwise 0.0. The user's IdP rates the relying IdP 1.0
    /// after releasing an assertion to it. A bad outcome behind a check that
    /// passed on transitive evidence penalises every referee on the
    /// contributing paths.
    pub fn experience_feedback(&mut self, outcomes: &[OperationOutcome]) -> Vec<ReportRecord> {
        let mut records = Vec::new();
        for outcome in outcomes {
            let (Some(rp), Some(idp), Some(user)) = (
                outcome.bindings.get(&Role::SpIdp),
                outcome.bindings.get(&Role::UserIdp),
                outcome.bindings.get(&Role::User),
            ) else {
                continue;
            };
            if rp == idp {
                continue;
            }
            let verdict = match (&outcome.assertion, outcome.status) {
                (Some(a), OperationStatus::Succeeded) => {
                    let truth = self.ground_truth.get(&(idp.clone(), user.clone()));
                    let honest = a
                        .attributes
                        .iter()
                        .all(|(k, v)| truth.and_then(|t| t.get(k)) == Some(v));
                    Some(if honest { 1.0 } else { 0.0 })
                }
                (_, OperationStatus::Failed(FailureReason::AssertionRejected)) => Some(0.0),
                _ => None,
            };
            if let Some(score) = verdict {
                let at = self.tick;
                records.extend(self.report(outcome, rp, idp, TrustContext::MakeGoodAssertions, score, at));
                if score < 0.5 {
                    let referees: Vec<EntityId> = outcome
                        .checks
                        .iter()
                        .filter(|c| &c.checker == rp && &c.subject == idp && matches!(c.basis, Basis::Transitive { .. }))
                        .flat_map(|c| c.referees.clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    for referee in referees {
                        let store = self.dir.get_mut(rp).expect("bound entity").manager.store_mut();
                        let status = store.penalize_referee(&referee, &TrustContext::MakeGoodAssertions, at);
                        let mut rec = ReportRecord::new("penalty")
                            .field("op", outcome.instance_id)
                            .field("by", rp)
                            .field("referee", &referee)
                            .field("context", TrustContext::MakeGoodAssertions);
                        rec = match status {
                            PenaltyStatus::Applied { before, after } => rec.field("before", before).field("after", after),
                            PenaltyStatus::NoReferralArc => rec.field("status", "no-referral-arc"),
                        };
                        self.log.push(rec.clone());
                        records.push(rec);
                    }
                }
            }
            if outcome.issued {
                let at = self.tick;
                records.extend(self.report(outcome, idp, rp, TrustContext::MaintainPrivacy, 1.0, at));
            }
        }
        records
    }

    fn report(
        &mut self,
        outcome: &OperationOutcome,
        by: &EntityId,
        about: &EntityId,
        context: TrustContext,
        score: f64,
        at: Tick,
    ) -> Option<ReportRecord> {
        let store = self.dir.get_mut(by)?.manager.store_mut();
        let value = store
            .apply_experience(&ExperienceReport {
                trustee: about.clone(),
                context: context.clone(),
                outcome: score,
                source_operation: Some(outcome.instance_id),
                at,
            })
            .ok()?;
        let rec = ReportRecord::new("experience")
            .field("op", outcome.instance_id)
            .field("by", by)
            .field("about", about)
            .field("context", context)
            .field("outcome", score)
            .field("value", value);
        self.log.push(rec.clone());
        Some(rec)
    }

    /// Recomputes the federation list of every IdP and SP.
    pub fn refresh_federations(&mut self, policy: &FederationPolicy) -> Vec<ReportRecord> {
        let ids: Vec<EntityId> = self.dir.ids().cloned().collect();
        let now = self.tick;
        let mut records = Vec::new();
        for entity in self.dir.entities_mut() {
            if !(entity.roles.contains(&EntityRole::IdP) || entity.roles.contains(&EntityRole::Sp)) {
                continue;
            }
            let list = refresh_federations(&entity.manager, policy, &ids, now);
            let members: Vec<String> = list.members.keys().map(|m| m.to_string()).collect();
            records.push(
                ReportRecord::new("federation")
                    .field("owner", &entity.id)
                    .field("context", &policy.context)
                    .field("threshold", policy.threshold)
                    .field("tick", now)
                    .field("members", members.join(",")),
            );
            entity.federation = Some(list);
        }
        for r in &records {
            self.log.push(r.clone());
        }
        records
    }
}

fn send_record(env: &MessageEnvelope) -> ReportRecord {
    let mut r = ReportRecord::new("send")
        .field("seq", env.seq)
        .field("tick", env.sent_at)
        .field("from", &env.from)
        .field("to", &env.to);
    if let Some(op) = env.instance_id {
        r = r.field("op", op);
    }
    match &env.payload {
        Payload::Operation { step, body } => {
            r = r.field("step", step);
            match body {
                OpPayload::Failure => r.field("payload", "failure"),
                OpPayload::Protocol { kind, body } => {
                    r = r.field("payload", kind);
                    match body {
                        Body::Empty => r,
                        // The secret itself is never logged.
                        Body::Credential { subject, .. } => r.field("subject", subject).field("credential", "redacted"),
                        Body::Assertion(a) => {
                            let attrs: Vec<String> = a.attributes.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                            r.field("issuer", &a.issuer)
                                .field("subject", &a.subject)
                                .field("audience", &a.audience)
                                .field("attrs", attrs.join(","))
                                .field("sig", hex::encode(&a.signature[..a.signature.len().min(8)]))
                        }
                    }
                }
            }
        }
        Payload::ReferralQuery { crawl, trustee, context } => r
            .field("crawl", crawl)
            .field("payload", "referral-query")
            .field("trustee", trustee)
            .field("context", context),
        Payload::ReferralAnswer { crawl, lines } => r
            .field("crawl", crawl)
            .field("payload", "referral-answer")
            .field("lines", lines.len()),
    }
}

fn transcript_record(op: u64, entry: &TranscriptEntry) -> ReportRecord {
    match entry {
        TranscriptEntry::Message {
            step,
            from,
            to,
            kind,
            label,
            at,
        } => {
            let mut r = ReportRecord::new("message")
                .field("op", op)
                .field("step", step)
                .field("tick", at)
                .field("from", from)
                .field("to", to);
            r = match kind {
                Some(k) => r.field("payload", k),
                None => r.field("payload", "failure"),
            };
            match label {
                Some(l) => r.field("connection", l),
                None => r,
            }
        }
        TranscriptEntry::Check(c) => ReportRecord::new("check")
            .field("op", op)
            .field("step", c.step)
            .field("relationship", c.relationship)
            .field("checker", &c.checker)
            .field("subject", &c.subject)
            .field("context", &c.context)
            .field("value", c.value)
            .field("basis", if c.internal { "internal".to_string() } else { c.basis.to_string() })
            .field("threshold", c.threshold)
            .field("passed", c.passed),
        TranscriptEntry::Action { step, entity, action, ok } => ReportRecord::new("action")
            .field("op", op)
            .field("step", step)
            .field("entity", entity)
            .field("action", action)
            .field("ok", ok),
    }
}
