use std::collections::BTreeMap;
use std::fmt;

use crate::identity_model::{
    authenticate_local, create_assertion, verify_assertion, Credential, EntityId, IdentityAssertion,
};
use crate::trust_core::{Tick, TrustContext, TrustValue};
use crate::trust_network::Basis;

use super::{Body, Directory, LocalAction, OpPayload, OperationSpec, PayloadKind, RelationshipId, Role, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureReason {
    ProtocolViolation,
    Timeout,
    AuthenticationFailed,
    AssertionRejected,
    IssuanceFailed,
    MissingAssertion,
    /// Every step ran without producing a verified assertion.
    Unverified,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::ProtocolViolation => "protocol-violation",
            FailureReason::Timeout => "timeout",
            FailureReason::AuthenticationFailed => "authentication-failed",
            FailureReason::AssertionRejected => "assertion-rejected",
            FailureReason::IssuanceFailed => "issuance-failed",
            FailureReason::MissingAssertion => "missing-assertion",
            FailureReason::Unverified => "unverified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperationStatus {
    Running,
    Succeeded,
    TerminatedAtTrustCheck(RelationshipId),
    Failed(FailureReason),
}

impl OperationStatus {
    pub fn is_terminal(&self) -> bool {
        *self != OperationStatus::Running
    }
}

impl fmt::Display for OperationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperationStatus::Running => f.write_str("running"),
            OperationStatus::Succeeded => f.write_str("succeeded"),
            OperationStatus::TerminatedAtTrustCheck(r) => write!(f, "terminated-at-check-{r}"),
            OperationStatus::Failed(reason) => write!(f, "failed-{reason}"),
        }
    }
}

/// Result of one trust check, kept in the checker's local transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub step: usize,
    pub relationship: RelationshipId,
    pub checker: EntityId,
    pub subject: EntityId,
    pub context: TrustContext,
    pub value: TrustValue,
    pub basis: Basis,
    pub threshold: TrustValue,
    /// Checker and subject are the same entity.
    pub internal: bool,
    pub passed: bool,
    /// Intermediates on the paths that produced a transitive rating.
    pub referees: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TranscriptEntry {
    Message {
        step: usize,
        from: EntityId,
        to: EntityId,
        /// Payload kind, or `None` for a relayed failure.
        kind: Option<PayloadKind>,
        label: Option<String>,
        at: Tick,
    },
    Check(CheckRecord),
    Action {
        step: usize,
        entity: EntityId,
        action: String,
        ok: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Send {
        from: EntityId,
        to: EntityId,
        step: usize,
        payload: OpPayload,
    },
    /// The checker needs referrals about `subject` before the check at `step`
    /// can be evaluated; resume with [`OperationInstance::on_referrals_ready`].
    Gather {
        step: usize,
        checker: EntityId,
        subject: EntityId,
        context: TrustContext,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationOutcome {
    pub instance_id: u64,
    pub spec_name: String,
    pub bindings: BTreeMap<Role, EntityId>,
    pub status: OperationStatus,
    /// Present iff the relying party verified it.
    pub assertion: Option<IdentityAssertion>,
    pub issued: bool,
    pub checks: Vec<CheckRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub terminal_step: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Awaiting {
    Nothing,
    Message(usize),
    Referrals(usize),
}

#[derive(Debug, Clone)]
pub struct OperationInstance {
    id: u64,
    spec: OperationSpec,
    bindings: BTreeMap<Role, EntityId>,
    cursor: usize,
    status: OperationStatus,
    nonce: Vec<u8>,
    deadline: Tick,
    awaiting: Awaiting,
    gathered_for: Option<usize>,
    /// Entities that held control, in order.
    trail: Vec<EntityId>,
    relay: Vec<EntityId>,
    relay_started: bool,
    presented: Option<(EntityId, Option<Credential>)>,
    issued: Option<IdentityAssertion>,
    received: BTreeMap<Role, IdentityAssertion>,
    verified: Option<IdentityAssertion>,
    checks: Vec<CheckRecord>,
    transcript: Vec<TranscriptEntry>,
    terminal_step: Option<usize>,
}

impl OperationInstance {
    pub(super) fn new(
        id: u64,
        spec: OperationSpec,
        bindings: BTreeMap<Role, EntityId>,
        nonce: Vec<u8>,
        now: Tick,
        max_ticks: Tick,
    ) -> Self {
        OperationInstance {
            id,
            spec,
            bindings,
            cursor: 0,
            status: OperationStatus::Running,
            nonce,
            deadline: now.saturating_add(max_ticks),
            awaiting: Awaiting::Nothing,
            gathered_for: None,
            trail: Vec::new(),
            relay: Vec::new(),
            relay_started: false,
            presented: None,
            issued: None,
            received: BTreeMap::new(),
            verified: None,
            checks: Vec::new(),
            transcript: Vec::new(),
            terminal_step: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn spec(&self) -> &OperationSpec {
        &self.spec
    }

    pub fn bindings(&self) -> &BTreeMap<Role, EntityId> {
        &self.bindings
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn status(&self) -> &OperationStatus {
        &self.status
    }

    pub fn deadline(&self) -> Tick {
        self.deadline
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn checks(&self) -> &[CheckRecord] {
        &self.checks
    }

    pub fn initiator(&self) -> &EntityId {
        self.bound(self.spec.steps[0].actor())
    }

    fn bound(&self, role: Role) -> &EntityId {
        &self.bindings[&role]
    }

    pub fn outcome(&self) -> OperationOutcome {
        OperationOutcome {
            instance_id: self.id,
            spec_name: self.spec.name.clone(),
            bindings: self.bindings.clone(),
            status: self.status,
            assertion: self.verified.clone(),
            issued: self.issued.is_some(),
            checks: self.checks.clone(),
            transcript: self.transcript.clone(),
            terminal_step: self.terminal_step,
        }
    }

    /// Runs the steps the initiator can perform before the first send.
    pub fn start(&mut self, dir: &mut Directory, now: Tick) -> Vec<Effect> {
        if self.trail.is_empty() && !self.status.is_terminal() {
            self.trail.push(self.initiator().clone());
        }
        self.advance(dir, now)
    }

    /// Handles a delivered envelope addressed to this instance.
    pub fn on_message(
        &mut self,
        from: &EntityId,
        to: &EntityId,
        step: usize,
        payload: &OpPayload,
        dir: &mut Directory,
        now: Tick,
    ) -> Vec<Effect> {
        match payload {
            OpPayload::Failure => self.on_failure(from, to, step, now),
            OpPayload::Protocol { kind, body } => {
                if self.status.is_terminal() {
                    return Vec::new();
                }
                let expected = match (self.awaiting, self.spec.steps.get(step)) {
                    (Awaiting::Message(s), Some(Step::Message { from: f, to: t, payload: k, .. })) if s == step => {
                        self.bound(*f) == from && self.bound(*t) == to && k == kind
                    }
                    _ => false,
                };
                if !expected {
                    self.terminate(OperationStatus::Failed(FailureReason::ProtocolViolation), false);
                    return Vec::new();
                }
                self.awaiting = Awaiting::Nothing;
                let label = match &self.spec.steps[step] {
                    Step::Message { label, .. } => label.clone(),
                    _ => None,
                };
                self.transcript.push(TranscriptEntry::Message {
                    step,
                    from: from.clone(),
                    to: to.clone(),
                    kind: Some(*kind),
                    label,
                    at: now,
                });
                self.trail.push(to.clone());
                self.accept_body(step, body.clone());
                self.cursor = step + 1;
                self.advance(dir, now)
            }
        }
    }

    /// Resumes a trust check after referral gathering finished.
    pub fn on_referrals_ready(&mut self, step: usize, dir: &mut Directory, now: Tick) -> Vec<Effect> {
        if self.status.is_terminal() || self.awaiting != Awaiting::Referrals(step) {
            return Vec::new();
        }
        self.awaiting = Awaiting::Nothing;
        self.gathered_for = Some(step);
        self.advance(dir, now)
    }

    /// Fails a running instance with `Timeout`.
    pub fn time_out(&mut self) {
        if !self.status.is_terminal() {
            self.terminate(OperationStatus::Failed(FailureReason::Timeout), false);
        }
    }

    fn accept_body(&mut self, step: usize, body: Body) {
        let Step::Message { to, .. } = &self.spec.steps[step] else {
            return;
        };
        match body {
            Body::Empty => {}
            Body::Credential { subject, credential } => self.presented = Some((subject, credential)),
            Body::Assertion(a) => {
                self.received.insert(*to, a);
            }
        }
    }

    fn advance(&mut self, dir: &mut Directory, now: Tick) -> Vec<Effect> {
        let mut effects = Vec::new();
        while !self.status.is_terminal() && self.awaiting == Awaiting::Nothing {
            let Some(step) = self.spec.steps.get(self.cursor).cloned() else {
                let status = if self.verified.is_some() {
                    OperationStatus::Succeeded
                } else {
                    OperationStatus::Failed(FailureReason::Unverified)
                };
                self.status = status;
                self.terminal_step = Some(self.cursor.saturating_sub(1));
                break;
            };
            match step {
                Step::Message { from, to, payload, .. } => {
                    let body = self.body_for(from, to, payload, dir);
                    let (f, t) = (self.bound(from).clone(), self.bound(to).clone());
                    if f == t {
                        // Co-located roles: the hand-off is internal.
                        self.accept_body(self.cursor, body);
                        self.cursor += 1;
                    } else {
                        self.awaiting = Awaiting::Message(self.cursor);
                        effects.push(Effect::Send {
                            from: f,
                            to: t,
                            step: self.cursor,
                            payload: OpPayload::Protocol { kind: payload, body },
                        });
                    }
                }
                Step::TrustCheck {
                    checker,
                    subject,
                    relationship,
                    threshold,
                } => {
                    if let Some(effect) = self.trust_check(checker, subject, relationship, threshold, dir) {
                        effects.push(effect);
                    }
                }
                Step::LocalAction { role, action } => self.local_action(role, &action, dir, now),
            }
        }
        effects.extend(self.relay_first_hop());
        effects
    }

    fn body_for(&self, from: Role, to: Role, kind: PayloadKind, dir: &Directory) -> Body {
        if kind.carries_credential() {
            let sender = self.bound(from);
            let credential = dir.get(sender).and_then(|e| e.wallet.get(self.bound(to)).cloned());
            Body::Credential {
                subject: sender.clone(),
                credential,
            }
        } else if kind.carries_assertion() {
            match &self.issued {
                Some(a) => Body::Assertion(a.clone()),
                None => Body::Empty,
            }
        } else {
            Body::Empty
        }
    }

    fn trust_check(
        &mut self,
        checker: Role,
        subject: Role,
        relationship: RelationshipId,
        threshold: TrustValue,
        dir: &Directory,
    ) -> Option<Effect> {
        let step = self.cursor;
        let (c, s) = (self.bound(checker).clone(), self.bound(subject).clone());
        let context = relationship.context();
        let mut record = CheckRecord {
            step,
            relationship,
            checker: c.clone(),
            subject: s.clone(),
            context: context.clone(),
            value: TrustValue::ONE,
            basis: Basis::Direct,
            threshold,
            internal: c == s,
            passed: true,
            referees: Vec::new(),
        };
        if !record.internal {
            let Some(manager) = dir.get(&c).map(|e| &e.manager) else {
                self.terminate(OperationStatus::Failed(FailureReason::ProtocolViolation), false);
                return None;
            };
            if !manager.has_direct(&s, &context) && self.gathered_for != Some(step) {
                self.awaiting = Awaiting::Referrals(step);
                return Some(Effect::Gather {
                    step,
                    checker: c,
                    subject: s,
                    context,
                });
            }
            let eval = manager.evaluate_detailed(&s, &context);
            record.value = eval.rating.value;
            record.basis = eval.rating.basis;
            record.passed = eval.rating.meets(threshold);
            record.referees = eval.contributing_referees();
        }
        let passed = record.passed;
        self.checks.push(record.clone());
        self.transcript.push(TranscriptEntry::Check(record));
        if passed {
            self.cursor += 1;
        } else {
            self.terminate(OperationStatus::TerminatedAtTrustCheck(relationship), true);
        }
        None
    }

    fn local_action(&mut self, role: Role, action: &LocalAction, dir: &mut Directory, now: Tick) {
        let actor = self.bound(role).clone();
        let result = match action {
            LocalAction::Authenticate => match (&self.presented, dir.get(&actor)) {
                (Some((subject, Some(cred))), Some(entity)) if authenticate_local(entity, subject, cred) => Ok(()),
                _ => Err(FailureReason::AuthenticationFailed),
            },
            LocalAction::IssueAssertion { subject, audience } => {
                let (subject, audience) = (self.bound(*subject).clone(), self.bound(*audience).clone());
                match dir.get(&actor) {
                    Some(issuer) => create_assertion(
                        issuer,
                        &subject,
                        &audience,
                        &self.spec.requested_attributes,
                        &self.nonce,
                        now,
                    )
                    .map(|a| {
                        self.issued = Some(a);
                    })
                    .map_err(|_| FailureReason::IssuanceFailed),
                    None => Err(FailureReason::IssuanceFailed),
                }
            }
            LocalAction::VerifyAssertion => self.verify(role, &actor, dir),
        };
        self.transcript.push(TranscriptEntry::Action {
            step: self.cursor,
            entity: actor,
            action: action.to_string(),
            ok: result.is_ok(),
        });
        match result {
            Ok(()) => self.cursor += 1,
            Err(reason) => self.terminate(OperationStatus::Failed(reason), true),
        }
    }

    fn verify(&mut self, role: Role, actor: &EntityId, dir: &mut Directory) -> Result<(), FailureReason> {
        let assertion = match self.received.get(&role).or(self.issued.as_ref()) {
            Some(a) => a.clone(),
            None => return Err(FailureReason::MissingAssertion),
        };
        // The assertion must come from the role that issued in this
        // instance and be about the subject it was asked for.
        let expected = self.spec.steps[..self.cursor].iter().rev().find_map(|s| match s {
            Step::LocalAction {
                role,
                action: LocalAction::IssueAssertion { subject, .. },
            } => Some((self.bound(*role).clone(), self.bound(*subject).clone())),
            _ => None,
        });
        if expected != Some((assertion.issuer.clone(), assertion.subject.clone())) || assertion.nonce != self.nonce {
            return Err(FailureReason::AssertionRejected);
        }
        let (entity, keys) = dir.entity_and_keys(actor).ok_or(FailureReason::AssertionRejected)?;
        verify_assertion(&assertion, actor, keys, &mut entity.replay_cache)
            .map_err(|_| FailureReason::AssertionRejected)?;
        self.verified = Some(assertion);
        Ok(())
    }

    fn terminate(&mut self, status: OperationStatus, relay: bool) {
        self.status = status;
        self.awaiting = Awaiting::Nothing;
        self.terminal_step = Some(self.cursor);
        if relay {
            self.relay = self.relay_route();
        }
    }

    /// Route back from the current holder to the initiator, jumping to the
    /// first time each entity received control so loops are not retraced.
    fn relay_route(&self) -> Vec<EntityId> {
        let mut route = Vec::new();
        let Some(mut at) = self.trail.len().checked_sub(1) else {
            return route;
        };
        loop {
            let first = self.trail.iter().position(|e| e == &self.trail[at]).expect("entity is on trail");
            route.push(self.trail[first].clone());
            if first == 0 {
                break;
            }
            at = first - 1;
        }
        route
    }

    fn relay_first_hop(&mut self) -> Vec<Effect> {
        if self.relay_started || self.relay.len() < 2 {
            return Vec::new();
        }
        self.relay_started = true;
        self.relay_hop(0).into_iter().collect()
    }

    fn relay_hop(&mut self, index: usize) -> Option<Effect> {
        let from = self.relay.get(index)?.clone();
        let to = self.relay.get(index + 1)?.clone();
        let step = self.terminal_step.unwrap_or(self.cursor);
        Some(Effect::Send {
            from,
            to,
            step,
            payload: OpPayload::Failure,
        })
    }

    fn on_failure(&mut self, from: &EntityId, to: &EntityId, step: usize, now: Tick) -> Vec<Effect> {
        let Some(i) = self.relay.windows(2).position(|w| &w[0] == from && &w[1] == to) else {
            return Vec::new();
        };
        if Some(step) != self.terminal_step {
            return Vec::new();
        }
        self.transcript.push(TranscriptEntry::Message {
            step,
            from: from.clone(),
            to: to.clone(),
            kind: None,
            label: None,
            at: now,
        });
        self.relay_hop(i + 1).into_iter().collect()
    }

    /// True once the failure result has reached the initiator, or when no
    /// relay is due.
    pub fn relay_complete(&self) -> bool {
        match self.relay.last() {
            None => true,
            Some(_) if self.relay.len() < 2 => true,
            Some(last) => self
                .transcript
                .iter()
                .any(|e| matches!(e, TranscriptEntry::Message { kind: None, to, .. } if to == last)),
        }
    }
}
