//! Identity operations: declarative protocols of messages, local actions and
//! trust checks, executed as deterministic per-instance state machines.

mod instance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::identity_model::{Credential, Entity, EntityId, IdentityAssertion, KeyRegistry};
use crate::trust_core::{Tick, TrustContext, TrustValue};

pub use instance::{
    CheckRecord, Effect, FailureReason, OperationInstance, OperationOutcome, OperationStatus, TranscriptEntry,
};

pub const DEFAULT_MAX_TICKS: Tick = 1000;

/// Protocol roles of an identity task. One entity may fill several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    User,
    UserIdp,
    Sp,
    SpIdp,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::User, Role::UserIdp, Role::Sp, Role::SpIdp];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "user",
            Role::UserIdp => "user-idp",
            Role::Sp => "sp",
            Role::SpIdp => "sp-idp",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(Role::User),
            "user-idp" => Ok(Role::UserIdp),
            "sp" => Ok(Role::Sp),
            "sp-idp" => Ok(Role::SpIdp),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// The labelled trust relationships between the four roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationshipId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl RelationshipId {
    pub const ALL: [RelationshipId; 8] = [
        RelationshipId::A,
        RelationshipId::B,
        RelationshipId::C,
        RelationshipId::D,
        RelationshipId::E,
        RelationshipId::F,
        RelationshipId::G,
        RelationshipId::H,
    ];

    /// (trustor role, trustee role, context).
    pub fn mapping(self) -> (Role, Role, TrustContext) {
        use RelationshipId::*;
        match self {
            A => (Role::User, Role::UserIdp, TrustContext::IdentityProvision),
            B => (Role::UserIdp, Role::User, TrustContext::SelfAssertionResponsibility),
            C => (Role::SpIdp, Role::UserIdp, TrustContext::MakeGoodAssertions),
            D => (Role::UserIdp, Role::SpIdp, TrustContext::MaintainPrivacy),
            E => (Role::User, Role::Sp, TrustContext::MaintainPrivacy),
            F => (Role::Sp, Role::User, TrustContext::GoodIntentions),
            // G and H mirror A and B between the SP and its IdP.
            G => (Role::Sp, Role::SpIdp, TrustContext::IdentityProvision),
            H => (Role::SpIdp, Role::Sp, TrustContext::SelfAssertionResponsibility),
        }
    }

    pub fn context(self) -> TrustContext {
        self.mapping().2
    }
}

impl fmt::Display for RelationshipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RelationshipId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationshipId::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| format!("unknown relationship `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PayloadKind {
    ServiceRequest,
    AuthnRequest,
    AuthnChallenge,
    CredentialPresentation,
    AuthnResponse,
    AuthnResult,
    ServiceGrant,
    AttributeQuery,
    AttributeResponse,
}

impl PayloadKind {
    const ALL: [PayloadKind; 9] = [
        PayloadKind::ServiceRequest,
        PayloadKind::AuthnRequest,
        PayloadKind::AuthnChallenge,
        PayloadKind::CredentialPresentation,
        PayloadKind::AuthnResponse,
        PayloadKind::AuthnResult,
        PayloadKind::ServiceGrant,
        PayloadKind::AttributeQuery,
        PayloadKind::AttributeResponse,
    ];

    pub fn carries_assertion(self) -> bool {
        matches!(self, PayloadKind::AuthnResponse | PayloadKind::AttributeResponse)
    }

    pub fn carries_credential(self) -> bool {
        self == PayloadKind::CredentialPresentation
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::ServiceRequest => "service-request",
            PayloadKind::AuthnRequest => "authn-request",
            PayloadKind::AuthnChallenge => "authn-challenge",
            PayloadKind::CredentialPresentation => "credential-presentation",
            PayloadKind::AuthnResponse => "authn-response",
            PayloadKind::AuthnResult => "authn-result",
            PayloadKind::ServiceGrant => "service-grant",
            PayloadKind::AttributeQuery => "attribute-query",
            PayloadKind::AttributeResponse => "attribute-response",
        })
    }
}

impl FromStr for PayloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PayloadKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown payload kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalAction {
    /// Checks the credential most recently presented to the acting role.
    Authenticate,
    IssueAssertion { subject: Role, audience: Role },
    VerifyAssertion,
}

impl fmt::Display for LocalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalAction::Authenticate => f.write_str("authenticate"),
            LocalAction::IssueAssertion { .. } => f.write_str("issue-assertion"),
            LocalAction::VerifyAssertion => f.write_str("verify-assertion"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Message {
        from: Role,
        to: Role,
        payload: PayloadKind,
        /// Connection number shown in transcripts.
        label: Option<String>,
    },
    TrustCheck {
        checker: Role,
        subject: Role,
        relationship: RelationshipId,
        threshold: TrustValue,
    },
    LocalAction { role: Role, action: LocalAction },
}

impl Step {
    pub fn message(from: Role, to: Role, payload: PayloadKind, label: &str) -> Step {
        Step::Message {
            from,
            to,
            payload,
            label: (!label.is_empty()).then(|| label.to_string()),
        }
    }

    pub fn check(relationship: RelationshipId, threshold: TrustValue) -> Step {
        let (checker, subject, _) = relationship.mapping();
        Step::TrustCheck {
            checker,
            subject,
            relationship,
            threshold,
        }
    }

    pub fn action(role: Role, action: LocalAction) -> Step {
        Step::LocalAction { role, action }
    }

    /// The role that acts at this step.
    pub fn actor(&self) -> Role {
        match self {
            Step::Message { from, .. } => *from,
            Step::TrustCheck { checker, .. } => *checker,
            Step::LocalAction { role, .. } => *role,
        }
    }

    fn roles(&self) -> Vec<Role> {
        match self {
            Step::Message { from, to, .. } => vec![*from, *to],
            Step::TrustCheck { checker, subject, .. } => vec![*checker, *subject],
            Step::LocalAction {
                role,
                action: LocalAction::IssueAssertion { subject, audience },
            } => vec![*role, *subject, *audience],
            Step::LocalAction { role, .. } => vec![*role],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationSpec {
    pub name: String,
    pub roles: BTreeSet<Role>,
    pub steps: Vec<Step>,
    /// Attribute names the relying party asks the issuer to release.
    pub requested_attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("spec has no steps")]
    NoSteps,
    #[error("step {step}: role {role} is not declared")]
    UnboundRole { step: usize, role: Role },
    #[error("step {step}: relationship {relationship} is held by {expected_checker} about {expected_subject}")]
    RelationshipRoleMismatch {
        step: usize,
        relationship: RelationshipId,
        expected_checker: Role,
        expected_subject: Role,
    },
    #[error("step {step}: {role} acts without holding the protocol")]
    Disconnected { step: usize, role: Role },
    #[error("step {step}: message from a role to itself")]
    SelfMessage { step: usize },
    #[error("step {step}: credentials may only travel from user to user-idp")]
    CredentialRoute { step: usize },
    #[error("step {step}: assertion sent before the sender issued one")]
    AssertionNotIssued { step: usize },
    #[error("step {step}: nothing to verify, no assertion was delivered to this role")]
    AssertionNotReceived { step: usize },
    #[error("step {step}: authenticate without a credential presented to this role")]
    NoCredential { step: usize },
    #[error("spec never verifies an assertion")]
    NoVerification,
}

/// Returns every invariant violation of `spec`.
///
/// The protocol is a single thread of control: each step's actor must be the
/// role that sent the first message or received the latest one.
pub fn validate_spec(spec: &OperationSpec) -> Result<(), Vec<SpecError>> {
    let mut errors = Vec::new();
    if spec.steps.is_empty() {
        errors.push(SpecError::NoSteps);
    }
    let mut holder: Option<Role> = None;
    let mut issued: BTreeSet<Role> = BTreeSet::new();
    let mut received_assertion: BTreeSet<Role> = BTreeSet::new();
    let mut received_credential: BTreeSet<Role> = BTreeSet::new();
    let mut verifies = false;
    for (i, step) in spec.steps.iter().enumerate() {
        for role in step.roles() {
            if !spec.roles.contains(&role) {
                errors.push(SpecError::UnboundRole { step: i, role });
            }
        }
        let actor = step.actor();
        match holder {
            None => holder = Some(actor),
            Some(h) if h != actor => errors.push(SpecError::Disconnected { step: i, role: actor }),
            Some(_) => {}
        }
        match step {
            Step::Message { from, to, payload, .. } => {
                if from == to {
                    errors.push(SpecError::SelfMessage { step: i });
                }
                if payload.carries_credential() {
                    if (*from, *to) != (Role::User, Role::UserIdp) {
                        errors.push(SpecError::CredentialRoute { step: i });
                    }
                    received_credential.insert(*to);
                }
                if payload.carries_assertion() {
                    if !issued.contains(from) {
                        errors.push(SpecError::AssertionNotIssued { step: i });
                    }
                    received_assertion.insert(*to);
                }
                holder = Some(*to);
            }
            Step::TrustCheck {
                checker,
                subject,
                relationship,
                ..
            } => {
                let (c, s, _) = relationship.mapping();
                if (c, s) != (*checker, *subject) {
                    errors.push(SpecError::RelationshipRoleMismatch {
                        step: i,
                        relationship: *relationship,
                        expected_checker: c,
                        expected_subject: s,
                    });
                }
            }
            Step::LocalAction { role, action } => match action {
                LocalAction::Authenticate => {
                    if !received_credential.contains(role) {
                        errors.push(SpecError::NoCredential { step: i });
                    }
                }
                LocalAction::IssueAssertion { .. } => {
                    issued.insert(*role);
                }
                LocalAction::VerifyAssertion => {
                    if !received_assertion.contains(role) && !issued.contains(role) {
                        errors.push(SpecError::AssertionNotReceived { step: i });
                    }
                    verifies = true;
                }
            },
        }
    }
    if !spec.steps.is_empty() && !verifies {
        errors.push(SpecError::NoVerification);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("role {0} is not bound to an entity")]
    UnboundRole(Role),
    #[error("invalid operation spec: {0:?}")]
    InvalidSpec(Vec<SpecError>),
    #[error("entity {0} is not on the network")]
    UnknownEntity(EntityId),
}

/// Creates a running instance at cursor 0. Several roles may share an
/// entity.
pub fn instantiate(
    spec: &OperationSpec,
    bindings: BTreeMap<Role, EntityId>,
    id: u64,
    nonce: Vec<u8>,
    now: Tick,
    max_ticks: Tick,
) -> Result<OperationInstance, InstantiateError> {
    validate_spec(spec).map_err(InstantiateError::InvalidSpec)?;
    if let Some(role) = spec.roles.iter().find(|r| !bindings.contains_key(r)) {
        return Err(InstantiateError::UnboundRole(*role));
    }
    Ok(OperationInstance::new(id, spec.clone(), bindings, nonce, now, max_ticks))
}

/// Message body, filled in by the engine from instance state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Empty,
    Credential {
        subject: EntityId,
        credential: Option<Credential>,
    },
    Assertion(IdentityAssertion),
}

/// What travels between entities for an operation instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpPayload {
    Protocol { kind: PayloadKind, body: Body },
    /// Opaque failed-authentication result relayed toward the initiator.
    Failure,
}

/// Entities and their public keys.
#[derive(Debug, Clone, Default)]
pub struct Directory {
    entities: BTreeMap<EntityId, Entity>,
    keys: KeyRegistry,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("duplicate entity `{0}`")]
pub struct DuplicateEntity(pub EntityId);

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the entity and registers its verifying key.
    pub fn insert(&mut self, entity: Entity) -> Result<(), DuplicateEntity> {
        if self.entities.contains_key(&entity.id) {
            return Err(DuplicateEntity(entity.id));
        }
        self.keys.register(entity.id.clone(), entity.signing_key().verifying_key());
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    pub fn get(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn get_mut(&mut self, id: &EntityId) -> Option<&mut Entity> {
        self.entities.get_mut(id)
    }

    pub fn entity_and_keys(&mut self, id: &EntityId) -> Option<(&mut Entity, &KeyRegistry)> {
        let keys = &self.keys;
        self.entities.get_mut(id).map(|e| (e, keys))
    }

    pub fn keys(&self) -> &KeyRegistry {
        &self.keys
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entities_mut(&mut self) -> impl Iterator<Item = &mut Entity> {
        self.entities.values_mut()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Drives one instance on `network` until it reaches a terminal status.
pub fn run_to_completion(
    network: &mut crate::simnet::Network,
    instance: OperationInstance,
) -> OperationOutcome {
    network.run_instance(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> TrustValue {
        TrustValue::new(x).unwrap()
    }

    fn toy() -> OperationSpec {
        OperationSpec {
            name: "toy".into(),
            roles: [Role::SpIdp, Role::UserIdp, Role::User].into_iter().collect(),
            steps: vec![
                Step::message(Role::SpIdp, Role::UserIdp, PayloadKind::AttributeQuery, ""),
                Step::action(
                    Role::UserIdp,
                    LocalAction::IssueAssertion {
                        subject: Role::User,
                        audience: Role::SpIdp,
                    },
                ),
                Step::message(Role::UserIdp, Role::SpIdp, PayloadKind::AttributeResponse, ""),
                Step::action(Role::SpIdp, LocalAction::VerifyAssertion),
            ],
            requested_attributes: vec![],
        }
    }

    #[test]
    fn relationship_table() {
        assert_eq!(RelationshipId::C.mapping().0, Role::SpIdp);
        assert_eq!(RelationshipId::D.context(), TrustContext::MaintainPrivacy);
        assert_eq!(RelationshipId::G.context(), RelationshipId::A.context());
        assert_eq!(RelationshipId::H.context(), RelationshipId::B.context());
        for r in RelationshipId::ALL {
            assert_eq!(r.to_string().parse::<RelationshipId>().unwrap(), r);
        }
    }

    #[test]
    fn text_forms_round_trip() {
        for r in Role::ALL {
            assert_eq!(r.to_string().parse::<Role>().unwrap(), r);
        }
        for k in PayloadKind::ALL {
            assert_eq!(k.to_string().parse::<PayloadKind>().unwrap(), k);
        }
    }

    #[test]
    fn toy_operation_is_valid() {
        assert_eq!(validate_spec(&toy()), Ok(()));
    }

    #[test]
    fn undeclared_role() {
        let mut spec = toy();
        spec.steps.insert(1, Step::check(RelationshipId::D, v(0.5)));
        spec.roles.remove(&Role::User);
        let errs = validate_spec(&spec).unwrap_err();
        assert!(errs.contains(&SpecError::UnboundRole { step: 2, role: Role::User }));
    }

    #[test]
    fn relationship_checked_by_wrong_role() {
        let mut spec = toy();
        spec.steps.insert(
            0,
            Step::TrustCheck {
                checker: Role::User,
                subject: Role::UserIdp,
                relationship: RelationshipId::C,
                threshold: v(0.5),
            },
        );
        let errs = validate_spec(&spec).unwrap_err();
        assert!(matches!(errs[0], SpecError::RelationshipRoleMismatch { step: 0, .. }));
    }

    #[test]
    fn structural_errors() {
        let empty = OperationSpec {
            steps: vec![],
            ..toy()
        };
        assert_eq!(validate_spec(&empty), Err(vec![SpecError::NoSteps]));

        let mut no_verify = toy();
        no_verify.steps.pop();
        assert_eq!(validate_spec(&no_verify), Err(vec![SpecError::NoVerification]));

        let mut unissued = toy();
        unissued.steps.remove(1);
        assert!(validate_spec(&unissued)
            .unwrap_err()
            .contains(&SpecError::AssertionNotIssued { step: 1 }));

        let mut jump = toy();
        jump.steps.insert(1, Step::message(Role::User, Role::SpIdp, PayloadKind::ServiceRequest, ""));
        assert!(validate_spec(&jump)
            .unwrap_err()
            .contains(&SpecError::Disconnected { step: 1, role: Role::User }));

        let mut cred = toy();
        cred.steps.insert(
            1,
            Step::message(Role::UserIdp, Role::SpIdp, PayloadKind::CredentialPresentation, ""),
        );
        let errs = validate_spec(&cred).unwrap_err();
        assert!(errs.contains(&SpecError::CredentialRoute { step: 1 }));
    }

    #[test]
    fn instantiate_requires_bindings() {
        let spec = toy();
        let id = |s: &str| EntityId::new(s).unwrap();
        let mut bindings: BTreeMap<Role, EntityId> =
            [(Role::SpIdp, id("sp")), (Role::UserIdp, id("idp"))].into_iter().collect();
        assert_eq!(
            instantiate(&spec, bindings.clone(), 1, vec![0; 16], 0, 100).unwrap_err(),
            InstantiateError::UnboundRole(Role::User)
        );
        bindings.insert(Role::User, id("alice"));
        let inst = instantiate(&spec, bindings, 1, vec![0; 16], 0, 100).unwrap();
        assert_eq!(inst.status(), &OperationStatus::Running);
        assert_eq!(inst.cursor(), 0);
    }
}
