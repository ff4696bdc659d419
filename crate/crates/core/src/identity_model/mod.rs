//! Entities, partial identities, credentials and signed identity assertions.

mod keys;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::SigningKey;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::federation::FederationList;
use crate::trust_core::{Tick, TrustStore};
use crate::trust_network::TrustManager;

pub use keys::{derive_signing_key, sign, KeyId, KeyRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("invalid entity id `{0}`")]
    InvalidEntityId(String),
    #[error("{subject} has no identity registered at {idp}")]
    UnknownSubject { idp: EntityId, subject: EntityId },
    #[error("{0} does not act as an identity provider")]
    NotAnIdP(EntityId),
}

/// Opaque entity name, unique per network.
///
/// Restricted to `[A-Za-z0-9_.@-]` so it can appear unquoted in every
/// line-oriented format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, IdentityError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '@' | '-'));
        if ok {
            Ok(EntityId(id))
        } else {
            Err(IdentityError::InvalidEntityId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityId {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityId::new(s)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        EntityId::new(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRole {
    User,
    IdP,
    Sp,
}

impl FromStr for EntityRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(EntityRole::User),
            "idp" => Ok(EntityRole::IdP),
            "sp" => Ok(EntityRole::Sp),
            other => Err(format!("unknown entity role `{other}`")),
        }
    }
}

impl fmt::Display for EntityRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityRole::User => "user",
            EntityRole::IdP => "idp",
            EntityRole::Sp => "sp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CredentialKind {
    SharedSecret,
}

/// Authentication secret. Never serialized; `Debug` is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct Credential {
    pub kind: CredentialKind,
    secret: Vec<u8>,
}

impl Credential {
    pub fn shared_secret(secret: impl Into<Vec<u8>>) -> Self {
        Credential {
            kind: CredentialKind::SharedSecret,
            secret: secret.into(),
        }
    }

    pub fn matches(&self, other: &Credential) -> bool {
        self.kind == other.kind && bool::from(self.secret.as_slice().ct_eq(other.secret.as_slice()))
    }

    /// Exposed for leak scans in tests; do not log.
    pub fn secret_bytes(&self) -> &[u8] {
        &self.secret
    }
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Credential(<redacted>)")
    }
}

/// What an IdP knows about one of its subjects.
#[derive(Debug, Clone)]
pub struct PartialIdentity {
    pub owner: EntityId,
    pub attributes: BTreeMap<String, String>,
    pub credential: Credential,
}

/// Signed claim by `issuer` about `subject`, addressed to `audience`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityAssertion {
    pub issuer: EntityId,
    pub subject: EntityId,
    pub audience: EntityId,
    pub attributes: BTreeMap<String, String>,
    #[serde(with = "hex_bytes")]
    pub nonce: Vec<u8>,
    pub issued_at: Tick,
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
}

#[derive(Serialize)]
struct UnsignedAssertion<'a> {
    issuer: &'a EntityId,
    subject: &'a EntityId,
    audience: &'a EntityId,
    attributes: &'a BTreeMap<String, String>,
    nonce: String,
    issued_at: Tick,
}

impl IdentityAssertion {
    /// Canonical bytes covered by the signature: every field but the
    /// signature, as compact JSON with sorted attribute keys.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let unsigned = UnsignedAssertion {
            issuer: &self.issuer,
            subject: &self.subject,
            audience: &self.audience,
            attributes: &self.attributes,
            nonce: hex::encode(&self.nonce),
            issued_at: self.issued_at,
        };
        serde_json::to_vec(&unsigned).expect("assertion serializes")
    }

    pub fn sign_with(&mut self, key: &SigningKey) {
        self.signature = sign(key, &self.signing_bytes());
    }

    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("assertion serializes")
    }

    pub fn from_wire(text: &str) -> Option<Self> {
        serde_json::from_str(text).ok()
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssertionError {
    #[error("assertion signature does not verify")]
    BadSignature,
    #[error("assertion addressed to {found}, expected {expected}")]
    AudienceMismatch { expected: EntityId, found: EntityId },
    #[error("assertion nonce already seen")]
    ReplayDetected,
}

/// Nonces a verifier has accepted.
#[derive(Debug, Clone, Default)]
pub struct ReplayCache {
    seen: BTreeSet<Vec<u8>>,
}

impl ReplayCache {
    pub fn contains(&self, nonce: &[u8]) -> bool {
        self.seen.contains(nonce)
    }

    fn record(&mut self, nonce: &[u8]) {
        self.seen.insert(nonce.to_vec());
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// A network participant.
///
/// Any entity may act as user, IdP and SP at different times; an IdP both
/// issues and consumes assertions.
#[derive(Debug, Clone)]
pub struct Entity {
    pub id: EntityId,
    pub roles: BTreeSet<EntityRole>,
    signing_key: SigningKey,
    pub manager: TrustManager,
    /// Subjects registered at this entity, when it acts as an IdP.
    pub identities: BTreeMap<EntityId, PartialIdentity>,
    /// Credentials this entity presents, keyed by the IdP that issued them.
    pub wallet: BTreeMap<EntityId, Credential>,
    pub replay_cache: ReplayCache,
    pub federation: Option<FederationList>,
}

impl Entity {
    pub fn new(id: EntityId, roles: impl IntoIterator<Item = EntityRole>, signing_key: SigningKey) -> Self {
        let manager = TrustManager::new(TrustStore::new(id.clone()));
        Entity {
            id,
            roles: roles.into_iter().collect(),
            signing_key,
            manager,
            identities: BTreeMap::new(),
            wallet: BTreeMap::new(),
            replay_cache: ReplayCache::default(),
            federation: None,
        }
    }

    pub fn is_idp(&self) -> bool {
        self.roles.contains(&EntityRole::IdP)
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.signing_key
    }

    pub fn register_identity(&mut self, identity: PartialIdentity) {
        self.identities.insert(identity.owner.clone(), identity);
    }
}

/// Issues a signed assertion about `subject` for `audience`, carrying the
/// requested attributes that are registered for the subject.
pub fn create_assertion(
    idp: &Entity,
    subject: &EntityId,
    audience: &EntityId,
    requested: &[String],
    nonce: &[u8],
    now: Tick,
) -> Result<IdentityAssertion, IdentityError> {
    if !idp.is_idp() {
        return Err(IdentityError::NotAnIdP(idp.id.clone()));
    }
    let registered = match idp.identities.get(subject) {
        Some(identity) => Some(&identity.attributes),
        None if subject == &idp.id => None,
        None => {
            return Err(IdentityError::UnknownSubject {
                idp: idp.id.clone(),
                subject: subject.clone(),
            })
        }
    };
    let attributes = registered
        .map(|attrs| {
            requested
                .iter()
                .filter_map(|name| attrs.get(name).map(|v| (name.clone(), v.clone())))
                .collect()
        })
        .unwrap_or_default();
    let mut assertion = IdentityAssertion {
        issuer: idp.id.clone(),
        subject: subject.clone(),
        audience: audience.clone(),
        attributes,
        nonce: nonce.to_vec(),
        issued_at: now,
        signature: Vec::new(),
    };
    assertion.sign_with(&idp.signing_key);
    Ok(assertion)
}

/// Checks signature, audience binding and freshness, in that order. The
/// nonce is recorded only when every check passes.
pub fn verify_assertion(
    assertion: &IdentityAssertion,
    expected_audience: &EntityId,
    keys: &KeyRegistry,
    replay_cache: &mut ReplayCache,
) -> Result<(), AssertionError> {
    if !keys.verify(&assertion.issuer, &assertion.signing_bytes(), &assertion.signature) {
        return Err(AssertionError::BadSignature);
    }
    if &assertion.audience != expected_audience {
        return Err(AssertionError::AudienceMismatch {
            expected: expected_audience.clone(),
            found: assertion.audience.clone(),
        });
    }
    if replay_cache.contains(&assertion.nonce) {
        return Err(AssertionError::ReplayDetected);
    }
    replay_cache.record(&assertion.nonce);
    Ok(())
}

pub fn authenticate_local(entity: &Entity, subject: &EntityId, presented: &Credential) -> bool {
    entity
        .identities
        .get(subject)
        .is_some_and(|identity| identity.credential.matches(presented))
}
