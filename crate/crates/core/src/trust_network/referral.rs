//! Signed referrals and their wire form.
//!
//! A referral is one of the referee's own arcs, signed by the referee. On the
//! wire it is a single ASCII line:
//!
//! ```text
//! referral <referee> <key-id> <signature-hex> arc <trustor> <trustee> <context> <kind> <value>
//! ```
//!
//! The signature covers the `arc ...` record exactly as it appears in the
//! graph text format. Decoding accepts only the canonical encoding.

use std::fmt;

use ed25519_dalek::SigningKey;

use crate::identity_model::{sign, EntityId, KeyId, KeyRegistry};
use crate::trust_core::graph::parse_record;
use crate::trust_core::{ArcKind, TrustArc, TrustContext, TrustStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    Malformed,
    UnknownReferee,
    KeyMismatch,
    TrustorMismatch,
    BadSignature,
    /// The statement is one of the receiving manager's own arcs.
    OwnStatement,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Malformed => "malformed",
            RejectReason::UnknownReferee => "unknown-referee",
            RejectReason::KeyMismatch => "key-mismatch",
            RejectReason::TrustorMismatch => "trustor-mismatch",
            RejectReason::BadSignature => "bad-signature",
            RejectReason::OwnStatement => "own-statement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Referral {
    pub referee: EntityId,
    pub statement: TrustArc,
    pub signature: Vec<u8>,
    pub signer_key_id: KeyId,
}

impl Referral {
    /// Signs one of the referee's own arcs.
    pub fn sign(statement: TrustArc, key: &SigningKey) -> Self {
        let signature = sign(key, statement.to_record().as_bytes());
        Referral {
            referee: statement.trustor.clone(),
            signer_key_id: KeyId::of(&key.verifying_key()),
            statement,
            signature,
        }
    }

    pub fn encode(&self) -> String {
        format!(
            "referral {} {} {} {}",
            self.referee,
            self.signer_key_id,
            hex::encode(&self.signature),
            self.statement.to_record()
        )
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RejectReason> {
        let text = std::str::from_utf8(bytes).map_err(|_| RejectReason::Malformed)?;
        let mut parts = text.splitn(5, ' ');
        let (Some("referral"), Some(referee), Some(key_id), Some(sig), Some(record)) =
            (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(RejectReason::Malformed);
        };
        let referee = EntityId::new(referee).map_err(|_| RejectReason::Malformed)?;
        let signer_key_id = KeyId::parse(key_id).ok_or(RejectReason::Malformed)?;
        let signature = hex::decode(sig).map_err(|_| RejectReason::Malformed)?;
        let statement = parse_record(record).map_err(|_| RejectReason::Malformed)?;
        let referral = Referral {
            referee,
            statement,
            signature,
            signer_key_id,
        };
        // Any spelling other than the canonical one is a mutation in transit.
        if referral.encode().as_bytes() != bytes {
            return Err(RejectReason::Malformed);
        }
        Ok(referral)
    }
}

/// Integrity and authenticity check against the registered key of the
/// referee.
pub fn verify_referral(referral: &Referral, keys: &KeyRegistry) -> Result<(), RejectReason> {
    let Some(registered) = keys.key_id(&referral.referee) else {
        return Err(RejectReason::UnknownReferee);
    };
    if registered != referral.signer_key_id {
        return Err(RejectReason::KeyMismatch);
    }
    if referral.statement.trustor != referral.referee {
        return Err(RejectReason::TrustorMismatch);
    }
    if !keys.verify(
        &referral.referee,
        referral.statement.to_record().as_bytes(),
        &referral.signature,
    ) {
        return Err(RejectReason::BadSignature);
    }
    Ok(())
}

/// What a referee tells a crawler about `trustee` in `context`: its
/// performance arc to the trustee, if any, and all of its referral arcs in
/// the context so the crawl can continue.
pub fn answer_query(
    store: &TrustStore,
    trustee: &EntityId,
    context: &TrustContext,
    key: &SigningKey,
) -> Vec<Referral> {
    store
        .arcs()
        .filter(|arc| &arc.context == context)
        .filter(|arc| match arc.kind {
            ArcKind::Performance => &arc.trustee == trustee,
            ArcKind::Referral => true,
        })
        .map(|arc| Referral::sign(arc.clone(), key))
        .collect()
}
