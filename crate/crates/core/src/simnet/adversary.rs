use std::fmt;
use std::str::FromStr;

use ed25519_dalek::SigningKey;

use crate::identity_model::EntityId;
use crate::operations::{Body, OpPayload};
use crate::trust_core::TrustValue;
use crate::trust_network::Referral;

use super::{MessageEnvelope, Payload};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryKind {
    /// Inflates the values of its own referral statements by
    /// `(1 + inflation)` and re-signs them.
    LyingReferee { inflation: f64 },
    /// Re-issues its assertions with fabricated attribute values.
    BadAsserter,
    /// Corrupts signed content it sends without re-signing.
    TamperingForwarder,
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryKind::LyingReferee { inflation } => write!(f, "lying-referee:{inflation}"),
            AdversaryKind::BadAsserter => f.write_str("bad-asserter"),
            AdversaryKind::TamperingForwarder => f.write_str("tampering-forwarder"),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bad-asserter" => Ok(AdversaryKind::BadAsserter),
            "tampering-forwarder" => Ok(AdversaryKind::TamperingForwarder),
            _ => {
                let inflation = s
                    .strip_prefix("lying-referee:")
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| format!("unknown adversary `{s}`"))?;
                if !(inflation.is_finite() && inflation >= 0.0) {
                    return Err(format!("inflation must be a non-negative number, got {inflation}"));
                }
                Ok(AdversaryKind::LyingReferee { inflation })
            }
        }
    }
}

/// Rewrites an envelope the adversary is about to send. Returns whether
/// anything changed. Only the sender's own outbound traffic is touched.
pub fn apply_adversary(kind: AdversaryKind, sender: &EntityId, key: &SigningKey, env: &mut MessageEnvelope) -> bool {
    if &env.from != sender {
        return false;
    }
    match (kind, &mut env.payload) {
        (AdversaryKind::LyingReferee { inflation }, Payload::ReferralAnswer { lines, .. }) => {
            let mut changed = false;
            for line in lines.iter_mut() {
                let Ok(referral) = Referral::decode(line) else {
                    continue;
                };
                if &referral.referee != sender {
                    continue;
                }
                let mut statement = referral.statement;
                let inflated = TrustValue::saturating(statement.value.get() * (1.0 + inflation));
                if inflated != statement.value {
                    statement.value = inflated;
                    *line = Referral::sign(statement, key).encode().into_bytes();
                    changed = true;
                }
            }
            changed
        }
        (
            AdversaryKind::BadAsserter,
            Payload::Operation {
                body: OpPayload::Protocol {
                    body: Body::Assertion(assertion),
                    ..
                },
                ..
            },
        ) if &assertion.issuer == sender => {
            if assertion.attributes.is_empty() {
                assertion.attributes.insert("role".into(), "admin".into());
            }
            for value in assertion.attributes.values_mut() {
                value.push_str("-forged");
            }
            assertion.sign_with(key);
            true
        }
        (AdversaryKind::TamperingForwarder, Payload::ReferralAnswer { lines, .. }) => {
            for line in lines.iter_mut() {
                if let Some(last) = line.last_mut() {
                    *last ^= 0x01;
                }
            }
            !lines.is_empty()
        }
        (
            AdversaryKind::TamperingForwarder,
            Payload::Operation {
                body: OpPayload::Protocol {
                    body: Body::Assertion(assertion),
                    ..
                },
                ..
            },
        ) => {
            if let Some(first) = assertion.signature.first_mut() {
                *first ^= 0x01;
            }
            true
        }
        _ => false,
    }
}
