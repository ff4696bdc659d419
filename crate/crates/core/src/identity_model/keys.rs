use std::collections::BTreeMap;
use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use sha2::{Digest, Sha256};

use super::EntityId;

const KEY_DOMAIN: &[u8] = b"trustweave/signing-key/v1";

/// Short fingerprint of a verifying key: the first eight bytes of its
/// SHA-256 digest, hex encoded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyId(String);

impl KeyId {
    pub fn of(key: &VerifyingKey) -> Self {
        let digest = Sha256::digest(key.as_bytes());
        KeyId(hex::encode(&digest[..8]))
    }

    /// Accepts only the canonical lowercase 16-digit form.
    pub fn parse(s: &str) -> Option<Self> {
        let ok = s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| KeyId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Derives an entity's signing key from the scenario seed, so that every
/// participant can reconstruct the same public key registry.
pub fn derive_signing_key(seed: u64, id: &EntityId) -> SigningKey {
    let mut hasher = Sha256::new();
    hasher.update(KEY_DOMAIN);
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_str().as_bytes());
    let bytes: [u8; 32] = hasher.finalize().into();
    SigningKey::from_bytes(&bytes)
}

pub fn sign(key: &SigningKey, message: &[u8]) -> Vec<u8> {
    key.sign(message).to_bytes().to_vec()
}

/// Maps entities to their public keys.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<EntityId, VerifyingKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: EntityId, key: VerifyingKey) {
        self.keys.insert(id, key);
    }

    pub fn get(&self, id: &EntityId) -> Option<&VerifyingKey> {
        self.keys.get(id)
    }

    pub fn key_id(&self, id: &EntityId) -> Option<KeyId> {
        self.keys.get(id).map(KeyId::of)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Strict verification: rejects malleable and small-order signatures.
    pub fn verify(&self, signer: &EntityId, message: &[u8], signature: &[u8]) -> bool {
        let Some(key) = self.keys.get(signer) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(signature) else {
            return false;
        };
        key.verify_strict(message, &sig).is_ok()
    }
}
