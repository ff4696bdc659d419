//! Trust-gated identity operations.
//!
//! Entities hold contextual trust ratings about one another (performance and
//! referral trust), gather signed referrals from their neighbours, and use the
//! resulting transitive ratings to decide, step by step, whether an identity
//! operation such as single sign-on may proceed. Everything runs on a seeded,
//! single-threaded simulated network so that experiments replay exactly.

pub mod federation;
pub mod identity_model;
pub mod operations;
pub mod report;
pub mod scenario;
pub mod simnet;
pub mod sso;
pub mod trust_core;
pub mod trust_network;

pub use identity_model::{EntityId, IdentityAssertion, KeyRegistry};
pub use trust_core::{ArcKind, Tick, TrustArc, TrustContext, TrustGraph, TrustStore, TrustValue};
pub use trust_network::{AggregationStrategy, Basis, TrustManager, TrustPath, TrustRating};
