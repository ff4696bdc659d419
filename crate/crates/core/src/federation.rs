//! Dynamic federations: the identity domains an entity currently trusts
//! enough to interoperate with, recomputed from its evolving ratings.

use std::collections::BTreeMap;

use crate::identity_model::EntityId;
use crate::trust_core::{Tick, TrustContext, TrustValue};
use crate::trust_network::{Basis, TrustManager};

#[derive(Debug, Clone, PartialEq)]
pub struct FederationPolicy {
    pub context: TrustContext,
    pub threshold: TrustValue,
    /// Refresh period in ticks; 0 disables periodic refresh.
    pub refresh_every: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub value: TrustValue,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationList {
    pub owner: EntityId,
    pub context: TrustContext,
    pub threshold: TrustValue,
    pub members: BTreeMap<EntityId, Membership>,
    pub as_of: Tick,
}

impl FederationList {
    pub fn is_federated(&self, peer: &EntityId) -> bool {
        self.members.contains_key(peer)
    }
}

pub fn is_federated(list: &FederationList, peer: &EntityId) -> bool {
    list.is_federated(peer)
}

/// Rates every candidate from the manager's current snapshot and keeps
/// those with evidence and a value at or above the threshold.
pub fn refresh_federations<'a>(
    manager: &TrustManager,
    policy: &FederationPolicy,
    candidates: impl IntoIterator<Item = &'a EntityId>,
    now: Tick,
) -> FederationList {
    let snapshot = manager.snapshot();
    let mut members = BTreeMap::new();
    for peer in candidates {
        if peer == manager.owner() {
            continue;
        }
        let eval = snapshot.evaluate(manager.owner(), peer, &policy.context, manager.strategy, manager.max_depth);
        if eval.rating.meets(policy.threshold) {
            members.insert(
                peer.clone(),
                Membership {
                    value: eval.rating.value,
                    basis: eval.rating.basis,
                },
            );
        }
    }
    FederationList {
        owner: manager.owner().clone(),
        context: policy.context.clone(),
        threshold: policy.threshold,
        members,
        as_of: now,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust_core::{ArcKind, ExperienceReport, TrustArc, TrustStore};

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    const MGA: TrustContext = TrustContext::MakeGoodAssertions;

    fn manager() -> TrustManager {
        let mut store = TrustStore::new(id("A"));
        store.record_arc(TrustArc::new(id("A"), id("B"), MGA, ArcKind::Performance, 0.72).unwrap()).unwrap();
        store.record_arc(TrustArc::new(id("A"), id("C"), MGA, ArcKind::Performance, 0.3).unwrap()).unwrap();
        TrustManager::new(store)
    }

    fn policy(threshold: f64) -> FederationPolicy {
        FederationPolicy {
            context: MGA,
            threshold: TrustValue::new(threshold).unwrap(),
            refresh_every: 1,
        }
    }

    #[test]
    fn filters_by_threshold() {
        let everyone = [id("A"), id("B"), id("C"), id("D")];
        let list = refresh_federations(&manager(), &policy(0.5), &everyone, 3);
        assert_eq!(list.members.keys().collect::<Vec<_>>(), [&id("B")]);
        assert!(is_federated(&list, &id("B")));
        assert!(!is_federated(&list, &id("C")));
        let all = refresh_federations(&manager(), &policy(0.0), &everyone, 3);
        assert_eq!(all.members.len(), 2);
        assert!(!all.is_federated(&id("D")));
        let exact = refresh_federations(&manager(), &policy(1.0), &everyone, 3);
        assert!(exact.members.is_empty());
    }

    #[test]
    fn empty_store() {
        let mgr = TrustManager::new(TrustStore::new(id("A")));
        assert!(refresh_federations(&mgr, &policy(0.0), &[id("B")], 0).members.is_empty());
    }

    #[test]
    fn demotion_after_bad_experience() {
        let mut mgr = manager();
        let candidates = [id("B"), id("C")];
        assert!(refresh_federations(&mgr, &policy(0.6), &candidates, 0).is_federated(&id("B")));
        mgr.store_mut()
            .apply_experience(&ExperienceReport {
                trustee: id("B"),
                context: MGA,
                outcome: 0.0,
                source_operation: None,
                at: 1,
            })
            .unwrap();
        let list = refresh_federations(&mgr, &policy(0.6), &candidates, 1);
        assert!(!list.is_federated(&id("B")));
        assert_eq!(refresh_federations(&mgr, &policy(0.6), &candidates, 1), list);
    }
}
