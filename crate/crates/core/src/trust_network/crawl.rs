//! Referral gathering as a message-driven state machine.
//!
//! The crawler asks referral-trusted neighbours what they know about a
//! trustee in one context, then follows the referral arcs in their answers,
//! level by level. The network layer moves the queries and answers; this
//! module only decides whom to ask and what to keep.

use std::collections::{BTreeMap, BTreeSet};

use crate::identity_model::{derive_signing_key, EntityId, KeyRegistry};
use crate::trust_core::{ArcId, ArcKind, TrustContext, TrustGraph, TrustStore};

use super::{answer_query, verify_referral, AggregationStrategy, Evaluation, Referral, RejectReason, TrustManager};

/// State of one crawl on behalf of `source`.
#[derive(Debug, Clone)]
pub struct Crawl {
    source: EntityId,
    trustee: EntityId,
    context: TrustContext,
    max_depth: usize,
    /// Lowest hop distance from the source at which each entity was reached.
    level: BTreeMap<EntityId, usize>,
    pending: BTreeSet<EntityId>,
    answers: BTreeMap<EntityId, Vec<Referral>>,
    gathered: BTreeMap<ArcId, Referral>,
    rejected: Vec<(EntityId, RejectReason)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlResult {
    pub referrals: Vec<Referral>,
    /// Responder and reason for every answer line that failed verification.
    pub rejected: Vec<(EntityId, RejectReason)>,
    /// Entities that never answered.
    pub unanswered: Vec<EntityId>,
}

impl Crawl {
    /// Starts a crawl and returns the first batch of entities to query.
    ///
    /// A path of at most `max_depth` arcs has its last referee at most
    /// `max_depth - 1` hops out, so depths 0 and 1 query no one.
    pub fn start(
        manager: &TrustManager,
        trustee: EntityId,
        context: TrustContext,
        max_depth: usize,
    ) -> (Self, Vec<EntityId>) {
        let mut crawl = Crawl {
            source: manager.owner().clone(),
            trustee,
            context,
            max_depth,
            level: BTreeMap::new(),
            pending: BTreeSet::new(),
            answers: BTreeMap::new(),
            gathered: BTreeMap::new(),
            rejected: Vec::new(),
        };
        let neighbours: Vec<EntityId> = manager
            .store()
            .arcs()
            .filter(|a| a.kind == ArcKind::Referral && a.context == crawl.context && a.value.get() > 0.0)
            .map(|a| a.trustee.clone())
            .collect();
        let mut queries = Vec::new();
        for n in neighbours {
            queries.extend(crawl.reach(n, 1));
        }
        (crawl, queries)
    }

    pub fn source(&self) -> &EntityId {
        &self.source
    }

    pub fn trustee(&self) -> &EntityId {
        &self.trustee
    }

    pub fn context(&self) -> &TrustContext {
        &self.context
    }

    pub fn is_done(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn is_pending(&self, responder: &EntityId) -> bool {
        self.pending.contains(responder)
    }

    /// Handles one answer, given as wire-form referral lines. Returns the
    /// entities to query next. Answers from entities not being waited on are
    /// ignored.
    pub fn on_answer(&mut self, responder: &EntityId, lines: &[Vec<u8>], keys: &KeyRegistry) -> Vec<EntityId> {
        if !self.pending.remove(responder) {
            return Vec::new();
        }
        let mut verified = Vec::new();
        for line in lines {
            match Referral::decode(line).and_then(|r| verify_referral(&r, keys).map(|()| r)) {
                Ok(r) if r.referee == self.source => self.rejected.push((responder.clone(), RejectReason::OwnStatement)),
                Ok(r) => verified.push(r),
                Err(reason) => self.rejected.push((responder.clone(), reason)),
            }
        }
        self.answers.insert(responder.clone(), verified);
        self.expand(responder)
    }

    fn expand(&mut self, responder: &EntityId) -> Vec<EntityId> {
        let level = self.level[responder];
        let answer = self.answers[responder].clone();
        let mut queries = Vec::new();
        for r in answer {
            let s = &r.statement;
            if s.context != self.context {
                continue;
            }
            match s.kind {
                ArcKind::Performance if s.trustee == self.trustee => {
                    self.gathered.insert(s.id(), r);
                }
                // Only referrals that could still lead to a path within depth.
                ArcKind::Referral if level + 1 < self.max_depth => {
                    let next = s.trustee.clone();
                    let follow = s.value.get() > 0.0;
                    self.gathered.insert(s.id(), r);
                    if follow {
                        queries.extend(self.reach(next, level + 1));
                    }
                }
                _ => {}
            }
        }
        queries
    }

    /// Records that `entity` is reachable at `level`; returns it if it must
    /// be queried, and re-expands a stored answer when the level improved.
    fn reach(&mut self, entity: EntityId, level: usize) -> Vec<EntityId> {
        if entity == self.source || entity == self.trustee || level >= self.max_depth {
            return Vec::new();
        }
        match self.level.get(&entity) {
            Some(&known) if known <= level => Vec::new(),
            Some(_) => {
                self.level.insert(entity.clone(), level);
                if self.answers.contains_key(&entity) {
                    self.expand(&entity)
                } else {
                    Vec::new()
                }
            }
            None => {
                self.level.insert(entity.clone(), level);
                self.pending.insert(entity.clone());
                vec![entity]
            }
        }
    }

    /// Ends the crawl, keeping whatever was gathered so far.
    pub fn finish(self) -> CrawlResult {
        CrawlResult {
            referrals: self.gathered.into_values().collect(),
            rejected: self.rejected,
            unanswered: self.pending.into_iter().collect(),
        }
    }
}

/// Runs a crawl to completion with a synchronous responder, in query order.
/// `respond` returns the wire lines an entity sends back, or `None` if it
/// stays silent.
pub fn crawl_with(
    manager: &TrustManager,
    trustee: EntityId,
    context: TrustContext,
    max_depth: usize,
    keys: &KeyRegistry,
    mut respond: impl FnMut(&EntityId) -> Option<Vec<Vec<u8>>>,
) -> CrawlResult {
    let (mut crawl, first) = Crawl::start(manager, trustee, context, max_depth);
    let mut queue: std::collections::VecDeque<EntityId> = first.into();
    while let Some(next) = queue.pop_front() {
        if let Some(lines) = respond(&next) {
            queue.extend(crawl.on_answer(&next, &lines, keys));
        }
    }
    crawl.finish()
}

/// Evaluates `source`'s trust in `trustee` the decentralised way: each
/// entity in `graph` holds only its own arcs, and `source` crawls signed
/// referrals from the others before aggregating. Keys derive from `seed`.
pub fn evaluate_in_graph(
    graph: &TrustGraph,
    source: &EntityId,
    trustee: &EntityId,
    context: &TrustContext,
    strategy: AggregationStrategy,
    max_depth: usize,
    seed: u64,
) -> Evaluation {
    let mut stores: BTreeMap<EntityId, TrustStore> = BTreeMap::new();
    let mut signing = BTreeMap::new();
    let mut keys = KeyRegistry::new();
    let mut everyone = graph.entities();
    everyone.insert(source.clone());
    for e in everyone {
        let key = derive_signing_key(seed, &e);
        keys.register(e.clone(), key.verifying_key());
        signing.insert(e.clone(), key);
        stores.insert(e.clone(), TrustStore::new(e));
    }
    for arc in graph.arcs() {
        stores
            .get_mut(&arc.trustor)
            .expect("every trustor has a store")
            .record_arc(arc.clone())
            .expect("trustor owns the arc");
    }
    let mut manager = TrustManager::new(stores[source].clone());
    manager.strategy = strategy;
    manager.max_depth = max_depth;
    if !manager.has_direct(trustee, context) && max_depth > 0 {
        let result = crawl_with(&manager, trustee.clone(), context.clone(), max_depth, &keys, |who| {
            let lines = answer_query(&stores[who], trustee, context, &signing[who]);
            Some(lines.iter().map(|r| r.encode().into_bytes()).collect())
        });
        for r in result.referrals {
            let _ = manager.accept_referral(r, &keys);
        }
    }
    manager.evaluate_detailed(trustee, context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity_model::derive_signing_key;
    use crate::trust_core::{TrustArc, TrustStore};
    use crate::trust_network::answer_query;

    const MGA: TrustContext = TrustContext::MakeGoodAssertions;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    struct World {
        stores: BTreeMap<EntityId, TrustStore>,
        keys: KeyRegistry,
    }

    impl World {
        fn new(arcs: &[(&str, &str, ArcKind, f64)]) -> Self {
            let mut stores: BTreeMap<EntityId, TrustStore> = BTreeMap::new();
            let mut keys = KeyRegistry::new();
            for &(a, b, kind, v) in arcs {
                for n in [a, b] {
                    keys.register(id(n), derive_signing_key(5, &id(n)).verifying_key());
                    stores.entry(id(n)).or_insert_with(|| TrustStore::new(id(n)));
                }
                let arc = TrustArc::new(id(a), id(b), MGA, kind, v).unwrap();
                stores.get_mut(&id(a)).unwrap().record_arc(arc).unwrap();
            }
            World { stores, keys }
        }

        fn answer(&self, who: &EntityId, trustee: &EntityId) -> Vec<Vec<u8>> {
            answer_query(&self.stores[who], trustee, &MGA, &derive_signing_key(5, who))
                .iter()
                .map(|r| r.encode().into_bytes())
                .collect()
        }

        fn crawl(&self, source: &str, trustee: &str, depth: usize) -> CrawlResult {
            let mgr = TrustManager::new(self.stores[&id(source)].clone());
            let (mut crawl, mut queue) = Crawl::start(&mgr, id(trustee), MGA, depth);
            while let Some(next) = queue.pop() {
                let lines = self.answer(&next, &id(trustee));
                queue.extend(crawl.on_answer(&next, &lines, &self.keys));
            }
            assert!(crawl.is_done());
            crawl.finish()
        }
    }

    #[test]
    fn line_of_three() {
        let w = World::new(&[("A", "B", ArcKind::Referral, 0.9), ("B", "C", ArcKind::Performance, 0.8)]);
        let res = w.crawl("A", "C", 2);
        assert_eq!(res.referrals.len(), 1);
        assert_eq!(res.referrals[0].statement.to_record(), "arc B C MakeGoodAssertions performance 0.8");
        assert!(w.crawl("A", "C", 0).referrals.is_empty());
        assert!(w.crawl("A", "C", 1).referrals.is_empty());
    }

    #[test]
    fn follows_chain_within_depth() {
        let w = World::new(&[
            ("A", "B", ArcKind::Referral, 0.9),
            ("B", "C", ArcKind::Referral, 0.9),
            ("C", "A", ArcKind::Referral, 0.9),
            ("C", "D", ArcKind::Performance, 0.7),
        ]);
        assert_eq!(w.crawl("A", "D", 3).referrals.len(), 2);
        assert!(w.crawl("A", "D", 2).referrals.iter().all(|r| r.referee == id("B")));
    }

    #[test]
    fn untrusted_neighbours_not_queried() {
        let w = World::new(&[
            ("A", "B", ArcKind::Referral, 0.0),
            ("B", "C", ArcKind::Performance, 0.8),
        ]);
        assert!(w.crawl("A", "C", 4).referrals.is_empty());
    }

    #[test]
    fn tampered_answer_excluded() {
        let w = World::new(&[("A", "B", ArcKind::Referral, 0.9), ("B", "C", ArcKind::Performance, 0.8)]);
        let mgr = TrustManager::new(w.stores[&id("A")].clone());
        let (mut crawl, queue) = Crawl::start(&mgr, id("C"), MGA, 4);
        assert_eq!(queue, vec![id("B")]);
        let mut lines = w.answer(&id("B"), &id("C"));
        let last = lines[0].len() - 1;
        lines[0][last] = b'9';
        assert!(crawl.on_answer(&id("B"), &lines, &w.keys).is_empty());
        let res = crawl.finish();
        assert!(res.referrals.is_empty());
        assert_eq!(res.rejected, vec![(id("B"), RejectReason::BadSignature)]);
    }

    #[test]
    fn unsolicited_answers_ignored() {
        let w = World::new(&[("A", "B", ArcKind::Referral, 0.9), ("B", "C", ArcKind::Performance, 0.8)]);
        let mgr = TrustManager::new(w.stores[&id("A")].clone());
        let (mut crawl, _) = Crawl::start(&mgr, id("C"), MGA, 4);
        let lines = w.answer(&id("B"), &id("C"));
        crawl.on_answer(&id("Z"), &lines, &w.keys);
        let res = crawl.finish();
        assert!(res.referrals.is_empty());
        assert_eq!(res.unanswered, vec![id("B")]);
    }
}
