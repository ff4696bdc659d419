//! The trust manager: transitive path discovery over direct arcs and
//! verified referrals, path aggregation, and per-(trustee, context) ratings.
//!
//! A trust path is a chain of same-context referral arcs ending in exactly
//! one performance arc. Path scores multiply arc values; paths are combined
//! by a pluggable [`AggregationStrategy`]. Direct performance trust takes
//! precedence over transitive evidence.

pub mod crawl;
pub mod oracle;
mod referral;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::identity_model::{EntityId, KeyRegistry};
use crate::trust_core::{ArcId, ArcKind, TrustArc, TrustContext, TrustError, TrustGraph, TrustStore, TrustValue};

pub use referral::{answer_query, verify_referral, Referral, RejectReason};

pub const DEFAULT_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathQuery {
    pub source: EntityId,
    pub sink: EntityId,
    pub context: TrustContext,
    pub max_depth: usize,
}

impl PathQuery {
    pub fn new(source: EntityId, sink: EntityId, context: TrustContext, max_depth: usize) -> Result<Self, TrustError> {
        if max_depth == 0 {
            return Err(TrustError::InvalidDepth);
        }
        Ok(PathQuery {
            source,
            sink,
            context,
            max_depth,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustPath {
    pub source: EntityId,
    pub context: TrustContext,
    pub arcs: Vec<TrustArc>,
}

impl TrustPath {
    pub fn sink(&self) -> Option<&EntityId> {
        self.arcs.last().map(|a| &a.trustee)
    }

    /// Source followed by each arc's trustee.
    pub fn entities(&self) -> Vec<&EntityId> {
        std::iter::once(&self.source)
            .chain(self.arcs.iter().map(|a| &a.trustee))
            .collect()
    }

    /// Entities strictly between source and sink.
    pub fn referees(&self) -> Vec<&EntityId> {
        let n = self.arcs.len();
        self.arcs.iter().take(n.saturating_sub(1)).map(|a| &a.trustee).collect()
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    fn order_key(&self) -> Vec<&str> {
        self.entities().into_iter().map(EntityId::as_str).collect()
    }
}

impl fmt::Display for TrustPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hops: Vec<&str> = self.entities().into_iter().map(EntityId::as_str).collect();
        f.write_str(&hops.join(">"))
    }
}

/// True iff the path is a simple, chained, same-context run of referral arcs
/// closed by one performance arc, no longer than `max_depth`.
pub fn validate_path(path: &TrustPath, context: &TrustContext, max_depth: usize) -> bool {
    let n = path.arcs.len();
    if n == 0 || n > max_depth || &path.context != context {
        return false;
    }
    if path.arcs[0].trustor != path.source {
        return false;
    }
    let mut seen = BTreeSet::from([&path.source]);
    for (i, arc) in path.arcs.iter().enumerate() {
        if &arc.context != context {
            return false;
        }
        if i > 0 && path.arcs[i - 1].trustee != arc.trustor {
            return false;
        }
        let expected = if i + 1 == n { ArcKind::Performance } else { ArcKind::Referral };
        if arc.kind != expected {
            return false;
        }
        if !seen.insert(&arc.trustee) {
            return false;
        }
    }
    true
}

/// Product of arc values along a valid path.
pub fn path_score(path: &TrustPath) -> Result<TrustValue, TrustError> {
    if !validate_path(path, &path.context, usize::MAX) {
        return Err(TrustError::InvalidPath);
    }
    Ok(raw_score(path))
}

fn raw_score(path: &TrustPath) -> TrustValue {
    TrustValue::saturating(path.arcs.iter().fold(1.0, |acc, arc| acc * arc.value.get()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationStrategy {
    /// Score of the best single path.
    #[default]
    MaxPath,
    /// `1 - prod(1 - s)` over arc-disjoint paths picked greedily by score.
    ProbabilisticSumDisjoint,
}

impl FromStr for AggregationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(AggregationStrategy::MaxPath),
            "psum" => Ok(AggregationStrategy::ProbabilisticSumDisjoint),
            other => Err(format!("unknown strategy `{other}` (expected max or psum)")),
        }
    }
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationStrategy::MaxPath => "max",
            AggregationStrategy::ProbabilisticSumDisjoint => "psum",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub value: TrustValue,
    /// Indices into the input of the paths that determined `value`.
    pub contributing: Vec<usize>,
}

pub fn aggregate(paths: &[TrustPath], strategy: AggregationStrategy) -> Result<TrustValue, TrustError> {
    aggregate_detailed(paths, strategy).map(|a| a.value)
}

pub fn aggregate_detailed(paths: &[TrustPath], strategy: AggregationStrategy) -> Result<Aggregation, TrustError> {
    let Some(first) = paths.first() else {
        return Ok(Aggregation {
            value: TrustValue::ZERO,
            contributing: Vec::new(),
        });
    };
    for path in paths {
        if path.source != first.source || path.context != first.context || path.sink() != first.sink() {
            return Err(TrustError::MixedQuery);
        }
        if !validate_path(path, &path.context, usize::MAX) {
            return Err(TrustError::InvalidPath);
        }
    }
    let scores: Vec<TrustValue> = paths.iter().map(raw_score).collect();
    match strategy {
        AggregationStrategy::MaxPath => {
            let best = scores.iter().copied().max().expect("non-empty");
            let contributing = (0..paths.len()).filter(|&i| scores[i] == best).collect();
            Ok(Aggregation {
                value: best,
                contributing,
            })
        }
        AggregationStrategy::ProbabilisticSumDisjoint => {
            let mut order: Vec<usize> = (0..paths.len()).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .cmp(&scores[a])
                    .then_with(|| paths[a].order_key().cmp(&paths[b].order_key()))
            });
            let mut used: BTreeSet<(&EntityId, &EntityId, ArcKind)> = BTreeSet::new();
            let mut remaining = 1.0;
            let mut contributing = Vec::new();
            for i in order {
                let arcs: Vec<_> = paths[i].arcs.iter().map(|a| (&a.trustor, &a.trustee, a.kind)).collect();
                if arcs.iter().any(|k| used.contains(k)) {
                    continue;
                }
                used.extend(arcs);
                remaining *= 1.0 - scores[i].get();
                contributing.push(i);
            }
            Ok(Aggregation {
                value: TrustValue::saturating(1.0 - remaining),
                contributing,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Direct,
    Transitive { paths: usize },
    /// No evidence at all; never satisfies a threshold.
    None,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Direct => f.write_str("direct"),
            Basis::Transitive { .. } => f.write_str("transitive"),
            Basis::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRating {
    pub trustee: EntityId,
    pub context: TrustContext,
    pub value: TrustValue,
    pub basis: Basis,
}

impl TrustRating {
    /// `basis != None && value >= threshold`.
    pub fn meets(&self, threshold: TrustValue) -> bool {
        self.basis != Basis::None && self.value >= threshold
    }
}

/// A rating together with the evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rating: TrustRating,
    pub paths: Vec<TrustPath>,
    pub contributing: Vec<usize>,
}

impl Evaluation {
    /// Intermediate entities on the paths that determined the rating.
    pub fn contributing_referees(&self) -> Vec<EntityId> {
        let set: BTreeSet<&EntityId> = self
            .contributing
            .iter()
            .flat_map(|&i| self.paths[i].referees())
            .collect();
        set.into_iter().cloned().collect()
    }
}

/// An immutable set of arcs visible to one evaluator.
#[derive(Debug, Clone, Default)]
pub struct TrustSnapshot {
    by_trustor: BTreeMap<EntityId, Vec<TrustArc>>,
}

impl TrustSnapshot {
    pub fn from_arcs<'a>(arcs: impl IntoIterator<Item = &'a TrustArc>) -> Self {
        let mut unique: BTreeMap<ArcId, TrustArc> = BTreeMap::new();
        for arc in arcs {
            unique.insert(arc.id(), arc.clone());
        }
        let mut by_trustor: BTreeMap<EntityId, Vec<TrustArc>> = BTreeMap::new();
        for (_, arc) in unique {
            by_trustor.entry(arc.trustor.clone()).or_default().push(arc);
        }
        TrustSnapshot { by_trustor }
    }

    /// Every arc of the graph, as if all referrals had been gathered.
    pub fn full_view(graph: &TrustGraph) -> Self {
        Self::from_arcs(graph.arcs())
    }

    pub fn arcs(&self) -> impl Iterator<Item = &TrustArc> {
        self.by_trustor.values().flatten()
    }

    pub fn direct(&self, source: &EntityId, trustee: &EntityId, context: &TrustContext) -> Option<&TrustArc> {
        self.by_trustor.get(source)?.iter().find(|a| {
            &a.trustee == trustee && &a.context == context && a.kind == ArcKind::Performance
        })
    }

    /// All valid paths for the query, ordered lexicographically by entity
    /// sequence.
    pub fn discover_paths(&self, query: &PathQuery) -> Vec<TrustPath> {
        let mut out = Vec::new();
        let mut stack: Vec<&TrustArc> = Vec::new();
        let mut visited = BTreeSet::from([&query.source]);
        self.extend(query, &query.source, &mut stack, &mut visited, &mut out);
        out.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        out
    }

    fn extend<'a>(
        &'a self,
        query: &PathQuery,
        at: &'a EntityId,
        stack: &mut Vec<&'a TrustArc>,
        visited: &mut BTreeSet<&'a EntityId>,
        out: &mut Vec<TrustPath>,
    ) {
        if stack.len() >= query.max_depth {
            return;
        }
        let Some(arcs) = self.by_trustor.get(at) else {
            return;
        };
        for arc in arcs.iter().filter(|a| a.context == query.context) {
            if visited.contains(&arc.trustee) {
                continue;
            }
            match arc.kind {
                ArcKind::Performance if arc.trustee == query.sink => {
                    stack.push(arc);
                    out.push(TrustPath {
                        source: query.source.clone(),
                        context: query.context.clone(),
                        arcs: stack.iter().map(|a| (*a).clone()).collect(),
                    });
                    stack.pop();
                }
                ArcKind::Referral if arc.trustee != query.sink && stack.len() + 1 < query.max_depth => {
                    stack.push(arc);
                    visited.insert(&arc.trustee);
                    self.extend(query, &arc.trustee, stack, visited, out);
                    visited.remove(&arc.trustee);
                    stack.pop();
                }
                _ => {}
            }
        }
    }

    pub fn evaluate(
        &self,
        source: &EntityId,
        trustee: &EntityId,
        context: &TrustContext,
        strategy: AggregationStrategy,
        max_depth: usize,
    ) -> Evaluation {
        let none = |paths| Evaluation {
            rating: TrustRating {
                trustee: trustee.clone(),
                context: context.clone(),
                value: TrustValue::ZERO,
                basis: Basis::None,
            },
            paths,
            contributing: Vec::new(),
        };
        if source == trustee || max_depth == 0 {
            return none(Vec::new());
        }
        if let Some(arc) = self.direct(source, trustee, context) {
            return Evaluation {
                rating: TrustRating {
                    trustee: trustee.clone(),
                    context: context.clone(),
                    value: arc.value,
                    basis: Basis::Direct,
                },
                paths: vec![TrustPath {
                    source: source.clone(),
                    context: context.clone(),
                    arcs: vec![arc.clone()],
                }],
                contributing: vec![0],
            };
        }
        let query = PathQuery {
            source: source.clone(),
            sink: trustee.clone(),
            context: context.clone(),
            max_depth,
        };
        let paths = self.discover_paths(&query);
        if paths.is_empty() {
            return none(paths);
        }
        let agg = aggregate_detailed(&paths, strategy).expect("discovered paths share one query");
        Evaluation {
            rating: TrustRating {
                trustee: trustee.clone(),
                context: context.clone(),
                value: agg.value,
                basis: Basis::Transitive { paths: paths.len() },
            },
            paths,
            contributing: agg.contributing,
        }
    }
}

/// One entity's trust manager: its own store plus the verified referrals it
/// has gathered from others.
#[derive(Debug, Clone)]
pub struct TrustManager {
    store: TrustStore,
    referrals: BTreeMap<ArcId, Referral>,
    pub max_depth: usize,
    pub strategy: AggregationStrategy,
}

impl TrustManager {
    pub fn new(store: TrustStore) -> Self {
        TrustManager {
            store,
            referrals: BTreeMap::new(),
            max_depth: DEFAULT_MAX_DEPTH,
            strategy: AggregationStrategy::default(),
        }
    }

    pub fn owner(&self) -> &EntityId {
        self.store.owner()
    }

    pub fn store(&self) -> &TrustStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut TrustStore {
        &mut self.store
    }

    pub fn referrals(&self) -> impl Iterator<Item = &Referral> {
        self.referrals.values()
    }

    pub fn clear_referrals(&mut self) {
        self.referrals.clear();
    }

    /// Verifies and caches a referral, replacing any earlier statement for
    /// the same arc.
    pub fn accept_referral(&mut self, referral: Referral, keys: &KeyRegistry) -> Result<(), RejectReason> {
        verify_referral(&referral, keys)?;
        if &referral.referee == self.owner() {
            return Err(RejectReason::OwnStatement);
        }
        self.referrals.insert(referral.statement.id(), referral);
        Ok(())
    }

    pub fn accept_wire(&mut self, bytes: &[u8], keys: &KeyRegistry) -> Result<(), RejectReason> {
        let referral = Referral::decode(bytes)?;
        self.accept_referral(referral, keys)
    }

    pub fn has_direct(&self, trustee: &EntityId, context: &TrustContext) -> bool {
        self.store.direct_rating(trustee, context, ArcKind::Performance).is_some()
    }

    pub fn snapshot(&self) -> TrustSnapshot {
        TrustSnapshot::from_arcs(
            self.store
                .arcs()
                .chain(self.referrals.values().map(|r| &r.statement)),
        )
    }

    pub fn discover_paths(&self, query: &PathQuery) -> Vec<TrustPath> {
        self.snapshot().discover_paths(query)
    }

    pub fn evaluate_detailed(&self, trustee: &EntityId, context: &TrustContext) -> Evaluation {
        self.snapshot()
            .evaluate(self.owner(), trustee, context, self.strategy, self.max_depth)
    }

    pub fn evaluate_trust(&self, trustee: &EntityId, context: &TrustContext) -> TrustRating {
        self.evaluate_detailed(trustee, context).rating
    }
}

/// Paths ordered by descending score, ties by entity sequence.
pub fn rank_paths(paths: &[TrustPath]) -> Vec<(usize, TrustValue)> {
    let mut ranked: Vec<(usize, TrustValue)> = paths.iter().map(raw_score).enumerate().collect();
    ranked.sort_by(|a, b| match b.1.cmp(&a.1) {
        Ordering::Equal => paths[a.0].order_key().cmp(&paths[b.0].order_key()),
        other => other,
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn arc(a: &str, b: &str, kind: ArcKind, v: f64) -> TrustArc {
        TrustArc::new(id(a), id(b), TrustContext::MakeGoodAssertions, kind, v).unwrap()
    }

    const R: ArcKind = ArcKind::Referral;
    const P: ArcKind = ArcKind::Performance;
    const MGA: TrustContext = TrustContext::MakeGoodAssertions;

    fn query(a: &str, b: &str, depth: usize) -> PathQuery {
        PathQuery::new(id(a), id(b), MGA, depth).unwrap()
    }

    fn path(src: &str, arcs: Vec<TrustArc>) -> TrustPath {
        TrustPath {
            source: id(src),
            context: MGA,
            arcs,
        }
    }

    #[test]
    fn three_node_chain() {
        let snap = TrustSnapshot::from_arcs(&[arc("A", "B", R, 0.9), arc("B", "C", P, 0.8)]);
        let paths = snap.discover_paths(&query("A", "C", 4));
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].to_string(), "A>B>C");
        assert!((path_score(&paths[0]).unwrap().get() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_has_no_paths() {
        assert!(TrustSnapshot::default().discover_paths(&query("A", "C", 4)).is_empty());
    }

    #[test]
    fn non_terminal_performance_breaks_chain() {
        let snap = TrustSnapshot::from_arcs(&[arc("A", "B", P, 0.9), arc("B", "C", P, 0.8)]);
        assert!(snap.discover_paths(&query("A", "C", 4)).is_empty());
    }

    #[test]
    fn depth_bound() {
        let snap = TrustSnapshot::from_arcs(&[arc("A", "B", R, 0.9), arc("B", "C", R, 0.9), arc("C", "D", P, 0.9)]);
        assert!(snap.discover_paths(&query("A", "D", 2)).is_empty());
        assert_eq!(snap.discover_paths(&query("A", "D", 3)).len(), 1);
        assert!(PathQuery::new(id("A"), id("D"), MGA, 0).is_err());
    }

    #[test]
    fn validate_path_rules() {
        let good = path("A", vec![arc("A", "B", R, 0.9), arc("B", "C", R, 0.9), arc("C", "D", P, 0.5)]);
        assert!(validate_path(&good, &MGA, 3));
        assert!(!validate_path(&good, &MGA, 2));
        assert!(!validate_path(&good, &TrustContext::MaintainPrivacy, 3));
        let repeated = path("A", vec![arc("A", "B", R, 0.9), arc("B", "A", R, 0.9), arc("A", "D", P, 0.5)]);
        assert!(!validate_path(&repeated, &MGA, 4));
        let referral_end = path("A", vec![arc("A", "B", R, 0.9), arc("B", "C", R, 0.9)]);
        assert!(!validate_path(&referral_end, &MGA, 4));
        let broken = path("A", vec![arc("A", "B", R, 0.9), arc("C", "D", P, 0.9)]);
        assert!(!validate_path(&broken, &MGA, 4));
        let wrong_source = path("Z", vec![arc("A", "B", P, 0.9)]);
        assert!(!validate_path(&wrong_source, &MGA, 4));
        assert!(!validate_path(&path("A", vec![]), &MGA, 4));
        let mixed = path(
            "A",
            vec![
                arc("A", "B", R, 0.9),
                TrustArc::new(id("B"), id("C"), TrustContext::MaintainPrivacy, P, 0.9).unwrap(),
            ],
        );
        assert!(!validate_path(&mixed, &MGA, 4));
    }

    #[test]
    fn scores() {
        assert_eq!(path_score(&path("A", vec![arc("A", "B", P, 0.5)])).unwrap().get(), 0.5);
        let zero = path("A", vec![arc("A", "B", R, 0.0), arc("B", "C", P, 0.9)]);
        assert_eq!(path_score(&zero).unwrap().get(), 0.0);
        let invalid = path("A", vec![arc("A", "B", R, 0.5)]);
        assert_eq!(path_score(&invalid), Err(TrustError::InvalidPath));
    }

    #[test]
    fn aggregation() {
        let p1 = path("A", vec![arc("A", "B", R, 0.9), arc("B", "D", P, 0.8)]);
        let p2 = path("A", vec![arc("A", "C", R, 0.5), arc("C", "D", P, 1.0)]);
        let max = aggregate(&[p1.clone(), p2.clone()], AggregationStrategy::MaxPath).unwrap();
        assert!((max.get() - 0.72).abs() < 1e-12);
        let q1 = path("A", vec![arc("A", "B", R, 0.5), arc("B", "D", P, 1.0)]);
        let q2 = path("A", vec![arc("A", "C", R, 1.0), arc("C", "D", P, 0.5)]);
        let psum = aggregate(&[q1, q2], AggregationStrategy::ProbabilisticSumDisjoint).unwrap();
        assert_eq!(psum.get(), 0.75);
        assert_eq!(aggregate(&[], AggregationStrategy::MaxPath).unwrap().get(), 0.0);
        assert_eq!(aggregate(&[], AggregationStrategy::ProbabilisticSumDisjoint).unwrap().get(), 0.0);
        let other_sink = path("A", vec![arc("A", "E", P, 0.5)]);
        assert_eq!(
            aggregate(&[p1, other_sink], AggregationStrategy::MaxPath),
            Err(TrustError::MixedQuery)
        );
    }

    #[test]
    fn psum_skips_shared_arcs() {
        // Both paths share A->B; only the better one counts.
        let p1 = path("A", vec![arc("A", "B", R, 0.9), arc("B", "D", P, 0.8)]);
        let p2 = path(
            "A",
            vec![arc("A", "B", R, 0.9), arc("B", "C", R, 0.5), arc("C", "D", P, 0.5)],
        );
        let agg = aggregate_detailed(&[p2, p1], AggregationStrategy::ProbabilisticSumDisjoint).unwrap();
        assert_eq!(agg.contributing, vec![1]);
        assert!((agg.value.get() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn direct_takes_precedence() {
        let snap = TrustSnapshot::from_arcs(&[
            arc("A", "C", P, 0.6),
            arc("A", "B", R, 1.0),
            arc("B", "C", P, 0.9),
        ]);
        let eval = snap.evaluate(&id("A"), &id("C"), &MGA, AggregationStrategy::MaxPath, 4);
        assert_eq!(eval.rating.value.get(), 0.6);
        assert_eq!(eval.rating.basis, Basis::Direct);
        // Both routes exist; the transitive one alone would score 0.9.
        let all = snap.discover_paths(&query("A", "C", 4));
        assert_eq!(all.len(), 2);
        assert_eq!(aggregate(&all[..1], AggregationStrategy::MaxPath).unwrap().get(), 0.9);
    }

    #[test]
    fn transitive_and_none() {
        let snap = TrustSnapshot::from_arcs(&[arc("A", "B", R, 0.9), arc("B", "C", P, 0.8)]);
        let eval = snap.evaluate(&id("A"), &id("C"), &MGA, AggregationStrategy::MaxPath, 4);
        assert_eq!(eval.rating.basis, Basis::Transitive { paths: 1 });
        assert!((eval.rating.value.get() - 0.72).abs() < 1e-12);
        assert_eq!(eval.contributing_referees(), vec![id("B")]);
        let isolated = snap.evaluate(&id("A"), &id("Z"), &MGA, AggregationStrategy::MaxPath, 4);
        assert_eq!(isolated.rating.basis, Basis::None);
        assert!(!isolated.rating.meets(TrustValue::ZERO));
    }

    #[test]
    fn manager_rejects_bad_referrals() {
        use crate::identity_model::derive_signing_key;
        let mut keys = KeyRegistry::new();
        for n in ["A", "B"] {
            keys.register(id(n), derive_signing_key(1, &id(n)).verifying_key());
        }
        let mut store = TrustStore::new(id("A"));
        store.record_arc(arc("A", "B", R, 0.9)).unwrap();
        let mut mgr = TrustManager::new(store);
        let good = Referral::sign(arc("B", "C", P, 0.8), &derive_signing_key(1, &id("B")));
        let forged = Referral::sign(arc("B", "C", P, 1.0), &derive_signing_key(1, &id("A")));
        assert!(mgr.accept_referral(forged, &keys).is_err());
        assert_eq!(mgr.evaluate_trust(&id("C"), &MGA).basis, Basis::None);
        mgr.accept_referral(good, &keys).unwrap();
        let own = Referral::sign(arc("A", "C", P, 1.0), &derive_signing_key(1, &id("A")));
        assert_eq!(mgr.accept_referral(own, &keys), Err(RejectReason::OwnStatement));
        let rating = mgr.evaluate_trust(&id("C"), &MGA);
        assert_eq!(rating.basis, Basis::Transitive { paths: 1 });
    }
}
