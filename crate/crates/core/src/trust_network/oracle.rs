//! Exhaustive reference evaluator for small graphs.
//!
//! Enumerates every simple path of any arc kind and context, keeps the ones
//! that satisfy the trust path rules, and aggregates them with its own
//! implementation of each strategy. It shares nothing with the manager's
//! search except [`validate_path`].

use std::collections::BTreeSet;

use crate::identity_model::EntityId;
use crate::trust_core::{TrustArc, TrustError, TrustGraph, TrustValue};

use super::{validate_path, AggregationStrategy, PathQuery, TrustPath};

pub const ORACLE_NODE_LIMIT: usize = 12;

/// All valid paths for `query` in the global graph, ordered by entity
/// sequence.
pub fn brute_force_paths(graph: &TrustGraph, query: &PathQuery) -> Result<Vec<TrustPath>, TrustError> {
    let mut nodes = graph.entities();
    nodes.insert(query.source.clone());
    nodes.insert(query.sink.clone());
    if nodes.len() > ORACLE_NODE_LIMIT {
        return Err(TrustError::GraphTooLarge {
            nodes: nodes.len(),
            limit: ORACLE_NODE_LIMIT,
        });
    }
    let all: Vec<&TrustArc> = graph.arcs().collect();
    let mut found = Vec::new();
    let mut stack = Vec::new();
    let mut on_path = BTreeSet::from([query.source.clone()]);
    walk(&all, query, &query.source, &mut stack, &mut on_path, &mut found);
    let mut valid: Vec<TrustPath> = found
        .into_iter()
        .map(|arcs| TrustPath {
            source: query.source.clone(),
            context: query.context.clone(),
            arcs,
        })
        .filter(|p| validate_path(p, &query.context, query.max_depth))
        .collect();
    valid.sort_by_key(sequence);
    Ok(valid)
}

fn walk(
    all: &[&TrustArc],
    query: &PathQuery,
    at: &EntityId,
    stack: &mut Vec<TrustArc>,
    on_path: &mut BTreeSet<EntityId>,
    found: &mut Vec<Vec<TrustArc>>,
) {
    if stack.len() == query.max_depth {
        return;
    }
    for arc in all.iter().filter(|a| &a.trustor == at) {
        if on_path.contains(&arc.trustee) {
            continue;
        }
        stack.push((*arc).clone());
        if arc.trustee == query.sink {
            found.push(stack.clone());
        } else {
            on_path.insert(arc.trustee.clone());
            walk(all, query, &arc.trustee, stack, on_path, found);
            on_path.remove(&arc.trustee);
        }
        stack.pop();
    }
}

fn sequence(path: &TrustPath) -> Vec<String> {
    std::iter::once(path.source.to_string())
        .chain(path.arcs.iter().map(|a| a.trustee.to_string()))
        .collect()
}

fn product(path: &TrustPath) -> f64 {
    let mut score = 1.0;
    for arc in &path.arcs {
        score *= arc.value.get();
    }
    score
}

/// Reference rating: a direct performance arc wins outright, otherwise the
/// strategy combines every valid path; no evidence is 0.
pub fn brute_force_oracle(
    graph: &TrustGraph,
    query: &PathQuery,
    strategy: AggregationStrategy,
) -> Result<TrustValue, TrustError> {
    let paths = brute_force_paths(graph, query)?;
    if let Some(direct) = paths.iter().find(|p| p.arcs.len() == 1) {
        return Ok(direct.arcs[0].value);
    }
    if paths.is_empty() {
        return Ok(TrustValue::ZERO);
    }
    let value = match strategy {
        AggregationStrategy::MaxPath => paths.iter().map(product).fold(0.0, f64::max),
        AggregationStrategy::ProbabilisticSumDisjoint => {
            let mut scored: Vec<(f64, Vec<String>, &TrustPath)> =
                paths.iter().map(|p| (product(p), sequence(p), p)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let mut taken: Vec<(String, String, String)> = Vec::new();
            let mut miss = 1.0;
            for (score, _, path) in scored {
                let keys: Vec<(String, String, String)> = path
                    .arcs
                    .iter()
                    .map(|a| (a.trustor.to_string(), a.trustee.to_string(), a.kind.to_string()))
                    .collect();
                if keys.iter().any(|k| taken.contains(k)) {
                    continue;
                }
                taken.extend(keys);
                miss *= 1.0 - score;
            }
            1.0 - miss
        }
    };
    Ok(TrustValue::saturating(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust_core::TrustContext;

    fn q(src: &str, sink: &str) -> PathQuery {
        PathQuery::new(
            EntityId::new(src).unwrap(),
            EntityId::new(sink).unwrap(),
            TrustContext::MakeGoodAssertions,
            4,
        )
        .unwrap()
    }

    #[test]
    fn three_node_graph() {
        let g = TrustGraph::parse(
            "arc A B MakeGoodAssertions referral 0.9\narc B C MakeGoodAssertions performance 0.8\n",
        )
        .unwrap();
        let v = brute_force_oracle(&g, &q("A", "C"), AggregationStrategy::MaxPath).unwrap();
        assert!((v.get() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn single_node_graph() {
        let g = TrustGraph::new();
        assert_eq!(brute_force_oracle(&g, &q("A", "A"), AggregationStrategy::MaxPath).unwrap().get(), 0.0);
    }

    #[test]
    fn complete_four_node_referral_graph() {
        let mut text = String::new();
        let names = ["A", "B", "C", "D"];
        for a in names {
            for b in names {
                if a != b {
                    text.push_str(&format!("arc {a} {b} MakeGoodAssertions referral 0.{}\n", a.len() + b.len() + 3));
                }
            }
        }
        text.push_str("arc C D MakeGoodAssertions performance 0.6\n");
        let g = TrustGraph::parse(&text).unwrap();
        let snapshot = super::super::TrustSnapshot::full_view(&g);
        for strategy in [AggregationStrategy::MaxPath, AggregationStrategy::ProbabilisticSumDisjoint] {
            let oracle = brute_force_oracle(&g, &q("A", "D"), strategy).unwrap();
            let eval = snapshot.evaluate(&EntityId::new("A").unwrap(), &EntityId::new("D").unwrap(), &TrustContext::MakeGoodAssertions, strategy, 4);
            assert_eq!(eval.rating.value, oracle);
            assert!(oracle.get() > 0.0);
        }
    }

    #[test]
    fn node_limit() {
        let text: String = (0..13)
            .map(|i| format!("arc n{i} n{} GoodIntentions referral 0.5\n", i + 1))
            .collect();
        let g = TrustGraph::parse(&text).unwrap();
        assert!(matches!(
            brute_force_oracle(&g, &q("n0", "n1"), AggregationStrategy::MaxPath),
            Err(TrustError::GraphTooLarge { .. })
        ));
    }
}
