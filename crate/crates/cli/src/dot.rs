//! Graphviz export of trust graphs and a reader for the edges it writes.
//!
//! Performance arcs are solid, referral arcs dashed, and every edge is
//! labelled `context:value`. Nodes and edges come out in sorted order.

use std::collections::{BTreeMap, BTreeSet};

use trustweave_core::{ArcKind, EntityId, TrustArc, TrustContext, TrustGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot<'a>(arcs: impl IntoIterator<Item = &'a TrustArc>, extra_nodes: &[EntityId]) -> String {
    let arcs: Vec<&TrustArc> = arcs.into_iter().collect();
    let mut nodes: BTreeSet<&EntityId> = extra_nodes.iter().collect();
    for a in &arcs {
        nodes.insert(&a.trustor);
        nodes.insert(&a.trustee);
    }
    let mut out = String::from("digraph trust {\n");
    for n in nodes {
        out.push_str(&format!("  {};\n", quote(n.as_str())));
    }
    for a in arcs {
        let style = match a.kind {
            ArcKind::Performance => "solid",
            ArcKind::Referral => "dashed",
        };
        out.push_str(&format!(
            "  {} -> {} [label={}, style={}];\n",
            quote(a.trustor.as_str()),
            quote(a.trustee.as_str()),
            quote(&format!("{}:{}", a.context, a.value)),
            style
        ));
    }
    out.push_str("}\n");
    out
}

/// Arcs reachable from `source` in `context`: referral arcs are followed
/// while another hop still fits in `max_depth`, performance arcs end a walk.
pub fn reachable_subgraph(graph: &TrustGraph, source: &EntityId, context: &TrustContext, max_depth: usize) -> Vec<TrustArc> {
    let mut level: BTreeMap<EntityId, usize> = BTreeMap::from([(source.clone(), 0)]);
    let mut frontier = vec![source.clone()];
    let mut picked = BTreeMap::new();
    while let Some(at) = frontier.pop() {
        let depth = level[&at];
        if depth >= max_depth {
            continue;
        }
        for arc in graph.arcs_from(&at).filter(|a| &a.context == context) {
            match arc.kind {
                ArcKind::Performance => {
                    picked.insert(arc.id(), arc.clone());
                }
                ArcKind::Referral if depth + 1 < max_depth => {
                    picked.insert(arc.id(), arc.clone());
                    let known = level.get(&arc.trustee).copied();
                    if known.is_none_or(|d| d > depth + 1) {
                        level.insert(arc.trustee.clone(), depth + 1);
                        frontier.push(arc.trustee.clone());
                    }
                }
                ArcKind::Referral => {}
            }
        }
    }
    picked.into_values().collect()
}

fn unquote(s: &str) -> Option<String> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(chars.next()?);
        } else {
            out.push(c);
        }
    }
    Some(out)
}

/// Reads back the edge lines of [`to_dot`] output.
pub fn parse_dot_edges(text: &str) -> Result<Vec<TrustArc>, String> {
    let mut arcs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        let Some((lhs, attrs)) = line.split_once(" [") else {
            continue;
        };
        let Some((from, to)) = lhs.split_once(" -> ") else {
            continue;
        };
        let bad = |what: &str| format!("line {}: {what}", i + 1);
        let attrs = attrs.strip_suffix("];").ok_or_else(|| bad("unterminated attributes"))?;
        let (label, style) = attrs
            .strip_prefix("label=")
            .and_then(|r| r.rsplit_once(", style="))
            .ok_or_else(|| bad("expected label and style"))?;
        let label = unquote(label).ok_or_else(|| bad("bad label"))?;
        let (ctx, value) = label.rsplit_once(':').ok_or_else(|| bad("label is not context:value"))?;
        let kind = match style {
            "solid" => ArcKind::Performance,
            "dashed" => ArcKind::Referral,
            _ => return Err(bad("unknown style")),
        };
        let entity = |s: &str| {
            unquote(s)
                .and_then(|n| EntityId::new(n).ok())
                .ok_or_else(|| bad("bad node name"))
        };
        let context: TrustContext = ctx.parse().map_err(|_| bad("unknown context"))?;
        let value: f64 = value.parse().map_err(|_| bad("bad value"))?;
        arcs.push(TrustArc::new(entity(from)?, entity(to)?, context, kind, value).map_err(|e| bad(&e.to_string()))?);
    }
    Ok(arcs)
}
