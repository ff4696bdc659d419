//! Trust graph text format.
//!
//! One record per line:
//!
//! ```text
//! arc <trustor> <trustee> <context> <performance|referral[:targetContext]> <value>
//! ```
//!
//! `#` starts a comment. When a referral kind names its target context it
//! must match the context column; the canonical form omits it.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{ArcId, ArcKind, TrustArc, TrustContext};
use crate::identity_model::EntityId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct GraphParseError {
    pub line: usize,
    pub message: String,
}

impl GraphParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        GraphParseError {
            line,
            message: message.into(),
        }
    }
}

/// A global view of arcs, at most one per (trustor, trustee, context, kind).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustGraph {
    arcs: BTreeMap<ArcId, TrustArc>,
}

impl TrustGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, GraphParseError> {
        Self::parse_inner(text, None)
    }

    /// Parses and rejects any arc whose endpoints are not in `known`.
    pub fn parse_checked(text: &str, known: &BTreeSet<EntityId>) -> Result<Self, GraphParseError> {
        Self::parse_inner(text, Some(known))
    }

    fn parse_inner(text: &str, known: Option<&BTreeSet<EntityId>>) -> Result<Self, GraphParseError> {
        let mut graph = TrustGraph::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let arc = parse_record(content).map_err(|m| GraphParseError::at(line, m))?;
            if let Some(known) = known {
                for end in [&arc.trustor, &arc.trustee] {
                    if !known.contains(end) {
                        return Err(GraphParseError::at(line, format!("unknown entity `{end}`")));
                    }
                }
            }
            let id = arc.id();
            if graph.arcs.contains_key(&id) {
                return Err(GraphParseError::at(
                    line,
                    format!("duplicate arc {} -> {} {} {}", id.trustor, id.trustee, id.context, id.kind),
                ));
            }
            graph.arcs.insert(id, arc);
        }
        Ok(graph)
    }

    /// Inserts or replaces.
    pub fn insert(&mut self, arc: TrustArc) -> Option<TrustArc> {
        self.arcs.insert(arc.id(), arc)
    }

    pub fn remove(&mut self, id: &ArcId) -> Option<TrustArc> {
        self.arcs.remove(id)
    }

    pub fn get(&self, id: &ArcId) -> Option<&TrustArc> {
        self.arcs.get(id)
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Arcs in `ArcId` order.
    pub fn arcs(&self) -> impl Iterator<Item = &TrustArc> {
        self.arcs.values()
    }

    pub fn arcs_from<'a>(&'a self, trustor: &'a EntityId) -> impl Iterator<Item = &'a TrustArc> + 'a {
        self.arcs.values().filter(move |a| &a.trustor == trustor)
    }

    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.arcs
            .values()
            .flat_map(|a| [a.trustor.clone(), a.trustee.clone()])
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for arc in self.arcs.values() {
            out.push_str(&arc.to_record());
            out.push('\n');
        }
        out
    }
}

impl FromIterator<TrustArc> for TrustGraph {
    fn from_iter<I: IntoIterator<Item = TrustArc>>(iter: I) -> Self {
        let mut graph = TrustGraph::new();
        for arc in iter {
            graph.insert(arc);
        }
        graph
    }
}

/// Parses a single `arc ...` record, already stripped of comments.
pub(crate) fn parse_record(content: &str) -> Result<TrustArc, String> {
    let fields: Vec<&str> = content.split_whitespace().collect();
    match fields.first() {
        Some(&"arc") => {}
        Some(other) => return Err(format!("unknown record `{other}`")),
        None => return Err("empty record".into()),
    }
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let trustor = EntityId::new(fields[1]).map_err(|e| e.to_string())?;
    let trustee = EntityId::new(fields[2]).map_err(|e| e.to_string())?;
    let context: TrustContext = fields[3].parse().map_err(|e: super::UnknownContext| e.to_string())?;
    if context.is_referral() {
        return Err(format!("context column must be a base context, found {context}"));
    }
    let kind = match fields[4] {
        "performance" => ArcKind::Performance,
        "referral" => ArcKind::Referral,
        other => match other.strip_prefix("referral:") {
            Some(target) => {
                let target: TrustContext =
                    target.parse().map_err(|e: super::UnknownContext| e.to_string())?;
                if target != context {
                    return Err(format!("referral target {target} does not match context {context}"));
                }
                ArcKind::Referral
            }
            None => return Err(format!("unknown arc kind `{other}`")),
        },
    };
    let value: f64 = fields[5]
        .parse()
        .map_err(|_| format!("value `{}` is not a decimal", fields[5]))?;
    TrustArc::new(trustor, trustee, context, kind, value).map_err(|e| e.to_string())
}
