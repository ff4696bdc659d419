//! Local trust state of one entity: the contextual arcs it holds as trustor
//! and the rules that evolve them from experience.

pub(crate) mod graph;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity_model::EntityId;

pub use graph::{GraphParseError, TrustGraph};

/// Logical simulation time.
pub type Tick = u64;

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_REFEREE_PENALTY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("arc trustor {found} does not own store {expected}")]
    OwnerMismatch { expected: EntityId, found: EntityId },
    #[error("trust value {0} outside [0, 1]")]
    InvalidValue(f64),
    #[error("entity {0} cannot hold trust in itself")]
    SelfArc(EntityId),
    #[error("referral context cannot be used here: {0}")]
    ReferralContext(TrustContext),
    #[error("invalid update parameter {name}={value}")]
    InvalidParams { name: &'static str, value: f64 },
    #[error("path violates trust path invariants")]
    InvalidPath,
    #[error("paths disagree on source, sink or context")]
    MixedQuery,
    #[error("maximum depth must be at least 1")]
    InvalidDepth,
    #[error("graph has {nodes} nodes, oracle limit is {limit}")]
    GraphTooLarge { nodes: usize, limit: usize },
}

/// A trust rating on the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TrustValue(f64);

impl TrustValue {
    pub const ZERO: TrustValue = TrustValue(0.0);
    pub const ONE: TrustValue = TrustValue(1.0);

    pub fn new(value: f64) -> Result<Self, TrustError> {
        if (0.0..=1.0).contains(&value) {
            // Adding zero folds -0.0 into 0.0 so equality, order and hash agree.
            Ok(TrustValue(value + 0.0))
        } else {
            Err(TrustError::InvalidValue(value))
        }
    }

    /// Clamps into range; NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            TrustValue(0.0)
        } else {
            TrustValue(value.clamp(0.0, 1.0) + 0.0)
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Eq for TrustValue {}

impl std::hash::Hash for TrustValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for TrustValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TrustValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for TrustValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Shortest representation that round-trips through `f64::from_str`.
        write!(f, "{}", self.0)
    }
}

impl<'de> Deserialize<'de> for TrustValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        TrustValue::new(v).map_err(serde::de::Error::custom)
    }
}

/// Scope in which a rating is meaningful.
///
/// `Referral(target)` is the meta-context of trust in someone's
/// recommendations about `target`; it never nests.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrustContext {
    IdentityProvision,
    SelfAssertionResponsibility,
    MakeGoodAssertions,
    MaintainPrivacy,
    GoodIntentions,
    Custom(String),
    Referral(Box<TrustContext>),
}

impl TrustContext {
    pub fn referral(target: TrustContext) -> Result<Self, TrustError> {
        if target.is_referral() {
            return Err(TrustError::ReferralContext(target));
        }
        Ok(TrustContext::Referral(Box::new(target)))
    }

    pub fn is_referral(&self) -> bool {
        matches!(self, TrustContext::Referral(_))
    }

    /// Case-insensitive parse that also accepts snake/kebab spellings, for
    /// command-line use. File formats use the strict `FromStr`.
    pub fn parse_loose(s: &str) -> Result<Self, UnknownContext> {
        if let Ok(ctx) = s.parse() {
            return Ok(ctx);
        }
        let folded: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        let ctx = match folded.as_str() {
            "identityprovision" => TrustContext::IdentityProvision,
            "selfassertionresponsibility" => TrustContext::SelfAssertionResponsibility,
            "makegoodassertions" => TrustContext::MakeGoodAssertions,
            "maintainprivacy" => TrustContext::MaintainPrivacy,
            "goodintentions" => TrustContext::GoodIntentions,
            _ => return Err(UnknownContext(s.to_string())),
        };
        Ok(ctx)
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown trust context `{0}`")]
pub struct UnknownContext(pub String);

impl FromStr for TrustContext {
    type Err = UnknownContext;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ctx = match s {
            "IdentityProvision" => TrustContext::IdentityProvision,
            "SelfAssertionResponsibility" => TrustContext::SelfAssertionResponsibility,
            "MakeGoodAssertions" => TrustContext::MakeGoodAssertions,
            "MaintainPrivacy" => TrustContext::MaintainPrivacy,
            "GoodIntentions" => TrustContext::GoodIntentions,
            _ => {
                if let Some(label) = s.strip_prefix("custom:") {
                    if valid_label(label) {
                        return Ok(TrustContext::Custom(label.to_string()));
                    }
                } else if let Some(inner) = s
                    .strip_prefix("Referral(")
                    .and_then(|rest| rest.strip_suffix(')'))
                {
                    let target: TrustContext = inner.parse()?;
                    return TrustContext::referral(target).map_err(|_| UnknownContext(s.into()));
                }
                return Err(UnknownContext(s.to_string()));
            }
        };
        Ok(ctx)
    }
}

impl fmt::Display for TrustContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrustContext::IdentityProvision => f.write_str("IdentityProvision"),
            TrustContext::SelfAssertionResponsibility => f.write_str("SelfAssertionResponsibility"),
            TrustContext::MakeGoodAssertions => f.write_str("MakeGoodAssertions"),
            TrustContext::MaintainPrivacy => f.write_str("MaintainPrivacy"),
            TrustContext::GoodIntentions => f.write_str("GoodIntentions"),
            TrustContext::Custom(label) => write!(f, "custom:{label}"),
            TrustContext::Referral(target) => write!(f, "Referral({target})"),
        }
    }
}

impl Serialize for TrustContext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TrustContext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Performance,
    Referral,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArcKind::Performance => f.write_str("performance"),
            ArcKind::Referral => f.write_str("referral"),
        }
    }
}

/// Identity of an arc within a graph: one arc per quadruple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId {
    pub trustor: EntityId,
    pub trustee: EntityId,
    pub context: TrustContext,
    pub kind: ArcKind,
}

/// Directed, contextual trust edge.
///
/// `context` is always a base context; a referral arc for context `C`
/// expresses trust in the trustee's recommendations about `C`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrustArc {
    pub trustor: EntityId,
    pub trustee: EntityId,
    pub context: TrustContext,
    pub kind: ArcKind,
    pub value: TrustValue,
    pub updated_at: Tick,
}

impl TrustArc {
    pub fn new(
        trustor: EntityId,
        trustee: EntityId,
        context: TrustContext,
        kind: ArcKind,
        value: f64,
    ) -> Result<Self, TrustError> {
        if trustor == trustee {
            return Err(TrustError::SelfArc(trustor));
        }
        if context.is_referral() {
            return Err(TrustError::ReferralContext(context));
        }
        Ok(TrustArc {
            trustor,
            trustee,
            context,
            kind,
            value: TrustValue::new(value)?,
            updated_at: 0,
        })
    }

    pub fn at(mut self, tick: Tick) -> Self {
        self.updated_at = tick;
        self
    }

    pub fn id(&self) -> ArcId {
        ArcId {
            trustor: self.trustor.clone(),
            trustee: self.trustee.clone(),
            context: self.context.clone(),
            kind: self.kind,
        }
    }

    /// `Referral(context)` for referral arcs, the base context otherwise.
    pub fn scoped_context(&self) -> TrustContext {
        match self.kind {
            ArcKind::Performance => self.context.clone(),
            ArcKind::Referral => TrustContext::Referral(Box::new(self.context.clone())),
        }
    }

    /// One record of the graph text format. Also the canonical byte string
    /// that referral signatures cover.
    pub fn to_record(&self) -> String {
        format!(
            "arc {} {} {} {} {}",
            self.trustor, self.trustee, self.context, self.kind, self.value
        )
    }

    fn well_formed(&self) -> Result<(), TrustError> {
        if self.trustor == self.trustee {
            return Err(TrustError::SelfArc(self.trustor.clone()));
        }
        if self.context.is_referral() {
            return Err(TrustError::ReferralContext(self.context.clone()));
        }
        TrustValue::new(self.value.get()).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceReport {
    pub trustee: EntityId,
    pub context: TrustContext,
    /// 1.0 is a fully satisfactory interaction.
    pub outcome: f64,
    pub source_operation: Option<u64>,
    pub at: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    /// EMA weight of the newest outcome, in (0, 1].
    pub alpha: f64,
    /// Fraction removed from a referee's referral rating per penalty, in (0, 1].
    pub referee_penalty: f64,
}

impl UpdateParams {
    pub fn new(alpha: f64, referee_penalty: f64) -> Result<Self, TrustError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(TrustError::InvalidParams { name: "alpha", value: alpha });
        }
        if !(referee_penalty > 0.0 && referee_penalty <= 1.0) {
            return Err(TrustError::InvalidParams {
                name: "referee-penalty",
                value: referee_penalty,
            });
        }
        Ok(UpdateParams { alpha, referee_penalty })
    }
}

impl Default for UpdateParams {
    fn default() -> Self {
        UpdateParams {
            alpha: DEFAULT_ALPHA,
            referee_penalty: DEFAULT_REFEREE_PENALTY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyStatus {
    Applied { before: TrustValue, after: TrustValue },
    NoReferralArc,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct StoreKey {
    trustee: EntityId,
    context: TrustContext,
    kind: ArcKind,
}

/// Arcs held by a single trustor.
///
/// Reads may be shared across threads; writes need `&mut`, so the borrow
/// checker serialises them.
#[derive(Debug, Clone)]
pub struct TrustStore {
    owner: EntityId,
    arcs: BTreeMap<StoreKey, TrustArc>,
    params: UpdateParams,
}

impl TrustStore {
    pub fn new(owner: EntityId) -> Self {
        Self::with_params(owner, UpdateParams::default())
    }

    pub fn with_params(owner: EntityId, params: UpdateParams) -> Self {
        TrustStore {
            owner,
            arcs: BTreeMap::new(),
            params,
        }
    }

    pub fn owner(&self) -> &EntityId {
        &self.owner
    }

    pub fn params(&self) -> UpdateParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Arcs in (trustee, context, kind) order.
    pub fn arcs(&self) -> impl Iterator<Item = &TrustArc> {
        self.arcs.values()
    }

    /// Inserts or replaces the arc for its quadruple.
    pub fn record_arc(&mut self, arc: TrustArc) -> Result<(), TrustError> {
        if arc.trustor != self.owner {
            return Err(TrustError::OwnerMismatch {
                expected: self.owner.clone(),
                found: arc.trustor,
            });
        }
        arc.well_formed()?;
        let key = StoreKey {
            trustee: arc.trustee.clone(),
            context: arc.context.clone(),
            kind: arc.kind,
        };
        self.arcs.insert(key, arc);
        Ok(())
    }

    pub fn direct_rating(
        &self,
        trustee: &EntityId,
        context: &TrustContext,
        kind: ArcKind,
    ) -> Option<TrustValue> {
        self.arc(trustee, context, kind).map(|a| a.value)
    }

    pub fn arc(&self, trustee: &EntityId, context: &TrustContext, kind: ArcKind) -> Option<&TrustArc> {
        self.arcs.get(&StoreKey {
            trustee: trustee.clone(),
            context: context.clone(),
            kind,
        })
    }

    /// Moves the performance rating toward the reported outcome by an
    /// exponential moving average. The first report seeds the rating.
    pub fn apply_experience(&mut self, report: &ExperienceReport) -> Result<TrustValue, TrustError> {
        if !(0.0..=1.0).contains(&report.outcome) {
            return Err(TrustError::InvalidValue(report.outcome));
        }
        let next = match self.direct_rating(&report.trustee, &report.context, ArcKind::Performance) {
            // old + alpha * (outcome - old); exact when outcome == old.
            Some(old) => old.get() + self.params.alpha * (report.outcome - old.get()),
            None => report.outcome,
        };
        let next = TrustValue::saturating(next);
        let arc = TrustArc::new(
            self.owner.clone(),
            report.trustee.clone(),
            report.context.clone(),
            ArcKind::Performance,
            next.get(),
        )?
        .at(report.at);
        self.record_arc(arc)?;
        Ok(next)
    }

    /// Multiplies the referral rating of `referee` for `target` by
    /// `1 - referee_penalty`.
    pub fn penalize_referee(&mut self, referee: &EntityId, target: &TrustContext, at: Tick) -> PenaltyStatus {
        let key = StoreKey {
            trustee: referee.clone(),
            context: target.clone(),
            kind: ArcKind::Referral,
        };
        match self.arcs.get_mut(&key) {
            Some(arc) => {
                let before = arc.value;
                let after = TrustValue::saturating(before.get() * (1.0 - self.params.referee_penalty));
                arc.value = after;
                arc.updated_at = at;
                PenaltyStatus::Applied { before, after }
            }
            None => PenaltyStatus::NoReferralArc,
        }
    }
}
