//! Generalised single sign-on across four roles, with the relying IdP
//! checking the user's IdP (C) before contacting it and the user's IdP
//! checking the relying IdP (D) before prompting the user.
//!
//! Connection numbers used in transcripts:
//!
//! | # | from     | to       | payload                 |
//! |---|----------|----------|-------------------------|
//! | 1 | user     | sp       | service-request         |
//! | 2 | sp       | sp-idp   | authn-request           |
//! | 3 | sp-idp   | user-idp | authn-request           |
//! | 4 | user-idp | user     | authn-challenge         |
//! | 5 | user     | user-idp | credential-presentation |
//! | 6 | user-idp | sp-idp   | authn-response          |
//! | 7 | sp-idp   | sp       | authn-result            |
//! | 8 | sp       | user     | service-grant           |
//!
//! When the SP is its own IdP, connections 2 and 7 are internal and never
//! reach the network.

use std::collections::BTreeMap;

use crate::identity_model::EntityId;
use crate::operations::{
    InstantiateError, LocalAction, OperationOutcome, OperationSpec, PayloadKind, RelationshipId, Role, Step,
};
use crate::simnet::Network;
use crate::trust_core::TrustValue;

#[derive(Debug, Clone, PartialEq)]
pub struct SsoParams {
    pub threshold_c: TrustValue,
    pub threshold_d: TrustValue,
    pub attributes_requested: Vec<String>,
    /// Adds checks G (at the SP) and H (at the SP's IdP) around
    /// connection 2 with this threshold.
    pub internal_checks: Option<TrustValue>,
}

impl Default for SsoParams {
    fn default() -> Self {
        let half = TrustValue::new(0.5).expect("in range");
        SsoParams {
            threshold_c: half,
            threshold_d: half,
            attributes_requested: Vec::new(),
            internal_checks: None,
        }
    }
}

pub fn build_sso_spec(params: &SsoParams) -> OperationSpec {
    use PayloadKind::*;
    use Role::*;
    let mut steps = vec![Step::message(User, Sp, ServiceRequest, "1")];
    if let Some(t) = params.internal_checks {
        steps.push(Step::check(RelationshipId::G, t));
    }
    steps.push(Step::message(Sp, SpIdp, AuthnRequest, "2"));
    if let Some(t) = params.internal_checks {
        steps.push(Step::check(RelationshipId::H, t));
    }
    steps.extend([
        Step::check(RelationshipId::C, params.threshold_c),
        Step::message(SpIdp, UserIdp, AuthnRequest, "3"),
        Step::check(RelationshipId::D, params.threshold_d),
        Step::message(UserIdp, User, AuthnChallenge, "4"),
        Step::message(User, UserIdp, CredentialPresentation, "5"),
        Step::action(UserIdp, LocalAction::Authenticate),
        Step::action(
            UserIdp,
            LocalAction::IssueAssertion {
                subject: User,
                audience: SpIdp,
            },
        ),
        Step::message(UserIdp, SpIdp, AuthnResponse, "6"),
        Step::action(SpIdp, LocalAction::VerifyAssertion),
        Step::message(SpIdp, Sp, AuthnResult, "7"),
        Step::message(Sp, User, ServiceGrant, "8"),
    ]);
    OperationSpec {
        name: "sso".into(),
        roles: Role::ALL.into_iter().collect(),
        steps,
        requested_attributes: params.attributes_requested.clone(),
    }
}

/// Single-IdP attribute query: the relying IdP asks the user's IdP for
/// attributes, gated by D only.
pub fn build_attribute_query_spec(threshold_d: TrustValue, attributes: Vec<String>) -> OperationSpec {
    use PayloadKind::*;
    use Role::*;
    OperationSpec {
        name: "attribute-query".into(),
        roles: [User, UserIdp, SpIdp].into_iter().collect(),
        steps: vec![
            Step::message(SpIdp, UserIdp, AttributeQuery, "q"),
            Step::check(RelationshipId::D, threshold_d),
            Step::action(
                UserIdp,
                LocalAction::IssueAssertion {
                    subject: User,
                    audience: SpIdp,
                },
            ),
            Step::message(UserIdp, SpIdp, AttributeResponse, "r"),
            Step::action(SpIdp, LocalAction::VerifyAssertion),
        ],
        requested_attributes: attributes,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsoBindings {
    pub user: EntityId,
    pub sp: EntityId,
    pub user_idp: EntityId,
    pub sp_idp: EntityId,
}

impl SsoBindings {
    pub fn to_map(&self) -> BTreeMap<Role, EntityId> {
        [
            (Role::User, self.user.clone()),
            (Role::Sp, self.sp.clone()),
            (Role::UserIdp, self.user_idp.clone()),
            (Role::SpIdp, self.sp_idp.clone()),
        ]
        .into_iter()
        .collect()
    }
}

/// Runs one SSO instance to completion on `network`.
pub fn run_sso(
    network: &mut Network,
    bindings: &SsoBindings,
    params: &SsoParams,
) -> Result<OperationOutcome, InstantiateError> {
    let id = network.start_operation(&build_sso_spec(params), bindings.to_map())?;
    network.run_until_quiet();
    Ok(network.outcome(id).expect("instance registered"))
}
