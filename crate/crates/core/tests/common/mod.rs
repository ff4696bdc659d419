#![allow(dead_code)]

use std::collections::BTreeMap;

use trustweave_core::identity_model::EntityRole;
use trustweave_core::simnet::{build_network, EntityDecl, IdentityDecl, Network, NetworkConfig};
use trustweave_core::sso::{SsoBindings, SsoParams};
use trustweave_core::{EntityId, TrustValue};

pub const SECRET: &str = "correct-horse-7781";

pub fn id(s: &str) -> EntityId {
    EntityId::new(s).unwrap()
}

pub fn v(x: f64) -> TrustValue {
    TrustValue::new(x).unwrap()
}

fn decl(name: &str, roles: &[EntityRole]) -> EntityDecl {
    EntityDecl {
        id: id(name),
        roles: roles.iter().copied().collect(),
    }
}

/// alice (user), shop (SP), home (alice's IdP), relying (shop's IdP),
/// broker and liar (IdPs that can vouch for others), mallory (IdP).
pub fn entities() -> Vec<EntityDecl> {
    use EntityRole::*;
    vec![
        decl("alice", &[User]),
        decl("shop", &[Sp, IdP]),
        decl("home", &[IdP]),
        decl("relying", &[IdP]),
        decl("broker", &[IdP]),
        decl("liar", &[IdP]),
        decl("mallory", &[IdP]),
    ]
}

pub fn alice_at(idp: &str, presents: &str) -> IdentityDecl {
    IdentityDecl {
        subject: id("alice"),
        idp: id(idp),
        secret: SECRET.into(),
        presents: presents.into(),
        attributes: BTreeMap::from([
            ("email".to_string(), "alice@example.org".to_string()),
            ("name".to_string(), "Alice".to_string()),
        ]),
    }
}

pub fn network(config: NetworkConfig, graph: &str, identities: &[IdentityDecl]) -> Network {
    build_network(config, graph, &entities(), identities).unwrap()
}

pub fn standard(graph: &str) -> Network {
    network(NetworkConfig::new(11), graph, &[alice_at("home", SECRET), alice_at("mallory", SECRET)])
}

pub fn bindings(sp: &str, sp_idp: &str, user_idp: &str) -> SsoBindings {
    SsoBindings {
        user: id("alice"),
        sp: id(sp),
        user_idp: id(user_idp),
        sp_idp: id(sp_idp),
    }
}

pub fn params(c: f64, d: f64) -> SsoParams {
    SsoParams {
        threshold_c: v(c),
        threshold_d: v(d),
        attributes_requested: vec!["name".into()],
        internal_checks: None,
    }
}

/// C: relying trusts home to make good assertions; D: home trusts relying
/// to maintain privacy.
pub fn direct_graph(c: f64, d: f64) -> String {
    format!(
        "arc relying home MakeGoodAssertions performance {c}\narc home relying MaintainPrivacy performance {d}\n"
    )
}
