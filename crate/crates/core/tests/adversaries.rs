mod common;

use common::*;
use trustweave_core::operations::{OperationStatus, RelationshipId};
use trustweave_core::simnet::{AdversaryKind, NetworkConfig};
use trustweave_core::sso::run_sso;
use trustweave_core::trust_network::{aggregate, PathQuery};
use trustweave_core::{AggregationStrategy, ArcKind, TrustContext};

const MGA: TrustContext = TrustContext::MakeGoodAssertions;

fn liar_network() -> trustweave_core::simnet::Network {
    let mut config = NetworkConfig::new(21);
    config.adversaries = vec![
        (id("liar"), AdversaryKind::LyingReferee { inflation: 1.0 }),
        (id("mallory"), AdversaryKind::BadAsserter),
    ];
    let graph = "\
arc relying liar MakeGoodAssertions referral 0.9
arc liar mallory MakeGoodAssertions performance 0.4
arc mallory relying MaintainPrivacy performance 0.9
";
    network(config, graph, &[alice_at("mallory", SECRET)])
}

fn liar_rating(net: &trustweave_core::simnet::Network) -> f64 {
    let store = net.directory().get(&id("relying")).unwrap().manager.store();
    store.arc(&id("liar"), &MGA, ArcKind::Referral).unwrap().value.get()
}

#[test]
fn lying_referee_is_corrected() {
    let mut net = liar_network();
    let b = bindings("shop", "relying", "mallory");
    let p = params(0.5, 0.5);

    let first = run_sso(&mut net, &b, &p).unwrap();
    assert_eq!(first.status, OperationStatus::Succeeded);
    let c = &first.checks[0];
    assert!((c.value.get() - 0.72).abs() < 1e-12, "inflated referral passes C at first");
    assert!(net.log().render().contains("kind=lying-referee:1"));
    let forged = first.assertion.clone().unwrap();
    assert_eq!(forged.attributes["name"], "Alice-forged");

    let mut ratings = vec![liar_rating(&net)];
    net.experience_feedback(&[first]);
    ratings.push(liar_rating(&net));
    assert_eq!(ratings, [0.9, 0.45]);

    for _ in 0..10 {
        let out = run_sso(&mut net, &b, &p).unwrap();
        assert_eq!(out.status, OperationStatus::TerminatedAtTrustCheck(RelationshipId::C));
        net.experience_feedback(&[out]);
        let now = liar_rating(&net);
        assert!(now <= *ratings.last().unwrap());
        ratings.push(now);
    }

    // Through the liar alone, even its inflated statement no longer clears C.
    let manager = &net.directory().get(&id("relying")).unwrap().manager;
    let query = PathQuery::new(id("relying"), id("mallory"), MGA, 4).unwrap();
    let paths: Vec<_> = manager.discover_paths(&query).into_iter().filter(|p| p.len() > 1).collect();
    assert_eq!(paths.len(), 1);
    let transitive = aggregate(&paths, AggregationStrategy::MaxPath).unwrap();
    assert!((transitive.get() - 0.36).abs() < 1e-12);
}

#[test]
fn tampered_referrals_are_discarded() {
    let mut config = NetworkConfig::new(4);
    config.adversaries = vec![(id("broker"), AdversaryKind::TamperingForwarder)];
    let graph = "\
arc relying broker MakeGoodAssertions referral 0.9
arc broker home MakeGoodAssertions performance 0.9
arc home relying MaintainPrivacy performance 0.9
";
    let mut net = network(config, graph, &[alice_at("home", SECRET)]);
    let out = run_sso(&mut net, &bindings("shop", "relying", "home"), &params(0.5, 0.5)).unwrap();
    assert_eq!(out.status, OperationStatus::TerminatedAtTrustCheck(RelationshipId::C));
    let log = net.log().render();
    assert!(log.contains("reject crawl=1 from=broker reason=bad-signature"), "{log}");
    assert!(log.contains("rejected=1"));
}

#[test]
fn bad_asserter_loses_direct_trust() {
    let mut config = NetworkConfig::new(8);
    config.adversaries = vec![(id("mallory"), AdversaryKind::BadAsserter)];
    let graph = "\
arc relying mallory MakeGoodAssertions performance 0.9
arc mallory relying MaintainPrivacy performance 0.9
";
    let mut net = network(config, graph, &[alice_at("mallory", SECRET)]);
    let b = bindings("shop", "relying", "mallory");
    let mut statuses = Vec::new();
    for _ in 0..3 {
        let out = run_sso(&mut net, &b, &params(0.5, 0.5)).unwrap();
        statuses.push(out.status);
        net.experience_feedback(&[out]);
    }
    assert_eq!(
        statuses,
        [
            OperationStatus::Succeeded,
            OperationStatus::Succeeded,
            OperationStatus::TerminatedAtTrustCheck(RelationshipId::C)
        ]
    );
    let store = net.directory().get(&id("relying")).unwrap().manager.store();
    let value = store.arc(&id("mallory"), &MGA, ArcKind::Performance).unwrap().value.get();
    assert!((value - 0.441).abs() < 1e-12, "0.9 -> 0.63 -> 0.441, got {value}");
}

#[test]
fn honest_feedback_raises_privacy_trust() {
    let mut net = standard(&direct_graph(0.9, 0.5));
    let out = run_sso(&mut net, &bindings("shop", "relying", "home"), &params(0.5, 0.5)).unwrap();
    let records = net.experience_feedback(&[out]);
    let kinds: Vec<(&str, &str)> = records
        .iter()
        .map(|r| (r.get("by").unwrap(), r.get("context").unwrap()))
        .collect();
    assert_eq!(kinds, [("relying", "MakeGoodAssertions"), ("home", "MaintainPrivacy")]);
    assert_eq!(records[0].get("value"), Some("0.93"));
    assert_eq!(records[1].get("value"), Some("0.65"));
}
