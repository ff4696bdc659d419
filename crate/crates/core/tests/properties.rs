use std::collections::BTreeMap;

use proptest::prelude::*;
use trustweave_core::federation::{refresh_federations, FederationPolicy};
use trustweave_core::identity_model::{
    create_assertion, derive_signing_key, verify_assertion, Credential, Entity, EntityRole, PartialIdentity, ReplayCache,
};
use trustweave_core::simnet::{build_network, AdversaryKind, EntityDecl, NetworkConfig, Payload};
use trustweave_core::sso::{build_sso_spec, SsoBindings, SsoParams};
use trustweave_core::trust_core::{ExperienceReport, UpdateParams};
use trustweave_core::trust_network::crawl::evaluate_in_graph;
use trustweave_core::trust_network::oracle::{brute_force_oracle, brute_force_paths};
use trustweave_core::trust_network::{
    aggregate, validate_path, verify_referral, PathQuery, Referral, TrustSnapshot,
};
use trustweave_core::{
    AggregationStrategy, ArcKind, EntityId, KeyRegistry, TrustArc, TrustContext, TrustGraph, TrustManager,
    TrustStore, TrustValue,
};

const MGA: TrustContext = TrustContext::MakeGoodAssertions;
const MP: TrustContext = TrustContext::MaintainPrivacy;

fn node(i: usize) -> EntityId {
    EntityId::new(format!("n{i}")).unwrap()
}

/// (trustor, trustee, referral?, privacy context?, value in tenths)
type RawArc = (usize, usize, bool, bool, u8);

fn raw_graph(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<RawArc>)> {
    (2..=max_nodes).prop_flat_map(|n| {
        let arc = (0..n, 0..n, any::<bool>(), prop::bool::weighted(0.2), 0u8..=10);
        (Just(n), prop::collection::vec(arc, 0..(n * 3)))
    })
}

fn build(raw: &[RawArc]) -> TrustGraph {
    let mut g = TrustGraph::new();
    for &(a, b, referral, privacy, tenths) in raw {
        if a == b {
            continue;
        }
        let kind = if referral { ArcKind::Referral } else { ArcKind::Performance };
        let ctx = if privacy { MP } else { MGA };
        g.insert(TrustArc::new(node(a), node(b), ctx, kind, f64::from(tenths) / 10.0).unwrap());
    }
    g
}

fn strategies() -> impl Strategy<Value = AggregationStrategy> {
    prop_oneof![Just(AggregationStrategy::MaxPath), Just(AggregationStrategy::ProbabilisticSumDisjoint)]
}

fn seq(p: &trustweave_core::TrustPath) -> Vec<EntityId> {
    p.entities().into_iter().cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn update_stays_in_range(old in 0.0f64..=1.0, outcome in 0.0f64..=1.0, alpha in 0.01f64..=1.0) {
        let mut store = TrustStore::with_params(node(0), UpdateParams::new(alpha, 0.5).unwrap());
        store.record_arc(TrustArc::new(node(0), node(1), MGA, ArcKind::Performance, old).unwrap()).unwrap();
        let report = ExperienceReport { trustee: node(1), context: MGA, outcome, source_operation: None, at: 1 };
        let v = store.apply_experience(&report).unwrap().get();
        prop_assert!((0.0..=1.0).contains(&v));
        let (lo, hi) = if old < outcome { (old, outcome) } else { (outcome, old) };
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn agreeing_outcome_is_fixed_point(old in 0.0f64..=1.0, alpha in 0.01f64..=1.0) {
        let mut store = TrustStore::with_params(node(0), UpdateParams::new(alpha, 0.5).unwrap());
        store.record_arc(TrustArc::new(node(0), node(1), MGA, ArcKind::Performance, old).unwrap()).unwrap();
        let report = ExperienceReport { trustee: node(1), context: MGA, outcome: old, source_operation: None, at: 1 };
        prop_assert_eq!(store.apply_experience(&report).unwrap().get(), old);
    }

    #[test]
    fn repeated_outcome_converges_monotonically(old in 0.0f64..=1.0, outcome in 0.0f64..=1.0, alpha in 0.05f64..=1.0) {
        let mut store = TrustStore::with_params(node(0), UpdateParams::new(alpha, 0.5).unwrap());
        store.record_arc(TrustArc::new(node(0), node(1), MGA, ArcKind::Performance, old).unwrap()).unwrap();
        let mut gap = (old - outcome).abs();
        for at in 1..40 {
            let report = ExperienceReport { trustee: node(1), context: MGA, outcome, source_operation: None, at };
            let v = store.apply_experience(&report).unwrap().get();
            let now = (v - outcome).abs();
            prop_assert!(now <= gap + 1e-15);
            gap = now;
        }
    }

    #[test]
    fn recording_is_idempotent(value in 0.0f64..=1.0, referral in any::<bool>()) {
        let kind = if referral { ArcKind::Referral } else { ArcKind::Performance };
        let arc = TrustArc::new(node(0), node(1), MGA, kind, value).unwrap();
        let mut once = TrustStore::new(node(0));
        once.record_arc(arc.clone()).unwrap();
        let mut twice = once.clone();
        twice.record_arc(arc).unwrap();
        prop_assert_eq!(once.arcs().collect::<Vec<_>>(), twice.arcs().collect::<Vec<_>>());
    }

    #[test]
    fn discovery_matches_oracle((n, raw) in raw_graph(8), depth in 1usize..=5, src in 0usize..8, dst in 0usize..8) {
        prop_assume!(src < n && dst < n && src != dst);
        let g = build(&raw);
        let query = PathQuery::new(node(src), node(dst), MGA, depth).unwrap();
        let found = TrustSnapshot::full_view(&g).discover_paths(&query);
        let oracle = brute_force_paths(&g, &query).unwrap();
        prop_assert_eq!(found.iter().map(seq).collect::<Vec<_>>(), oracle.iter().map(seq).collect::<Vec<_>>());
        for p in &found {
            prop_assert!(validate_path(p, &MGA, depth));
            prop_assert!(p.len() <= depth);
        }
    }

    #[test]
    fn decentralised_rating_matches_oracle(
        (n, raw) in raw_graph(7),
        depth in 1usize..=4,
        src in 0usize..7,
        dst in 0usize..7,
        strategy in strategies(),
    ) {
        prop_assume!(src < n && dst < n && src != dst);
        let g = build(&raw);
        let query = PathQuery::new(node(src), node(dst), MGA, depth).unwrap();
        let expected = brute_force_oracle(&g, &query, strategy).unwrap();
        let eval = evaluate_in_graph(&g, &node(src), &node(dst), &MGA, strategy, depth, 3);
        prop_assert_eq!(eval.rating.value, expected);
    }

    #[test]
    fn aggregation_bounds((n, raw) in raw_graph(7), src in 0usize..7, dst in 0usize..7) {
        prop_assume!(src < n && dst < n && src != dst);
        let g = build(&raw);
        let query = PathQuery::new(node(src), node(dst), MGA, 4).unwrap();
        let paths = TrustSnapshot::full_view(&g).discover_paths(&query);
        let max = aggregate(&paths, AggregationStrategy::MaxPath).unwrap().get();
        let psum = aggregate(&paths, AggregationStrategy::ProbabilisticSumDisjoint).unwrap().get();
        prop_assert!((0.0..=1.0).contains(&max));
        prop_assert!((0.0..=1.0).contains(&psum));
        prop_assert!(psum + 1e-12 >= max);
    }

    #[test]
    fn raising_an_arc_never_lowers_max_path(
        (n, raw) in raw_graph(7),
        src in 0usize..7,
        dst in 0usize..7,
        pick in any::<prop::sample::Index>(),
        bump in 0u8..=10,
    ) {
        prop_assume!(src < n && dst < n && src != dst && !raw.is_empty());
        let before = build(&raw);
        let mut raised = raw.clone();
        let i = pick.index(raised.len());
        raised[i].4 = raised[i].4.saturating_add(bump).min(10);
        let after = build(&raised);
        let query = PathQuery::new(node(src), node(dst), MGA, 4).unwrap();
        let score = |g: &TrustGraph| {
            aggregate(&TrustSnapshot::full_view(g).discover_paths(&query), AggregationStrategy::MaxPath).unwrap()
        };
        prop_assert!(score(&after) >= score(&before));
    }

    #[test]
    fn evaluation_is_deterministic((n, raw) in raw_graph(7), src in 0usize..7, dst in 0usize..7, strategy in strategies()) {
        prop_assume!(src < n && dst < n && src != dst);
        let g = build(&raw);
        let a = evaluate_in_graph(&g, &node(src), &node(dst), &MGA, strategy, 4, 1);
        let b = evaluate_in_graph(&g, &node(src), &node(dst), &MGA, strategy, 4, 1);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn any_byte_flip_breaks_a_referral(tenths in 0u8..=10, pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let key = derive_signing_key(2, &node(0));
        let mut keys = KeyRegistry::new();
        keys.register(node(0), key.verifying_key());
        let arc = TrustArc::new(node(0), node(1), MGA, ArcKind::Performance, f64::from(tenths) / 10.0).unwrap();
        let mut wire = Referral::sign(arc, &key).encode().into_bytes();
        let i = pos.index(wire.len());
        wire[i] ^= 1 << bit;
        if let Ok(r) = Referral::decode(&wire) {
            prop_assert!(verify_referral(&r, &keys).is_err());
        }
    }

    #[test]
    fn any_assertion_mutation_breaks_it(which in 0usize..6, pos in any::<prop::sample::Index>()) {
        let idp_id = node(0);
        let mut idp = Entity::new(idp_id.clone(), [EntityRole::IdP], derive_signing_key(4, &idp_id));
        idp.register_identity(PartialIdentity {
            owner: node(1),
            attributes: BTreeMap::from([("name".to_string(), "Ann".to_string())]),
            credential: Credential::shared_secret("pw"),
        });
        let mut keys = KeyRegistry::new();
        keys.register(idp_id.clone(), idp.signing_key().verifying_key());
        let mut a = create_assertion(&idp, &node(1), &node(2), &["name".to_string()], b"nonce-1", 5).unwrap();
        match which {
            0 => a.subject = node(3),
            1 => a.audience = node(3),
            2 => { a.attributes.insert("name".into(), "Bob".into()); }
            3 => a.issued_at += 1,
            4 => { let i = pos.index(a.nonce.len()); a.nonce[i] ^= 1; }
            _ => { let i = pos.index(a.signature.len()); a.signature[i] ^= 1; }
        }
        let aud = a.audience.clone();
        prop_assert!(verify_assertion(&a, &aud, &keys, &mut ReplayCache::default()).is_err());
    }

    #[test]
    fn federation_matches_evaluation((n, raw) in raw_graph(7), owner in 0usize..7, tenths in 0u8..=10) {
        prop_assume!(owner < n);
        let g = build(&raw);
        let mut store = TrustStore::new(node(owner));
        for arc in g.arcs().filter(|a| a.trustor == node(owner)) {
            store.record_arc(arc.clone()).unwrap();
        }
        let manager = TrustManager::new(store);
        let policy = FederationPolicy {
            context: MGA,
            threshold: TrustValue::new(f64::from(tenths) / 10.0).unwrap(),
            refresh_every: 1,
        };
        let candidates: Vec<EntityId> = (0..n).map(node).collect();
        let list = refresh_federations(&manager, &policy, &candidates, 0);
        for peer in &candidates {
            let rating = manager.evaluate_trust(peer, &MGA);
            let expected = peer != &node(owner) && rating.meets(policy.threshold);
            prop_assert_eq!(list.is_federated(peer), expected);
        }
        prop_assert_eq!(refresh_federations(&manager, &policy, &candidates, 0), list);
    }
}

fn sso_world(seed: u64, drop: f64, adversary: Option<(&str, AdversaryKind)>) -> trustweave_core::simnet::Network {
    let mut config = NetworkConfig::new(seed);
    config.drop_probability = drop;
    if let Some((who, kind)) = adversary {
        config.adversaries.push((EntityId::new(who).unwrap(), kind));
    }
    let names = ["u", "sp", "a", "b", "r1", "r2"];
    let entities: Vec<EntityDecl> = names
        .iter()
        .map(|n| EntityDecl {
            id: EntityId::new(*n).unwrap(),
            roles: [EntityRole::User, EntityRole::Sp, EntityRole::IdP].into_iter().collect(),
        })
        .collect();
    let graph = "\
arc b r1 MakeGoodAssertions referral 0.9
arc b r2 MakeGoodAssertions referral 0.8
arc r1 a MakeGoodAssertions performance 0.7
arc r2 a MakeGoodAssertions performance 0.9
arc a b MaintainPrivacy performance 0.9
";
    build_network(config, graph, &entities, &[]).unwrap()
}

fn sso_bindings() -> SsoBindings {
    let e = |s: &str| EntityId::new(s).unwrap();
    SsoBindings { user: e("u"), sp: e("sp"), user_idp: e("a"), sp_idp: e("b") }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_is_a_function_of_seed(seed in any::<u64>(), drop in prop_oneof![Just(0.0), Just(0.2), Just(1.0)]) {
        let run = || {
            let mut net = sso_world(seed, drop, None);
            let spec = build_sso_spec(&SsoParams::default());
            net.start_operation(&spec, sso_bindings().to_map()).unwrap();
            net.start_operation(&spec, sso_bindings().to_map()).unwrap();
            net.run_until_quiet();
            net.log().render()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn tampering_is_confined_to_its_sender(seed in any::<u64>(), who in prop_oneof![Just("r1"), Just("r2")]) {
        let mut net = sso_world(seed, 0.0, Some((who, AdversaryKind::TamperingForwarder)));
        net.enable_tap();
        let spec = build_sso_spec(&SsoParams::default());
        net.start_operation(&spec, sso_bindings().to_map()).unwrap();
        net.run_until_quiet();
        let keys = net.directory().keys().clone();
        for env in net.take_tap() {
            if let Payload::ReferralAnswer { lines, .. } = &env.payload {
                for line in lines {
                    let ok = Referral::decode(line).map(|r| verify_referral(&r, &keys).is_ok()).unwrap_or(false);
                    prop_assert_eq!(ok, env.from.as_str() != who);
                }
            }
        }
    }
}
