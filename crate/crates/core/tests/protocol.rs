use std::collections::HashMap;

use pepsi_core::ops;
use pepsi_core::oprf::{self, OprfError};
use pepsi_core::pepsi::{self, NodeCredential, PepsiError, RegistrationAuthority};
use pepsi_core::{Identifier, Measurement};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn id(s: &str) -> Identifier {
    Identifier::parse(s).unwrap()
}

#[test]
fn ibe_reports_reach_only_matching_subscriptions() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut ra = RegistrationAuthority::new(&mut rng);
    let ids = [id("pollution|manhattan"), id("temperature|manhattan"), id("pollution|harlem")];
    let mut subs = Vec::new();
    for i in &ids {
        let (auth, _) = pepsi::authorize_query(ra.params(), ra.secret(), i, &mut rng).unwrap();
        subs.push(pepsi::subscribe(ra.params(), &auth).unwrap().0);
    }
    for (n, i) in ids.iter().enumerate() {
        let cred = ra.register_node(&format!("node-{n}"), i).unwrap();
        let payload = Measurement::from(format!("reading {n}").as_str());
        let env = pepsi::produce_report(ra.params(), &cred, &payload, &mut rng).unwrap();
        for (m, sub) in subs.iter().enumerate() {
            if m == n {
                assert_eq!(pepsi::open_notification(sub, &env).unwrap(), payload);
            } else {
                assert_ne!(sub.tag, env.tag);
                assert_eq!(pepsi::open_notification(sub, &env).unwrap_err(), PepsiError::NotMySubscription);
            }
        }
    }
}

#[test]
fn renewal_locks_out_evicted_nodes() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut ra = RegistrationAuthority::new(&mut rng);
    let i = id("noise|soho");
    let honest = ra.register_node("honest", &i).unwrap();
    let evicted = ra.register_node("evicted", &i).unwrap();
    let (auth, _) = pepsi::authorize_query(ra.params(), ra.secret(), &i, &mut rng).unwrap();

    ra.evict("evicted");
    let redistribution = ra.renew_nonce(&mut rng);
    assert_eq!(redistribution.len(), 1);
    assert_eq!(redistribution[0].node, "honest");
    let fresh = redistribution[0].credentials[0].clone();
    assert_eq!(fresh.epoch, 1);
    assert_ne!(fresh.z, honest.z);

    let d = Measurement::from("61 dB");
    // Old credentials are refused outright.
    let err = pepsi::produce_report(ra.params(), &evicted, &d, &mut rng).unwrap_err();
    assert_eq!(err, PepsiError::StaleCredential { credential: 0, current: 1 });

    // Relabelling an old credential with the new epoch yields a tag nobody
    // subscribes to.
    let forged = NodeCredential { epoch: 1, ..evicted };
    let (sub, tag) = pepsi::subscribe(ra.params(), &auth).unwrap();
    let env = pepsi::produce_report(ra.params(), &forged, &d, &mut rng).unwrap();
    assert_ne!(env.tag, tag);

    // The same querier key still works in the new epoch.
    let env = pepsi::produce_report(ra.params(), &fresh, &d, &mut rng).unwrap();
    assert_eq!(pepsi::open_notification(&sub, &env).unwrap(), d);
}

#[test]
fn operation_counts_are_stable() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut ra = RegistrationAuthority::new(&mut rng);
    let cred = ra.register_node("n", &id("a|b")).unwrap();
    let tallies: Vec<_> = (0..3)
        .map(|i| {
            let d = Measurement::from(vec![0u8; i * 100]);
            ops::measure(|| pepsi::produce_report(ra.params(), &cred, &d, &mut rng).unwrap()).1
        })
        .collect();
    assert!(tallies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(tallies[0].protocol.pairings, 2);
    assert_eq!(tallies[0].protocol.exponentiations, 1);
}

#[test]
fn truncated_tag_collisions_are_detected_on_decryption() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (params, secret) = oprf::setup(1024, &mut rng).unwrap();
    let params = params.with_truncated_tags();
    let mut seen = HashMap::new();
    let (a, b) = (0u32..)
        .find_map(|i| {
            let sig = oprf::issue_plain(&secret, &params, format!("id-{i}").as_bytes()).unwrap();
            let tag = oprf::subscribe(&params, &sig).1;
            seen.insert(tag, sig.clone()).map(|prev| (prev, sig))
        })
        .unwrap();
    assert_ne!(a.id(), b.id());
    let (sub, _) = oprf::subscribe(&params, &a);
    let env = oprf::produce_report(&params, &b, &Measurement::from("x"), &mut rng).unwrap();
    assert_eq!(env.tag, sub.tag);
    assert_eq!(oprf::open_notification(&sub, &env).unwrap_err(), OprfError::CorruptOrCollidingReport);
}

proptest! {
    #[test]
    fn canonical_identifiers_are_fixed_points(words in prop::collection::vec("[ A-Za-z0-9]{0,12}", 1..5)) {
        if let Ok(i) = Identifier::from_keywords(&words) {
            prop_assert_eq!(Identifier::from_canonical(i.as_str()).unwrap(), i.clone());
            prop_assert_eq!(Identifier::parse(&words.join("|")).unwrap(), i.clone());
            prop_assert_eq!(i.keywords().count(), words.len());
        }
    }
}
