use std::collections::{BTreeSet, HashMap};

use pepsi_broker::{Broker, BrokerConfig, DeliveryMark};
use pepsi_wire::{ReportEnvelope, SubscriptionUpload, Tag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tag(n: u16) -> Tag {
    let mut b = [0u8; 32];
    b[..2].copy_from_slice(&n.to_be_bytes());
    Tag::new(b)
}

/// The double loop over `R × S`.
fn quadratic(broker: &Broker, delivered: &BTreeSet<DeliveryMark>) -> BTreeSet<DeliveryMark> {
    let mut out = BTreeSet::new();
    for r in broker.reports() {
        for s in broker.subscriptions() {
            if r.envelope.tag == s.tag && r.envelope.epoch == s.epoch {
                let mark = DeliveryMark { handle: s.handle.clone(), report: r.id };
                if !delivered.contains(&mark) {
                    out.insert(mark);
                }
            }
        }
    }
    out
}

fn random_scenario(seed: u64, eager: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut broker = Broker::new(BrokerConfig { eager, ..Default::default() });
    let n_tags = rng.gen_range(1..=50u16);
    let n_reports = rng.gen_range(0..=200);
    let n_subs = rng.gen_range(0..=80);
    let n_handles = rng.gen_range(1..=20u8);
    let mut delivered = BTreeSet::new();
    let (mut reports, mut subs) = (0, 0);
    while reports < n_reports || subs < n_subs {
        let roll = rng.gen_range(0..10);
        if roll == 0 {
            let h = vec![rng.gen_range(0..n_handles)];
            for env in broker.drain_deliveries(&h) {
                let id = broker.reports().find(|r| r.envelope == env).map(|r| r.id).unwrap();
                assert!(delivered.insert(DeliveryMark { handle: h.clone(), report: id }));
            }
        } else if (roll % 2 == 0 && reports < n_reports) || subs >= n_subs {
            let body = (reports as u32).to_be_bytes().to_vec();
            broker.accept_report(ReportEnvelope { epoch: None, tag: tag(rng.gen_range(0..n_tags)), ciphertext: body, sender: None }).unwrap();
            reports += 1;
        } else {
            let upload = SubscriptionUpload { epoch: None, handle: vec![rng.gen_range(0..n_handles)], tag: tag(rng.gen_range(0..n_tags)) };
            broker.accept_subscription(upload).unwrap();
            subs += 1;
        }
    }
    let expected = quadratic(&broker, &delivered);
    assert_eq!(broker.match_all(), expected, "seed {seed}");
}

#[test]
fn indexed_matcher_equals_double_loop() {
    for seed in 0..100 {
        random_scenario(seed, true);
        random_scenario(seed, false);
    }
}

#[test]
fn empty_sides_match_nothing() {
    let mut b = Broker::default();
    assert!(b.match_all().is_empty());
    b.accept_report(ReportEnvelope { epoch: None, tag: tag(1), ciphertext: vec![1], sender: None }).unwrap();
    assert!(b.match_all().is_empty());
    let mut b = Broker::default();
    b.accept_subscription(SubscriptionUpload { epoch: None, handle: vec![1], tag: tag(1) }).unwrap();
    assert!(b.match_all().is_empty());
}

#[test]
fn mixed_epoch_purge_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut b = Broker::default();
    let mut expected = [0usize; 2];
    for epoch in 0..3u64 {
        if epoch > 0 {
            let purged = b.epoch_advance(epoch).unwrap();
            assert_eq!([purged.subscriptions, purged.reports], expected);
            expected = [0, 0];
        }
        for i in 0..rng.gen_range(5..30u16) {
            b.accept_subscription(SubscriptionUpload { epoch: Some(epoch), handle: vec![(i % 7) as u8], tag: tag(i) })
                .unwrap();
            expected[0] += 1;
        }
        for i in 0..rng.gen_range(5..30u16) {
            b.accept_report(ReportEnvelope { epoch: Some(epoch), tag: tag(i), ciphertext: vec![1], sender: None })
                .unwrap();
            expected[1] += 1;
        }
        // Version-2 entries carry no epoch and are never purged.
        b.accept_report(ReportEnvelope { epoch: None, tag: tag(0), ciphertext: vec![2], sender: None }).unwrap();
    }
    assert_eq!(b.reports().filter(|r| r.envelope.epoch.is_none()).count(), 3);
}

#[derive(Clone, Debug)]
enum Step {
    Subscribe { handle: u8, tag: u16 },
    Report { tag: u16 },
    Drain { handle: u8 },
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..4u8, 0..6u16).prop_map(|(handle, tag)| Step::Subscribe { handle, tag }),
        (0..6u16).prop_map(|tag| Step::Report { tag }),
        (0..4u8).prop_map(|handle| Step::Drain { handle }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exactly_once_in_arrival_order(steps in prop::collection::vec(step(), 0..120), eager in any::<bool>()) {
        let mut broker = Broker::new(BrokerConfig { eager, ..Default::default() });
        let mut tags_of: HashMap<u8, BTreeSet<u16>> = HashMap::new();
        let mut report_tags: Vec<u16> = Vec::new();
        let mut got: BTreeSet<(u8, u64)> = BTreeSet::new();
        let record = |handle: u8, envs: Vec<ReportEnvelope>, got: &mut BTreeSet<(u8, u64)>| {
            let seq: Vec<u64> = envs.iter().map(|e| u64::from_be_bytes(e.ciphertext[..].try_into().unwrap())).collect();
            prop_assert!(seq.windows(2).all(|w| w[0] < w[1]), "out of arrival order");
            for n in seq {
                prop_assert!(got.insert((handle, n)), "delivered twice");
            }
            Ok(())
        };
        for s in steps {
            match s {
                Step::Subscribe { handle, tag: t } => {
                    broker.accept_subscription(SubscriptionUpload { epoch: None, handle: vec![handle], tag: tag(t) }).unwrap();
                    tags_of.entry(handle).or_default().insert(t);
                }
                Step::Report { tag: t } => {
                    let n = report_tags.len() as u64;
                    let body = n.to_be_bytes().to_vec();
                    broker.accept_report(ReportEnvelope { epoch: None, tag: tag(t), ciphertext: body, sender: None }).unwrap();
                    report_tags.push(t);
                }
                Step::Drain { handle } => {
                    if eager || handle % 2 == 0 {
                        broker.match_all();
                    }
                    let envs = broker.drain_deliveries(&[handle]);
                    record(handle, envs, &mut got)?;
                }
            }
        }
        broker.match_all();
        for handle in 0..4u8 {
            let envs = broker.drain_deliveries(&[handle]);
            record(handle, envs, &mut got)?;
        }
        let mut expected = BTreeSet::new();
        for (handle, tags) in &tags_of {
            for (n, t) in report_tags.iter().enumerate() {
                if tags.contains(t) {
                    expected.insert((*handle, n as u64));
                }
            }
        }
        prop_assert_eq!(got, expected);
        prop_assert!(broker.match_all().is_empty());
    }
}
