use std::collections::HashSet;

use num_bigint::RandBigInt;
use pepsi_core::group::{frame, hash_tag, hash_to_g1, pairing, G1Element, GtElement, Scalar};
use pepsi_core::ibe::{self, IbeSecretKey, MESSAGE_LEN};
use pepsi_core::oprf::{self, RsaParams};
use pepsi_core::pepsi::{self, RegistrationAuthority};
use pepsi_core::Identifier;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_bytes(rng: &mut ChaCha20Rng, max: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| rng.gen()).collect()
}

#[test]
fn bilinearity_over_random_scalars() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let g = G1Element::generator();
    let base = pairing(&g, &g).unwrap();
    for _ in 0..100 {
        let (a, b) = (Scalar::random(&mut rng), Scalar::random(&mut rng));
        let lhs = pairing(&g.pow(&a), &g.pow(&b)).unwrap();
        assert_eq!(lhs, base.pow(&(a * b)));
    }
}

#[test]
fn encodings_round_trip_on_random_elements() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let g = G1Element::generator();
    let gt = pairing(&g, &g).unwrap();
    // 1000 distinct elements as products over two pools of 32 random powers.
    let powers: Vec<(G1Element, GtElement)> = (0..64)
        .map(|_| {
            let s = Scalar::random(&mut rng);
            (g.pow(&s), gt.pow(&s))
        })
        .collect();
    for k in 0..1000 {
        let s = Scalar::random(&mut rng);
        assert_eq!(Scalar::from_bytes(&s.to_bytes()).unwrap(), s);

        let (a, b) = (&powers[k % 32], &powers[32 + k / 32]);
        let p = a.0.mul(&b.0);
        let back = G1Element::decode(&p.encode()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.has_twist(), p.has_twist());
        assert_eq!(G1Element::from_compressed(&p.to_compressed()).unwrap(), p);

        let t = a.1.mul(&b.1);
        assert_eq!(GtElement::from_bytes(&t.to_bytes()).unwrap(), t);
    }
}

#[test]
fn one_changed_field_changes_the_tag() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let fields: Vec<Vec<u8>> = (0..rng.gen_range(1..5)).map(|_| random_bytes(&mut rng, 24)).collect();
        let mut other = fields.clone();
        let i = rng.gen_range(0..other.len());
        while other[i] == fields[i] {
            other[i] = random_bytes(&mut rng, 24);
        }
        let a: Vec<&[u8]> = fields.iter().map(Vec::as_slice).collect();
        let b: Vec<&[u8]> = other.iter().map(Vec::as_slice).collect();
        assert_ne!(frame(&a), frame(&b));
        assert_ne!(hash_tag(&a), hash_tag(&b));
    }
}

#[test]
fn ibe_round_trips_and_rejects_other_identities() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let (pk, msk) = ibe::setup(&mut rng);
    let key_for = |id: &[u8]| {
        let h = hash_to_g1(id).unwrap();
        IbeSecretKey::from_parts(h.pow(msk.x1()), h.pow(msk.x2()), id.to_vec())
    };
    let mut messages = vec![[0u8; MESSAGE_LEN]];
    messages.extend((0..99).map(|_| rng.gen::<[u8; MESSAGE_LEN]>()));
    for m in &messages {
        let id = [b"id-".as_slice(), &random_bytes(&mut rng, 32)].concat();
        let ct = ibe::encrypt(&pk, &id, m, &mut rng).unwrap();
        assert_eq!(&ibe::decrypt(&key_for(&id), &ct).unwrap(), m);
        let other = [id.as_slice(), b"'"].concat();
        assert_ne!(&ibe::decrypt(&key_for(&other), &ct).unwrap(), m);
    }
}

/// Someone with the public parameters but no authorization guesses
/// `(sk1, sk2)` and derives a tag the way a subscriber would.
#[test]
fn guessed_keys_never_reproduce_a_subscription_tag() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let ra = RegistrationAuthority::new(&mut rng);
    let params = ra.params();
    let id = Identifier::parse("pollution|manhattan").unwrap();
    let (auth, _) = pepsi::authorize_query(params, ra.secret(), &id, &mut rng).unwrap();
    let (_, honest) = pepsi::subscribe(params, &auth).unwrap();
    let h = params.h().to_compressed();
    let guess_tag = |z1: &GtElement, z2: &GtElement| hash_tag(&[id.as_bytes(), &h, &z1.to_bytes(), &z2.to_bytes()]);

    let real = (pairing(params.h(), auth.key().sk1()).unwrap(), pairing(params.h(), auth.key().sk2()).unwrap());
    assert_eq!(guess_tag(&real.0, &real.1), honest);

    // e(h, g^s) = e(h, g)^s. 100 guesses for each half give 10^4 guessed keys.
    let base = pairing(params.h(), &G1Element::generator()).unwrap();
    let mut guesses = || -> Vec<GtElement> { (0..100).map(|_| base.pow(&Scalar::random(&mut rng))).collect() };
    let (first, second) = (guesses(), guesses());
    for z1 in &first {
        for z2 in &second {
            assert_ne!(guess_tag(z1, z2), honest);
        }
    }
}

#[test]
fn oprf_outputs_are_distinct_for_distinct_inputs() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let (params, secret) = oprf::setup(oprf::LEGACY_MODULUS_BITS, &mut rng).unwrap();
    let mut seen = HashSet::new();
    for i in 0..10_000u32 {
        let tag = oprf::oprf_eval(&params, &secret, &i.to_be_bytes(), &mut rng).unwrap();
        assert!(seen.insert(tag), "input {i} repeated an output");
    }
}

#[test]
fn crt_signing_equals_plain_exponentiation_at_full_size() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let (params, secret): (RsaParams, _) = oprf::setup(oprf::LEGACY_MODULUS_BITS, &mut rng).unwrap();
    for _ in 0..100 {
        let mu = rng.gen_biguint_below(params.n());
        assert_eq!(oprf::sign_blinded(&secret, &mu).unwrap(), mu.modpow(secret.d(), params.n()));
    }
}
