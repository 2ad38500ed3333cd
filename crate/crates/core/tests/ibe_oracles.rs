use pepsi_core::group::{hash_to_g1, pairing, G1Element, Scalar};
use pepsi_core::ibe::{self, IbeError, IbeSecretKey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_id(rng: &mut ChaCha20Rng) -> Vec<u8> {
    let len = rng.gen_range(1..40);
    (0..len).map(|_| rng.gen()).collect()
}

#[test]
fn blind_extraction_equals_direct_master_key_computation() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (pk, msk) = ibe::setup(&mut rng);
    for _ in 0..10 {
        let id = random_id(&mut rng);
        let (state, req) = ibe::blind_extract_request(&pk, &id, &mut rng).unwrap();
        let resp = ibe::blind_extract_respond(&msk, &req).unwrap();
        let key = ibe::blind_extract_finalize(&pk, state, &resp).unwrap();
        let hashed = hash_to_g1(&id).unwrap();
        assert_eq!(*key.sk1(), hashed.pow(msk.x1()));
        assert_eq!(*key.sk2(), hashed.pow(msk.x2()));
    }
}

#[test]
fn fixed_blinding_exponent_is_removed_exactly() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (pk, msk) = ibe::setup(&mut rng);
    let r = Scalar::from_u64(5).unwrap();
    let (state, req) = ibe::blind_extract_request_fixed(&pk, b"x", r).unwrap();
    // req = H(x) * g^5, built from repeated multiplication.
    let g = G1Element::generator();
    let g5 = g.mul(&g).mul(&g).mul(&g).mul(&g);
    assert_eq!(req, hash_to_g1(b"x").unwrap().mul(&g5));
    let key = ibe::blind_extract_finalize(&pk, state, &ibe::blind_extract_respond(&msk, &req).unwrap()).unwrap();
    assert!(pk.is_valid_key(&key));
}

#[test]
fn tampered_keys_fail_validity() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (pk, msk) = ibe::setup(&mut rng);
    let g = G1Element::generator();
    for _ in 0..5 {
        let id = random_id(&mut rng);
        let (state, req) = ibe::blind_extract_request(&pk, &id, &mut rng).unwrap();
        let key = ibe::blind_extract_finalize(&pk, state, &ibe::blind_extract_respond(&msk, &req).unwrap()).unwrap();
        assert!(pk.is_valid_key(&key));

        let variants = [
            IbeSecretKey::from_parts(key.sk1().mul(&g), *key.sk2(), id.clone()),
            IbeSecretKey::from_parts(*key.sk1(), key.sk2().mul(&g), id.clone()),
            IbeSecretKey::from_parts(*key.sk2(), *key.sk1(), id.clone()),
            IbeSecretKey::from_parts(*key.sk1(), *key.sk2(), [id.clone(), vec![0]].concat()),
        ];
        for bad in &variants {
            assert!(!pk.is_valid_key(bad));
        }
    }
}

#[test]
fn dishonest_authority_is_detected() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (pk, _) = ibe::setup(&mut rng);
    let (_, other_msk) = ibe::setup(&mut rng);
    let (state, req) = ibe::blind_extract_request(&pk, b"id", &mut rng).unwrap();
    let resp = ibe::blind_extract_respond(&other_msk, &req).unwrap();
    assert_eq!(ibe::blind_extract_finalize(&pk, state, &resp).unwrap_err(), IbeError::MalformedKey);
}

#[test]
fn pairing_is_bilinear_in_small_exponents() {
    let g = G1Element::generator();
    let base = pairing(&g, &g).unwrap();
    for (a, b) in [(1u64, 1u64), (2, 3), (7, 11), (13, 1)] {
        let ga = g.pow(&Scalar::from_u64(a).unwrap());
        let gb = g.pow(&Scalar::from_u64(b).unwrap());
        // e(g,g)^(ab) by repeated multiplication in Gt.
        let mut expected = base;
        for _ in 1..a * b {
            expected = expected.mul(&base);
        }
        assert_eq!(pairing(&ga, &gb).unwrap(), expected);
    }
}

#[test]
fn encryption_round_trips_under_extracted_keys() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (pk, msk) = ibe::setup(&mut rng);
    for _ in 0..5 {
        let id = random_id(&mut rng);
        let (state, req) = ibe::blind_extract_request(&pk, &id, &mut rng).unwrap();
        let key = ibe::blind_extract_finalize(&pk, state, &ibe::blind_extract_respond(&msk, &req).unwrap()).unwrap();
        let m: [u8; ibe::MESSAGE_LEN] = rng.gen();
        let ct = ibe::encrypt(&pk, &id, &m, &mut rng).unwrap();
        assert_eq!(ibe::decrypt(&key, &ct).unwrap(), m);
    }
}

/// Two-sample chi-square over byte frequencies of blinded requests. Requests
/// for different identities should come from the same (uniform) distribution.
#[test]
fn blinded_requests_do_not_depend_on_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let (pk, _) = ibe::setup(&mut rng);
    let mut histogram = |id: &[u8]| {
        let mut counts = [0u64; 256];
        for _ in 0..10_000 {
            let (_, req) = ibe::blind_extract_request(&pk, id, &mut rng).unwrap();
            // Byte 0 carries the compression flags.
            for &b in &req.to_compressed()[1..] {
                counts[b as usize] += 1;
            }
        }
        counts
    };
    let a = histogram(b"pollution|manhattan");
    let b = histogram(b"temperature|harlem");
    let chi2: f64 = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| **x + **y > 0)
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            (x - y).powi(2) / (x + y)
        })
        .sum();
    // 255 degrees of freedom: mean 255, standard deviation ~22.6.
    assert!(chi2 < 400.0, "chi2 = {chi2}");
}
