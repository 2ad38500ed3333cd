//! The blind-RSA OPRF protocol suite.
//!
//! The RA holds an RSA key over a safe modulus. A party holding
//! `σ_ID = H1(ID)^d mod N` derives the tag `T = H2(σ_ID)` and the report key
//! `k = H3(σ_ID)`; anyone holding `σ_ID` can therefore both report and
//! subscribe for `ID`. Signatures are obtained blindly: the RA only ever sees
//! `μ = H1(ID) · r^e mod N`.
//!
//! There is no nonce renewal here. Evicting a party means rotating `(N, e, d)`.

use glass_pumpkin::safe_prime;
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;
use pepsi_wire::{put_bytes, Reader, ReportEnvelope, SubscriptionUpload, Tag};
use rand::{CryptoRng, RngCore};

use crate::group::{self, hash_key, hash_tag_with, is_unit, mod_exp, mod_mul, SymmetricKey, TagWidth};
use crate::measurement::{Measurement, DEFAULT_MAX_PAYLOAD};
use crate::ops::{self, Op};
use crate::sym;

pub const DEFAULT_MODULUS_BITS: usize = 2048;
/// Below current recommendations. Kept for benchmarks and fast tests.
pub const LEGACY_MODULUS_BITS: usize = 1024;
pub const MIN_MODULUS_BITS: usize = 1024;
pub const PUBLIC_EXPONENT: u32 = 65537;

const FDH_DOMAIN: &[u8] = b"PEPSI-RSA-FDH";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OprfError {
    #[error("empty identifier")]
    EmptyIdentifier,
    #[error("modulus size {0} not supported (even, at least {MIN_MODULUS_BITS} bits)")]
    ModulusSize(usize),
    #[error("value is not reduced modulo N")]
    OutOfRange,
    #[error("malformed signature")]
    MalformedSignature,
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("not my subscription")]
    NotMySubscription,
    #[error("corrupt or colliding report")]
    CorruptOrCollidingReport,
    #[error("prime generation failed")]
    PrimeGeneration,
    #[error("malformed encoding")]
    Encoding,
}

/// How mobile nodes obtain `σ_ID`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegistrationMode {
    /// The RA signs `H1(ID)` directly and learns `ID`.
    Plain,
    /// Blind-signature OPRF flow; the RA learns nothing about `ID`.
    #[default]
    Blind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsaParams {
    n: BigUint,
    e: BigUint,
    tag_width: TagWidth,
    max_payload: usize,
}

#[derive(Clone, PartialEq, Eq)]
pub struct RsaSecret {
    d: BigUint,
    p: BigUint,
    q: BigUint,
    dp: BigUint,
    dq: BigUint,
    q_inv: BigUint,
}

impl std::fmt::Debug for RsaSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("RsaSecret(..)")
    }
}

/// `σ_ID = H1(ID)^d mod N` together with `ID`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    id: Vec<u8>,
    sigma: BigUint,
    modulus_bits: u16,
}

/// Querier-side record `(T*, σ_ID*, ID*)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OprfSubscription {
    pub tag: Tag,
    pub signature: Signature,
}

/// Receiver state between blinding and unblinding. Single use.
#[derive(Debug)]
pub struct BlindState {
    id: Vec<u8>,
    hashed: BigUint,
    r_inv: BigUint,
}

impl RsaParams {
    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn e(&self) -> &BigUint {
        &self.e
    }

    pub fn modulus_bits(&self) -> usize {
        self.n.bits() as usize
    }

    fn modulus_bytes(&self) -> usize {
        self.modulus_bits().div_ceil(8)
    }

    pub fn max_payload(&self) -> usize {
        self.max_payload
    }

    pub fn with_max_payload(mut self, max: usize) -> Self {
        self.max_payload = max;
        self
    }

    #[cfg(feature = "test-params")]
    pub fn with_truncated_tags(mut self) -> Self {
        self.tag_width = TagWidth::TRUNCATED_16;
        self
    }

    /// Public parameters from a modulus and exponent (e.g. loaded from disk).
    pub fn from_public(n: BigUint, e: BigUint) -> Result<Self, OprfError> {
        if n.is_even() || n.bits() < 2 {
            return Err(OprfError::Encoding);
        }
        Ok(RsaParams { n, e, tag_width: TagWidth::FULL, max_payload: DEFAULT_MAX_PAYLOAD })
    }

    /// `len (4) | N | len (4) | e`, big-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &self.n.to_bytes_be());
        put_bytes(&mut out, &self.e.to_bytes_be());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OprfError> {
        let mut r = Reader::new(bytes);
        let n = BigUint::from_bytes_be(r.bytes().map_err(|_| OprfError::Encoding)?);
        let e = BigUint::from_bytes_be(r.bytes().map_err(|_| OprfError::Encoding)?);
        r.finish().map_err(|_| OprfError::Encoding)?;
        Self::from_public(n, e)
    }

    /// The textbook key `N = 61 · 53 = 3233, e = 17, d = 2753`. Its primes
    /// are not safe primes; it exists to check arithmetic against hand
    /// computation.
    #[cfg(feature = "test-params")]
    pub fn textbook() -> (RsaParams, RsaSecret) {
        let (p, q) = (BigUint::from(61u32), BigUint::from(53u32));
        let e = BigUint::from(17u32);
        let d = BigUint::from(2753u32);
        let secret = RsaSecret::from_primes(p, q, d);
        let params = RsaParams { n: secret.n(), e, tag_width: TagWidth::FULL, max_payload: DEFAULT_MAX_PAYLOAD };
        (params, secret)
    }
}

impl RsaSecret {
    fn from_primes(p: BigUint, q: BigUint, d: BigUint) -> Self {
        let one = BigUint::one();
        let dp = &d % (&p - &one);
        let dq = &d % (&q - &one);
        let q_inv = q.modinv(&p).expect("distinct primes");
        RsaSecret { d, p, q, dp, dq, q_inv }
    }

    pub fn d(&self) -> &BigUint {
        &self.d
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn n(&self) -> BigUint {
        &self.p * &self.q
    }

    pub fn phi(&self) -> BigUint {
        (&self.p - 1u32) * (&self.q - 1u32)
    }

    /// `len (4) | p | len (4) | q | len (4) | d`, big-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [&self.p, &self.q, &self.d] {
            put_bytes(&mut out, &v.to_bytes_be());
        }
        out
    }

    pub fn from_bytes(params: &RsaParams, bytes: &[u8]) -> Result<Self, OprfError> {
        let mut r = Reader::new(bytes);
        let mut next = || r.bytes().map(BigUint::from_bytes_be).map_err(|_| OprfError::Encoding);
        let (p, q, d) = (next()?, next()?, next()?);
        r.finish().map_err(|_| OprfError::Encoding)?;
        Self::from_parts(params, p, q, d)
    }

    /// Rebuilds a secret from `(p, q, d)`, checking it against `params`.
    pub fn from_parts(params: &RsaParams, p: BigUint, q: BigUint, d: BigUint) -> Result<Self, OprfError> {
        if p == q || &p * &q != params.n {
            return Err(OprfError::Encoding);
        }
        let secret = RsaSecret::from_primes(p, q, d);
        if (&params.e * &secret.d) % secret.phi() != BigUint::one() {
            return Err(OprfError::Encoding);
        }
        Ok(secret)
    }
}

impl Signature {
    pub fn id(&self) -> &[u8] {
        &self.id
    }

    pub fn sigma(&self) -> &BigUint {
        &self.sigma
    }

    /// Fixed-width big-endian `σ`, sized to the modulus.
    pub fn sigma_bytes(&self) -> Vec<u8> {
        let width = (self.modulus_bits as usize).div_ceil(8);
        let raw = self.sigma.to_bytes_be();
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    /// `modulus_bits (2) | σ (fixed width)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.modulus_bits.to_be_bytes().to_vec();
        out.extend_from_slice(&self.sigma_bytes());
        out
    }

    /// Parses [`Signature::to_bytes`] and verifies it for `id`.
    pub fn from_bytes(params: &RsaParams, id: &[u8], bytes: &[u8]) -> Result<Self, OprfError> {
        let (bits, body) = bytes.split_first_chunk::<2>().ok_or(OprfError::Encoding)?;
        let bits = u16::from_be_bytes(*bits);
        if bits as usize != params.modulus_bits() || body.len() != params.modulus_bytes() {
            return Err(OprfError::Encoding);
        }
        let sigma = BigUint::from_bytes_be(body);
        if sigma >= params.n {
            return Err(OprfError::OutOfRange);
        }
        let hashed = full_domain_hash(params, id)?;
        if !verify(params, &sigma, &hashed) {
            return Err(OprfError::MalformedSignature);
        }
        Ok(Signature { id: id.to_vec(), sigma, modulus_bits: bits })
    }
}

impl OprfSubscription {
    pub fn upload(&self, handle: Vec<u8>) -> SubscriptionUpload {
        SubscriptionUpload { epoch: None, handle, tag: self.tag }
    }
}

/// RA setup over a safe modulus `N = pq`, `p = 2p' + 1`, `q = 2q' + 1`.
pub fn setup<R: RngCore + CryptoRng>(bits: usize, rng: &mut R) -> Result<(RsaParams, RsaSecret), OprfError> {
    if bits < MIN_MODULUS_BITS || !bits.is_multiple_of(2) {
        return Err(OprfError::ModulusSize(bits));
    }
    let e = BigUint::from(PUBLIC_EXPONENT);
    loop {
        let p = safe_prime::from_rng(bits / 2, rng).map_err(|_| OprfError::PrimeGeneration)?;
        let q = safe_prime::from_rng(bits / 2, rng).map_err(|_| OprfError::PrimeGeneration)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() as usize != bits {
            continue;
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        let Some(d) = e.modinv(&phi) else { continue };
        let secret = RsaSecret::from_primes(p, q, d);
        let params = RsaParams { n, e, tag_width: TagWidth::FULL, max_payload: DEFAULT_MAX_PAYLOAD };
        return Ok((params, secret));
    }
}

/// `H1: {0,1}* -> Z_N*`. SHA-256 expanded to `|N| + 128` bits, reduced mod
/// `N`; values not coprime to `N` are re-drawn with the next attempt counter.
pub fn full_domain_hash(params: &RsaParams, id: &[u8]) -> Result<BigUint, OprfError> {
    if id.is_empty() {
        return Err(OprfError::EmptyIdentifier);
    }
    ops::record(Op::Hash);
    let len = (params.modulus_bits() + 128).div_ceil(8);
    for attempt in 0u32.. {
        let mut stream = Vec::with_capacity(len + 32);
        for block in 0u32.. {
            if stream.len() >= len {
                break;
            }
            stream.extend_from_slice(&group::domain_hash(
                FDH_DOMAIN,
                &[id, &attempt.to_be_bytes(), &block.to_be_bytes()],
            ));
        }
        let candidate = BigUint::from_bytes_be(&stream[..len]) % &params.n;
        if is_unit(&candidate, &params.n) {
            return Ok(candidate);
        }
    }
    unreachable!("attempt counter exhausted")
}

fn verify(params: &RsaParams, sigma: &BigUint, hashed: &BigUint) -> bool {
    ops::verifying(|| matches!(mod_exp(sigma, &params.e, &params.n), Ok(v) if v == *hashed))
}

/// Receiver: `μ = H1(id) · r^e mod N` with `r` uniform in `Z_N*`.
pub fn blind<R: RngCore + CryptoRng>(
    params: &RsaParams,
    id: &[u8],
    rng: &mut R,
) -> Result<(BlindState, BigUint), OprfError> {
    let hashed = full_domain_hash(params, id)?;
    let r = loop {
        let r = rng.gen_biguint_range(&BigUint::one(), &params.n);
        if is_unit(&r, &params.n) {
            break r;
        }
    };
    Ok(blind_with(params, id, hashed, r))
}

fn blind_with(params: &RsaParams, id: &[u8], hashed: BigUint, r: BigUint) -> (BlindState, BigUint) {
    let r_e = mod_exp(&r, &params.e, &params.n).expect("modulus > 1");
    let mu = mod_mul(&hashed, &r_e, &params.n);
    let r_inv = r.modinv(&params.n).expect("r is a unit");
    (BlindState { id: id.to_vec(), hashed, r_inv }, mu)
}

/// Blinding with a caller-supplied `H1(id)` value and blinding factor.
#[cfg(feature = "test-params")]
pub fn blind_forced(params: &RsaParams, id: &[u8], hashed: BigUint, r: BigUint) -> (BlindState, BigUint) {
    blind_with(params, id, hashed, r)
}

/// RA: `μ' = μ^d mod N` via CRT.
pub fn sign_blinded(secret: &RsaSecret, mu: &BigUint) -> Result<BigUint, OprfError> {
    let n = secret.n();
    if *mu >= n {
        return Err(OprfError::OutOfRange);
    }
    ops::record(Op::Exp);
    let m1 = mu.modpow(&secret.dp, &secret.p);
    let m2 = mu.modpow(&secret.dq, &secret.q);
    let diff = (&m1 + &secret.p - (&m2 % &secret.p)) % &secret.p;
    let h = (&secret.q_inv * diff) % &secret.p;
    Ok(m2 + h * &secret.q)
}

/// Receiver: `σ = μ' / r mod N`, then checks `σ^e = H1(id)`.
pub fn unblind(state: BlindState, mu_prime: &BigUint, params: &RsaParams) -> Result<Signature, OprfError> {
    if *mu_prime >= params.n {
        return Err(OprfError::OutOfRange);
    }
    let sigma = mod_mul(mu_prime, &state.r_inv, &params.n);
    if !verify(params, &sigma, &state.hashed) {
        return Err(OprfError::MalformedSignature);
    }
    Ok(Signature { id: state.id, sigma, modulus_bits: params.modulus_bits() as u16 })
}

/// Plain registration: the RA computes `H1(id)^d` itself.
pub fn issue_plain(secret: &RsaSecret, params: &RsaParams, id: &[u8]) -> Result<Signature, OprfError> {
    let hashed = full_domain_hash(params, id)?;
    let sigma = sign_blinded(secret, &hashed)?;
    Ok(Signature { id: id.to_vec(), sigma, modulus_bits: params.modulus_bits() as u16 })
}

/// A two-party OPRF: the receiver learns `F(key, x)`, the key holder learns
/// nothing about `x`.
pub trait ObliviousPrf {
    type ServerKey;
    type State;
    type Output;

    fn blind<R: RngCore + CryptoRng>(&self, input: &[u8], rng: &mut R) -> Result<(Self::State, BigUint), OprfError>;
    fn evaluate(&self, key: &Self::ServerKey, blinded: &BigUint) -> Result<BigUint, OprfError>;
    fn finalize(&self, state: Self::State, evaluated: &BigUint) -> Result<Self::Output, OprfError>;
    fn output_tag(&self, output: &Self::Output) -> Tag;
}

impl ObliviousPrf for RsaParams {
    type ServerKey = RsaSecret;
    type State = BlindState;
    type Output = Signature;

    fn blind<R: RngCore + CryptoRng>(&self, input: &[u8], rng: &mut R) -> Result<(BlindState, BigUint), OprfError> {
        blind(self, input, rng)
    }

    fn evaluate(&self, key: &RsaSecret, blinded: &BigUint) -> Result<BigUint, OprfError> {
        sign_blinded(key, blinded)
    }

    fn finalize(&self, state: BlindState, evaluated: &BigUint) -> Result<Signature, OprfError> {
        unblind(state, evaluated, self)
    }

    fn output_tag(&self, output: &Signature) -> Tag {
        derive_tag(self.tag_width, output)
    }
}

/// `f(x) = H2(H1(x)^d)`, evaluated through the blind protocol.
pub fn oprf_eval<O: ObliviousPrf, R: RngCore + CryptoRng>(
    oprf: &O,
    key: &O::ServerKey,
    x: &[u8],
    rng: &mut R,
) -> Result<Tag, OprfError> {
    let (state, blinded) = oprf.blind(x, rng)?;
    let evaluated = oprf.evaluate(key, &blinded)?;
    let output = oprf.finalize(state, &evaluated)?;
    Ok(oprf.output_tag(&output))
}

fn derive_tag(width: TagWidth, sig: &Signature) -> Tag {
    hash_tag_with(width, &[&sig.sigma_bytes()])
}

fn derive_key(sig: &Signature) -> SymmetricKey {
    hash_key(&[&sig.sigma_bytes()])
}

/// Query subscription: `T* = H2(σ_ID*)`.
pub fn subscribe(params: &RsaParams, signature: &Signature) -> (OprfSubscription, Tag) {
    let tag = derive_tag(params.tag_width, signature);
    (OprfSubscription { tag, signature: signature.clone() }, tag)
}

/// Data report: `T = H2(σ_ID)`, `k = H3(σ_ID)`, `CT = Enc_k(D)`.
pub fn produce_report<R: RngCore + CryptoRng>(
    params: &RsaParams,
    signature: &Signature,
    measurement: &Measurement,
    rng: &mut R,
) -> Result<ReportEnvelope, OprfError> {
    let len = measurement.payload().len();
    if len > params.max_payload {
        return Err(OprfError::PayloadTooLarge { len, max: params.max_payload });
    }
    let tag = derive_tag(params.tag_width, signature);
    let ciphertext = sym::seal(&derive_key(signature), measurement.payload(), rng);
    Ok(ReportEnvelope { epoch: None, tag, ciphertext, sender: None })
}

/// Notification: `k = H3(σ_ID*)`, `D = Dec_k(CT)`.
pub fn open_notification(sub: &OprfSubscription, envelope: &ReportEnvelope) -> Result<Measurement, OprfError> {
    if envelope.tag != sub.tag {
        return Err(OprfError::NotMySubscription);
    }
    sym::open(&derive_key(&sub.signature), &envelope.ciphertext)
        .map(Measurement)
        .map_err(|_| OprfError::CorruptOrCollidingReport)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn key() -> &'static (RsaParams, RsaSecret) {
        static KEY: OnceLock<(RsaParams, RsaSecret)> = OnceLock::new();
        KEY.get_or_init(|| setup(1024, &mut ChaCha20Rng::seed_from_u64(99)).unwrap())
    }

    fn signature(id: &[u8], rng: &mut ChaCha20Rng) -> Signature {
        let (params, secret) = key();
        let (state, mu) = blind(params, id, rng).unwrap();
        unblind(state, &sign_blinded(secret, &mu).unwrap(), params).unwrap()
    }

    #[test]
    fn setup_produces_safe_modulus() {
        let (params, secret) = key();
        assert_eq!(params.modulus_bits(), 1024);
        assert_eq!(*params.n(), secret.n());
        assert!(secret.p() % 4u32 == BigUint::from(3u32));
        assert!(glass_pumpkin::safe_prime::check(secret.p()));
        assert!(glass_pumpkin::safe_prime::check(secret.q()));
        assert!(params.e().gcd(&secret.phi()).is_one());
        assert_eq!((params.e() * secret.d()) % secret.phi(), BigUint::one());
        assert_eq!(setup(512, &mut ChaCha20Rng::seed_from_u64(0)).unwrap_err(), OprfError::ModulusSize(512));
    }

    #[test]
    fn crt_signing_edges() {
        let (params, secret) = key();
        assert_eq!(sign_blinded(secret, &BigUint::one()).unwrap(), BigUint::one());
        assert_eq!(sign_blinded(secret, &BigUint::from(0u8)).unwrap(), BigUint::from(0u8));
        assert_eq!(sign_blinded(secret, params.n()), Err(OprfError::OutOfRange));
    }

    #[test]
    fn blind_sign_unblind() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (params, secret) = key();
        let (_, mu_a) = blind(params, b"pollution", &mut rng).unwrap();
        let (_, mu_b) = blind(params, b"pollution", &mut rng).unwrap();
        assert_ne!(mu_a, mu_b);
        assert!(mu_a < *params.n());

        let sig = signature(b"pollution", &mut rng);
        let hashed = full_domain_hash(params, b"pollution").unwrap();
        assert_eq!(*sig.sigma(), hashed.modpow(secret.d(), params.n()));
        assert_eq!(sig, issue_plain(secret, params, b"pollution").unwrap());
        assert_eq!(blind(params, b"", &mut rng).unwrap_err(), OprfError::EmptyIdentifier);
    }

    #[test]
    fn tampered_blind_signature_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (params, secret) = key();
        let (state, mu) = blind(params, b"x", &mut rng).unwrap();
        let bad = (sign_blinded(secret, &mu).unwrap() + 1u32) % params.n();
        assert_eq!(unblind(state, &bad, params), Err(OprfError::MalformedSignature));
    }

    #[test]
    fn key_encoding() {
        let (params, secret) = key();
        let p2 = RsaParams::from_bytes(&params.to_bytes()).unwrap();
        assert_eq!(&p2, params);
        assert_eq!(&RsaSecret::from_bytes(&p2, &secret.to_bytes()).unwrap(), secret);
        let (other, _) = RsaParams::textbook();
        assert_eq!(RsaSecret::from_bytes(&other, &secret.to_bytes()).unwrap_err(), OprfError::Encoding);
        assert!(RsaParams::from_bytes(&params.to_bytes()[1..]).is_err());
    }

    #[test]
    fn signature_encoding() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (params, _) = key();
        let sig = signature(b"x", &mut rng);
        let bytes = sig.to_bytes();
        assert_eq!(bytes.len(), 2 + 128);
        assert_eq!(&bytes[..2], &1024u16.to_be_bytes());
        assert_eq!(Signature::from_bytes(params, b"x", &bytes).unwrap(), sig);
        assert_eq!(Signature::from_bytes(params, b"y", &bytes), Err(OprfError::MalformedSignature));
    }

    #[test]
    fn report_round_trip_and_roles() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (params, _) = key();
        let sig = signature(b"pollution|manhattan", &mut rng);
        // The same signature serves both to subscribe and to report.
        let (sub, tag) = subscribe(params, &sig);
        let d = Measurement::from("PM2.5=12");
        let a = produce_report(params, &sig, &d, &mut rng).unwrap();
        let b = produce_report(params, &sig, &d, &mut rng).unwrap();
        assert_eq!((a.tag, b.tag), (tag, tag));
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_eq!(a.epoch, None);
        assert_eq!(open_notification(&sub, &a).unwrap(), d);

        let mut bad = a.clone();
        bad.ciphertext[15] ^= 0x80;
        assert_eq!(open_notification(&sub, &bad), Err(OprfError::CorruptOrCollidingReport));

        let other = signature(b"pollution|harlem", &mut rng);
        let env = produce_report(params, &other, &d, &mut rng).unwrap();
        assert_eq!(open_notification(&sub, &env), Err(OprfError::NotMySubscription));
    }

    #[test]
    fn reporting_does_no_exponentiation() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (params, _) = key();
        let sig = signature(b"a", &mut rng);
        let (_, tally) = ops::measure(|| produce_report(params, &sig, &Measurement::from("1"), &mut rng).unwrap());
        assert_eq!(tally.total().exponentiations, 0);
        assert_eq!(tally.total().hashes, 2);
    }

    #[test]
    fn oprf_eval_matches_direct_signature() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (params, secret) = key();
        let via_protocol = oprf_eval(params, secret, b"x", &mut rng).unwrap();
        assert_eq!(via_protocol, oprf_eval(params, secret, b"x", &mut rng).unwrap());
        let direct = issue_plain(secret, params, b"x").unwrap();
        assert_eq!(via_protocol, subscribe(params, &direct).1);
    }
}
