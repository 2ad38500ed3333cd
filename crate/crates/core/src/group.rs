//! Group and hash primitives.
//!
//! The protocols are written for a symmetric pairing `e: G x G -> G_T`. Secure
//! curves only offer asymmetric pairings, so a source-group element is carried
//! as its image in BLS12-381 G1 together with, when known, the image of the
//! same discrete logarithm in G2 (the "twist image"). Elements the RA or an
//! encryptor builds from known exponents (`g`, `X1`, `X2`, `h`, `g^r`) carry
//! both; hashed identities and everything derived from them carry only G1.
//! [`pairing`] puts the G1 side of one argument against the G2 side of the
//! other, which gives a symmetric, bilinear map on every pair the protocols
//! use.

use std::fmt;
use std::sync::LazyLock;

use ark_bls12_381::{g1, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{BigInteger, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use num_bigint::BigUint;
use num_traits::One;
use pepsi_wire::{Tag, TAG_LEN};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::ops::{self, Op};

/// Compressed G1 encoding width.
pub const G1_COMPRESSED_LEN: usize = 48;
const G2_COMPRESSED_LEN: usize = 96;
/// Scalar encoding width.
pub const SCALAR_LEN: usize = 32;
/// Symmetric key width (AES-256).
pub const KEY_LEN: usize = 32;

const H1_DST: &[u8] = b"PEPSI-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const TAG_DOMAIN: &[u8] = b"PEPSI-H2-tag";
const KEY_DOMAIN: &[u8] = b"PEPSI-H3-key";

const FORM_G1_ONLY: u8 = 0x00;
const FORM_WITH_TWIST: u8 = 0x01;

type G1Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

static H1: LazyLock<G1Hasher> =
    LazyLock::new(|| G1Hasher::new(H1_DST).expect("static hash-to-curve parameters"));

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("empty identifier")]
    EmptyIdentifier,
    #[error("invalid point encoding")]
    InvalidPoint,
    #[error("point is not in the prime-order subgroup")]
    NotInSubgroup,
    #[error("twist image does not match the G1 point")]
    InconsistentTwist,
    #[error("invalid scalar encoding")]
    InvalidScalar,
    #[error("scalar must be nonzero")]
    ZeroScalar,
    #[error("invalid target-group encoding")]
    InvalidGt,
    #[error("neither pairing argument carries a twist image")]
    Unpairable,
    #[error("modulus must be at least 2")]
    ModulusTooSmall,
}

/// Nonzero element of the scalar field `F_q`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(Fr);

impl Scalar {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let x = Fr::rand(rng);
            if !x.is_zero() {
                return Scalar(x);
            }
        }
    }

    pub fn from_u64(v: u64) -> Result<Self, GroupError> {
        Self::from_field(Fr::from(v))
    }

    fn from_field(x: Fr) -> Result<Self, GroupError> {
        if x.is_zero() {
            Err(GroupError::ZeroScalar)
        } else {
            Ok(Scalar(x))
        }
    }

    /// Fixed-width big-endian encoding.
    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        let be = self.0.into_bigint().to_bytes_be();
        be.try_into().expect("scalar field is 32 bytes")
    }

    /// Rejects values `>= q` and zero.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != SCALAR_LEN {
            return Err(GroupError::InvalidScalar);
        }
        let value = BigUint::from_bytes_be(bytes);
        let modulus: BigUint = Fr::MODULUS.into();
        if value >= modulus {
            return Err(GroupError::InvalidScalar);
        }
        Self::from_field(Fr::from_be_bytes_mod_order(bytes))
    }

    pub fn inverse(&self) -> Scalar {
        use ark_ff::Field;
        Scalar(self.0.inverse().expect("nonzero"))
    }

    pub fn to_biguint(&self) -> BigUint {
        self.0.into_bigint().into()
    }
}

impl std::ops::Mul for Scalar {
    type Output = Scalar;

    fn mul(self, rhs: Scalar) -> Scalar {
        // q is prime, so a product of nonzero elements is nonzero.
        Scalar(self.0 * rhs.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// The prime order `q` of the source and target groups.
pub fn group_order() -> BigUint {
    Fr::MODULUS.into()
}

/// Element of the source group `G`.
#[derive(Clone, Copy)]
pub struct G1Element {
    point: G1Projective,
    twist: Option<G2Projective>,
}

impl G1Element {
    pub fn generator() -> Self {
        G1Element { point: G1Projective::generator(), twist: Some(G2Projective::generator()) }
    }

    pub fn identity() -> Self {
        G1Element { point: G1Projective::zero(), twist: Some(G2Projective::zero()) }
    }

    pub fn is_identity(&self) -> bool {
        self.point.is_zero()
    }

    pub fn has_twist(&self) -> bool {
        self.twist.is_some()
    }

    /// `self^k`.
    pub fn pow(&self, k: &Scalar) -> Self {
        ops::record(Op::Exp);
        G1Element { point: self.point * k.0, twist: self.twist.map(|t| t * k.0) }
    }

    /// Group operation `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        ops::record(Op::Mul);
        G1Element {
            point: self.point + other.point,
            twist: self.twist.zip(other.twist).map(|(a, b)| a + b),
        }
    }

    /// `self / other`.
    pub fn div(&self, other: &Self) -> Self {
        ops::record(Op::Mul);
        G1Element {
            point: self.point - other.point,
            twist: self.twist.zip(other.twist).map(|(a, b)| a - b),
        }
    }

    /// Canonical 48-byte compressed encoding of the group element. This is
    /// what enters every hash.
    pub fn to_compressed(&self) -> [u8; G1_COMPRESSED_LEN] {
        let mut out = [0u8; G1_COMPRESSED_LEN];
        self.point
            .into_affine()
            .serialize_compressed(&mut out[..])
            .expect("fixed-size buffer");
        out
    }

    /// Full encoding: form byte, compressed G1 point, then the compressed twist
    /// image when present.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + G1_COMPRESSED_LEN + G2_COMPRESSED_LEN);
        match self.twist {
            None => out.push(FORM_G1_ONLY),
            Some(_) => out.push(FORM_WITH_TWIST),
        }
        out.extend_from_slice(&self.to_compressed());
        if let Some(t) = self.twist {
            t.into_affine().serialize_compressed(&mut out).expect("vec writer");
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        1 + G1_COMPRESSED_LEN + if self.twist.is_some() { G2_COMPRESSED_LEN } else { 0 }
    }

    /// Parses [`G1Element::encode`] output from the front of `bytes`,
    /// returning the element and the number of bytes consumed. Performs
    /// on-curve, subgroup and twist-consistency checks.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), GroupError> {
        let (&form, rest) = bytes.split_first().ok_or(GroupError::InvalidPoint)?;
        if rest.len() < G1_COMPRESSED_LEN {
            return Err(GroupError::InvalidPoint);
        }
        let point = decode_g1(&rest[..G1_COMPRESSED_LEN])?;
        match form {
            FORM_G1_ONLY => Ok((G1Element { point: point.into(), twist: None }, 1 + G1_COMPRESSED_LEN)),
            FORM_WITH_TWIST => {
                let raw = rest
                    .get(G1_COMPRESSED_LEN..G1_COMPRESSED_LEN + G2_COMPRESSED_LEN)
                    .ok_or(GroupError::InvalidPoint)?;
                let twist = G2Affine::deserialize_compressed(raw).map_err(|_| GroupError::InvalidPoint)?;
                // Same discrete log on both sides: e(P, g2) == e(g1, Q).
                let lhs = Bls12_381::pairing(point, G2Affine::generator());
                let rhs = Bls12_381::pairing(G1Affine::generator(), twist);
                if lhs != rhs {
                    return Err(GroupError::InconsistentTwist);
                }
                Ok((
                    G1Element { point: point.into(), twist: Some(twist.into()) },
                    1 + G1_COMPRESSED_LEN + G2_COMPRESSED_LEN,
                ))
            }
            _ => Err(GroupError::InvalidPoint),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, GroupError> {
        let (el, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(GroupError::InvalidPoint);
        }
        Ok(el)
    }

    /// Parses the 48-byte canonical form. The result carries no twist image.
    pub fn from_compressed(bytes: &[u8]) -> Result<Self, GroupError> {
        Ok(G1Element { point: decode_g1(bytes)?.into(), twist: None })
    }

    pub fn is_in_subgroup(&self) -> bool {
        let a = self.point.into_affine();
        a.is_on_curve() && a.is_in_correct_subgroup_assuming_on_curve()
    }

    /// Drops the twist image, leaving the element as a hashed element would be.
    pub fn without_twist(&self) -> Self {
        G1Element { point: self.point, twist: None }
    }
}

fn decode_g1(bytes: &[u8]) -> Result<G1Affine, GroupError> {
    if bytes.len() != G1_COMPRESSED_LEN {
        return Err(GroupError::InvalidPoint);
    }
    let unchecked = G1Affine::deserialize_compressed_unchecked(bytes).map_err(|_| GroupError::InvalidPoint)?;
    if !unchecked.is_on_curve() {
        return Err(GroupError::InvalidPoint);
    }
    if !unchecked.is_in_correct_subgroup_assuming_on_curve() {
        return Err(GroupError::NotInSubgroup);
    }
    Ok(unchecked)
}

/// Elements are equal when they are the same group element, whether or not
/// both sides carry a twist image.
impl PartialEq for G1Element {
    fn eq(&self, other: &Self) -> bool {
        self.point == other.point
    }
}

impl Eq for G1Element {}

impl fmt::Debug for G1Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.to_compressed()[..8].iter().map(|b| format!("{b:02x}")).collect();
        write!(f, "G1Element({hex}..{})", if self.twist.is_some() { ", twist" } else { "" })
    }
}

/// Element of the target group `G_T`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GtElement(PairingOutput<Bls12_381>);

impl GtElement {
    pub fn identity() -> Self {
        GtElement(PairingOutput::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    pub fn pow(&self, k: &Scalar) -> Self {
        ops::record(Op::Exp);
        GtElement(self.0 * k.0)
    }

    /// Small non-negative exponent, uncounted. Mostly for tests.
    pub fn pow_u64(&self, k: u64) -> Self {
        GtElement(self.0 * Fr::from(k))
    }

    pub fn mul(&self, other: &Self) -> Self {
        ops::record(Op::Mul);
        GtElement(self.0 + other.0)
    }

    /// Fixed-width (576-byte) canonical encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(576);
        self.0.serialize_compressed(&mut out).expect("vec writer");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        PairingOutput::deserialize_compressed(bytes)
            .map(GtElement)
            .map_err(|_| GroupError::InvalidGt)
    }
}

impl fmt::Debug for GtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.to_bytes()[..8].iter().map(|b| format!("{b:02x}")).collect();
        write!(f, "GtElement({hex}..)")
    }
}

/// The symmetric pairing `e(a, b)`.
///
/// At least one argument must carry a twist image; every element built from
/// public parameters does.
pub fn pairing(a: &G1Element, b: &G1Element) -> Result<GtElement, GroupError> {
    let (p, q) = match (b.twist, a.twist) {
        (Some(q), _) => (a.point, q),
        (None, Some(q)) => (b.point, q),
        (None, None) => return Err(GroupError::Unpairable),
    };
    ops::record(Op::Pairing);
    Ok(GtElement(Bls12_381::pairing(p, q)))
}

/// `H1: {0,1}* -> G`, hash-to-curve (SSWU, random-oracle variant) with a fixed
/// domain-separation tag.
pub fn hash_to_g1(label: &[u8]) -> Result<G1Element, GroupError> {
    if label.is_empty() {
        return Err(GroupError::EmptyIdentifier);
    }
    ops::record(Op::Hash);
    let point = H1.hash(label).expect("hash-to-curve is total on nonempty input");
    Ok(G1Element { point: point.into(), twist: None })
}

/// Unambiguous encoding of a field sequence: each field is preceded by its
/// length as an 8-byte big-endian integer.
pub fn frame(inputs: &[&[u8]]) -> Vec<u8> {
    let total: usize = inputs.iter().map(|i| 8 + i.len()).sum();
    let mut out = Vec::with_capacity(total);
    for input in inputs {
        out.extend_from_slice(&(input.len() as u64).to_be_bytes());
        out.extend_from_slice(input);
    }
    out
}

/// SHA-256 over `frame([domain, inputs...])`. Uncounted.
pub(crate) fn domain_hash(domain: &[u8], inputs: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(frame(&[domain]));
    h.update(frame(inputs));
    h.finalize().into()
}

/// How many leading tag bytes carry hash output; the rest are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagWidth(usize);

impl TagWidth {
    pub const FULL: TagWidth = TagWidth(TAG_LEN);

    /// 16-bit tags. Collisions can be found by brute force.
    #[cfg(feature = "test-params")]
    pub const TRUNCATED_16: TagWidth = TagWidth(2);

    pub fn bits(&self) -> usize {
        self.0 * 8
    }
}

impl Default for TagWidth {
    fn default() -> Self {
        TagWidth::FULL
    }
}

/// `H2`: matching tag over a field sequence.
pub fn hash_tag(inputs: &[&[u8]]) -> Tag {
    hash_tag_with(TagWidth::FULL, inputs)
}

pub(crate) fn hash_tag_with(width: TagWidth, inputs: &[&[u8]]) -> Tag {
    ops::record(Op::Hash);
    let mut bytes = domain_hash(TAG_DOMAIN, inputs);
    bytes[width.0..].fill(0);
    Tag::new(bytes)
}

/// Symmetric key derived by [`hash_key`].
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey([u8; KEY_LEN]);

impl SymmetricKey {
    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

/// `H3`: symmetric key over a field sequence, domain-separated from `H2`.
pub fn hash_key(inputs: &[&[u8]]) -> SymmetricKey {
    ops::record(Op::Hash);
    SymmetricKey(domain_hash(KEY_DOMAIN, inputs))
}

/// `base^exponent mod modulus`.
pub fn mod_exp(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint, GroupError> {
    if *modulus < BigUint::from(2u8) {
        return Err(GroupError::ModulusTooSmall);
    }
    ops::record(Op::Exp);
    Ok(base.modpow(exponent, modulus))
}

/// `a · b mod modulus`.
pub(crate) fn mod_mul(a: &BigUint, b: &BigUint, modulus: &BigUint) -> BigUint {
    ops::record(Op::Mul);
    (a * b) % modulus
}

pub(crate) fn is_unit(x: &BigUint, modulus: &BigUint) -> bool {
    use num_integer::Integer;
    !num_traits::Zero::is_zero(x) && x.gcd(modulus).is_one()
}
