//! Blind-anonymous identity-based encryption.
//!
//! Four algorithms: [`setup`], the three-message blind extraction
//! ([`blind_extract_request`], [`blind_extract_respond`],
//! [`blind_extract_finalize`]), [`encrypt`] and [`decrypt`]. The authority
//! answering an extraction request sees only `H(id) · g^r` for a fresh `r`.

use rand::{CryptoRng, RngCore};

use crate::group::{self, hash_to_g1, pairing, G1Element, GroupError, Scalar, SCALAR_LEN};
use crate::ops::{self, Op};

/// Message length `n` in bytes (256 bits).
pub const MESSAGE_LEN: usize = 32;

const ENCODING_VERSION: u8 = 0x01;
const PAD_DOMAIN: &[u8] = b"PEPSI-IBE-pad";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IbeError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("malformed key material")]
    MalformedKey,
    #[error("message must be {MESSAGE_LEN} bytes, got {0}")]
    MessageLength(usize),
    #[error("unsupported encoding version {0:#04x}")]
    Version(u8),
    #[error("truncated or oversized encoding")]
    Encoding,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IbePublicKey {
    g: G1Element,
    x1: G1Element,
    x2: G1Element,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IbeMasterSecret {
    x1: Scalar,
    x2: Scalar,
}

/// `(sk1, sk2) = (H(id)^x1, H(id)^x2)` for `identity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IbeSecretKey {
    sk1: G1Element,
    sk2: G1Element,
    identity: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IbeCiphertext {
    pub c1: G1Element,
    pub c2: [u8; MESSAGE_LEN],
}

/// Client-side secret kept between request and finalize. Single use.
#[derive(Debug)]
pub struct BlindingState {
    r: Scalar,
    identity: Vec<u8>,
    hashed: G1Element,
}

/// The authority's reply `(req^x1, req^x2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractResponse {
    pub sk1: G1Element,
    pub sk2: G1Element,
}

impl IbeMasterSecret {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        IbeMasterSecret { x1: Scalar::random(rng), x2: Scalar::random(rng) }
    }

    pub fn x1(&self) -> &Scalar {
        &self.x1
    }

    pub fn x2(&self) -> &Scalar {
        &self.x2
    }

    pub fn public_key(&self) -> IbePublicKey {
        let g = G1Element::generator();
        IbePublicKey { x1: g.pow(&self.x1), x2: g.pow(&self.x2), g }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        out.extend_from_slice(&self.x1.to_bytes());
        out.extend_from_slice(&self.x2.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbeError> {
        let body = strip_version(bytes)?;
        if body.len() != 2 * SCALAR_LEN {
            return Err(IbeError::Encoding);
        }
        Ok(IbeMasterSecret {
            x1: Scalar::from_bytes(&body[..SCALAR_LEN])?,
            x2: Scalar::from_bytes(&body[SCALAR_LEN..])?,
        })
    }
}

impl IbePublicKey {
    pub fn g(&self) -> &G1Element {
        &self.g
    }

    pub fn x1(&self) -> &G1Element {
        &self.x1
    }

    pub fn x2(&self) -> &G1Element {
        &self.x2
    }

    /// Checks `e(sk1, g) = e(H(id), X1)` and `e(sk2, g) = e(H(id), X2)`.
    pub fn is_valid_key(&self, key: &IbeSecretKey) -> bool {
        ops::verifying(|| match hash_to_g1(&key.identity) {
            Ok(hashed) => self.check_key(&hashed, &key.sk1, &key.sk2),
            Err(_) => false,
        })
    }

    fn check_key(&self, hashed: &G1Element, sk1: &G1Element, sk2: &G1Element) -> bool {
        ops::verifying(|| {
            let check = |sk: &G1Element, x: &G1Element| -> Result<bool, GroupError> {
                Ok(pairing(sk, &self.g)? == pairing(hashed, x)?)
            };
            matches!(check(sk1, &self.x1), Ok(true)) && matches!(check(sk2, &self.x2), Ok(true))
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        for el in [&self.g, &self.x1, &self.x2] {
            out.extend_from_slice(&el.encode());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbeError> {
        let mut rest = strip_version(bytes)?;
        let mut next = || -> Result<G1Element, IbeError> {
            let (el, used) = G1Element::decode_prefix(rest)?;
            rest = &rest[used..];
            if !el.has_twist() {
                return Err(IbeError::Encoding);
            }
            Ok(el)
        };
        let pk = IbePublicKey { g: next()?, x1: next()?, x2: next()? };
        if !rest.is_empty() || pk.g != G1Element::generator() {
            return Err(IbeError::Encoding);
        }
        Ok(pk)
    }
}

impl IbeSecretKey {
    pub fn sk1(&self) -> &G1Element {
        &self.sk1
    }

    pub fn sk2(&self) -> &G1Element {
        &self.sk2
    }

    pub fn identity(&self) -> &[u8] {
        &self.identity
    }

    /// Assembles a key from parts without checking it; see
    /// [`IbePublicKey::is_valid_key`].
    pub fn from_parts(sk1: G1Element, sk2: G1Element, identity: Vec<u8>) -> Self {
        IbeSecretKey { sk1: sk1.without_twist(), sk2: sk2.without_twist(), identity }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        out.extend_from_slice(&self.sk1.encode());
        out.extend_from_slice(&self.sk2.encode());
        pepsi_wire::put_bytes(&mut out, &self.identity);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbeError> {
        let rest = strip_version(bytes)?;
        let (sk1, a) = G1Element::decode_prefix(rest)?;
        let (sk2, b) = G1Element::decode_prefix(&rest[a..])?;
        let mut r = pepsi_wire::Reader::new(&rest[a + b..]);
        let identity = r.bytes().map_err(|_| IbeError::Encoding)?.to_vec();
        r.finish().map_err(|_| IbeError::Encoding)?;
        Ok(IbeSecretKey::from_parts(sk1, sk2, identity))
    }
}

impl IbeCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        out.extend_from_slice(&self.c1.encode());
        out.extend_from_slice(&self.c2);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IbeError> {
        let rest = strip_version(bytes)?;
        let (c1, used) = G1Element::decode_prefix(rest)?;
        let c2: [u8; MESSAGE_LEN] = rest[used..].try_into().map_err(|_| IbeError::Encoding)?;
        Ok(IbeCiphertext { c1, c2 })
    }
}

fn strip_version(bytes: &[u8]) -> Result<&[u8], IbeError> {
    match bytes.split_first() {
        Some((&ENCODING_VERSION, rest)) => Ok(rest),
        Some((&v, _)) => Err(IbeError::Version(v)),
        None => Err(IbeError::Encoding),
    }
}

pub fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (IbePublicKey, IbeMasterSecret) {
    let msk = IbeMasterSecret::random(rng);
    (msk.public_key(), msk)
}

/// User side, first message: `req = H(id) · g^r`.
pub fn blind_extract_request<R: RngCore + CryptoRng>(
    pk: &IbePublicKey,
    id: &[u8],
    rng: &mut R,
) -> Result<(BlindingState, G1Element), IbeError> {
    let r = Scalar::random(rng);
    blind_extract_request_with(pk, id, r)
}

fn blind_extract_request_with(
    pk: &IbePublicKey,
    id: &[u8],
    r: Scalar,
) -> Result<(BlindingState, G1Element), IbeError> {
    let hashed = hash_to_g1(id)?;
    let request = hashed.mul(&pk.g.without_twist().pow(&r));
    Ok((BlindingState { r, identity: id.to_vec(), hashed }, request))
}

/// Same as [`blind_extract_request`] with a caller-chosen blinding exponent.
#[cfg(feature = "test-params")]
pub fn blind_extract_request_fixed(
    pk: &IbePublicKey,
    id: &[u8],
    r: Scalar,
) -> Result<(BlindingState, G1Element), IbeError> {
    blind_extract_request_with(pk, id, r)
}

/// Authority side: `(req^x1, req^x2)`.
pub fn blind_extract_respond(msk: &IbeMasterSecret, request: &G1Element) -> Result<ExtractResponse, IbeError> {
    if !request.is_in_subgroup() {
        return Err(GroupError::NotInSubgroup.into());
    }
    Ok(ExtractResponse { sk1: request.pow(&msk.x1), sk2: request.pow(&msk.x2) })
}

/// User side, last step: `sk_i = sk'_i / X_i^r`, then the pairing validity
/// check. A failing check means the authority answered dishonestly.
pub fn blind_extract_finalize(
    pk: &IbePublicKey,
    state: BlindingState,
    response: &ExtractResponse,
) -> Result<IbeSecretKey, IbeError> {
    let sk1 = response.sk1.without_twist().div(&pk.x1.without_twist().pow(&state.r));
    let sk2 = response.sk2.without_twist().div(&pk.x2.without_twist().pow(&state.r));
    if !pk.check_key(&state.hashed, &sk1, &sk2) {
        return Err(IbeError::MalformedKey);
    }
    Ok(IbeSecretKey { sk1, sk2, identity: state.identity })
}

fn pad(id: &[u8], c1: &G1Element, z1: &group::GtElement, z2: &group::GtElement) -> [u8; MESSAGE_LEN] {
    ops::record(Op::Hash);
    group::domain_hash(PAD_DOMAIN, &[id, &c1.to_compressed(), &z1.to_bytes(), &z2.to_bytes()])
}

fn xor(a: &[u8; MESSAGE_LEN], b: &[u8]) -> [u8; MESSAGE_LEN] {
    let mut out = *a;
    out.iter_mut().zip(b).for_each(|(o, b)| *o ^= b);
    out
}

pub fn encrypt<R: RngCore + CryptoRng>(
    pk: &IbePublicKey,
    id: &[u8],
    message: &[u8],
    rng: &mut R,
) -> Result<IbeCiphertext, IbeError> {
    encrypt_with(pk, id, message, Scalar::random(rng))
}

/// Encryption with caller-chosen randomness `r`.
#[cfg(feature = "test-params")]
pub fn encrypt_fixed(pk: &IbePublicKey, id: &[u8], message: &[u8], r: Scalar) -> Result<IbeCiphertext, IbeError> {
    encrypt_with(pk, id, message, r)
}

fn encrypt_with(pk: &IbePublicKey, id: &[u8], message: &[u8], r: Scalar) -> Result<IbeCiphertext, IbeError> {
    if message.len() != MESSAGE_LEN {
        return Err(IbeError::MessageLength(message.len()));
    }
    let hashed = hash_to_g1(id)?;
    let z1 = pairing(&hashed, &pk.x1)?.pow(&r);
    let z2 = pairing(&hashed, &pk.x2)?.pow(&r);
    let c1 = pk.g.pow(&r);
    let c2 = xor(&pad(id, &c1, &z1, &z2), message);
    Ok(IbeCiphertext { c1, c2 })
}

/// Recomputes the pad from `e(sk1, c1), e(sk2, c1)` and the key's identity.
/// A key for another identity yields an unrelated bit string, not an error.
pub fn decrypt(key: &IbeSecretKey, ct: &IbeCiphertext) -> Result<[u8; MESSAGE_LEN], IbeError> {
    let z1 = pairing(&key.sk1, &ct.c1)?;
    let z2 = pairing(&key.sk2, &ct.c1)?;
    Ok(xor(&pad(&key.identity, &ct.c1, &z1, &z2), &ct.c2))
}
