//! The pairing-based protocol suite.
//!
//! Parties and what they hold:
//!
//! * the Registration Authority: [`PepsiSecret`] (`x1, x2, z`) and the
//!   node registry;
//! * a mobile node: a [`NodeCredential`] `(ID, z, epoch)` per identifier;
//! * a querier: a [`QueryAuthorization`] `(sk1, sk2)` per identifier, obtained
//!   blindly, and a [`SubscriptionSecret`] per epoch;
//! * the broker: tags only.
//!
//! A node reports with `Z_i = e(H1(ID)^z, X_i)`; a querier subscribes with
//! `Z_i* = e(h, sk_i)`. Both equal `e(H1(ID), g)^(z·x_i)`, so
//! `T = H2(ID, h, Z1, Z2)` and `k = H3(ID, h, Z1, Z2)` agree on both sides.
//!
//! Every registered node receives the raw nonce `z`, so any registered node
//! can report under any identifier and can also derive the matching tags. This
//! protocol does not hide a node's reports from other registered nodes.

use std::collections::{BTreeMap, BTreeSet};

use pepsi_wire::{put_bytes, Reader, ReportEnvelope, SubscriptionUpload, Tag};
use rand::{CryptoRng, RngCore};

use crate::group::{
    hash_key, hash_tag_with, hash_to_g1, pairing, G1Element, GroupError, GtElement, Scalar, SymmetricKey,
    TagWidth,
};
use crate::ibe::{self, ExtractResponse, IbeError, IbeMasterSecret, IbePublicKey, IbeSecretKey};
use crate::ident::Identifier;
use crate::measurement::{Measurement, DEFAULT_MAX_PAYLOAD};
use crate::sym;

const ENCODING_VERSION: u8 = 0x01;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PepsiError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Ibe(IbeError),
    #[error("malformed authorization")]
    MalformedAuthorization,
    #[error("stale credential: issued for epoch {credential}, current epoch is {current}")]
    StaleCredential { credential: u64, current: u64 },
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("not my subscription")]
    NotMySubscription,
    #[error("corrupt or colliding report")]
    CorruptOrCollidingReport,
    #[error("node {0:?} has been evicted")]
    NodeEvicted(String),
    #[error("malformed encoding")]
    Encoding,
}

impl From<IbeError> for PepsiError {
    fn from(e: IbeError) -> Self {
        match e {
            IbeError::MalformedKey => PepsiError::MalformedAuthorization,
            IbeError::Group(g) => PepsiError::Group(g),
            other => PepsiError::Ibe(other),
        }
    }
}

/// Public parameters: the IBE public key plus `h = g^z` and the epoch of `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PepsiParams {
    ibe: IbePublicKey,
    h: G1Element,
    epoch: u64,
    tag_width: TagWidth,
    max_payload: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PepsiSecret {
    msk: IbeMasterSecret,
    z: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCredential {
    pub id: Identifier,
    pub z: Scalar,
    pub epoch: u64,
}

/// `σ_ID* = (sk1, sk2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryAuthorization {
    id: Identifier,
    key: IbeSecretKey,
}

/// Querier-side record `(T*, ID*, Z1*, Z2*)` for one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubscriptionSecret {
    pub tag: Tag,
    pub id: Identifier,
    pub z1: GtElement,
    pub z2: GtElement,
    pub h: G1Element,
    pub epoch: u64,
}

/// Querier state between sending `μ` and receiving `(μ'1, μ'2)`.
#[derive(Debug)]
pub struct PendingAuthorization {
    id: Identifier,
    blinding: ibe::BlindingState,
}

/// What the RA sees and says during a query authorization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthorizationTranscript {
    pub request: G1Element,
    pub response: ExtractResponse,
}

/// New credentials for one node after a nonce renewal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Redistribution {
    pub node: String,
    pub credentials: Vec<NodeCredential>,
}

impl PepsiParams {
    pub fn ibe(&self) -> &IbePublicKey {
        &self.ibe
    }

    pub fn h(&self) -> &G1Element {
        &self.h
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn max_payload(&self) -> usize {
        self.max_payload
    }

    pub fn with_max_payload(mut self, max: usize) -> Self {
        self.max_payload = max;
        self
    }

    /// Switches to 16-bit tags. Collisions become easy to provoke.
    #[cfg(feature = "test-params")]
    pub fn with_truncated_tags(mut self) -> Self {
        self.tag_width = TagWidth::TRUNCATED_16;
        self
    }

    pub fn tag_width(&self) -> TagWidth {
        self.tag_width
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        put_bytes(&mut out, &self.ibe.to_bytes());
        out.extend_from_slice(&self.h.encode());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PepsiError> {
        let mut r = versioned(bytes)?;
        let ibe = IbePublicKey::from_bytes(r.bytes().map_err(|_| PepsiError::Encoding)?)?;
        let rest = r.take(r.remaining()).map_err(|_| PepsiError::Encoding)?;
        let (h, used) = G1Element::decode_prefix(rest)?;
        let epoch: [u8; 8] = rest[used..].try_into().map_err(|_| PepsiError::Encoding)?;
        if !h.has_twist() {
            return Err(PepsiError::Encoding);
        }
        Ok(PepsiParams {
            ibe,
            h,
            epoch: u64::from_be_bytes(epoch),
            tag_width: TagWidth::FULL,
            max_payload: DEFAULT_MAX_PAYLOAD,
        })
    }
}

impl PepsiSecret {
    pub fn msk(&self) -> &IbeMasterSecret {
        &self.msk
    }

    pub fn z(&self) -> &Scalar {
        &self.z
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        put_bytes(&mut out, &self.msk.to_bytes());
        out.extend_from_slice(&self.z.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PepsiError> {
        let mut r = versioned(bytes)?;
        let msk = IbeMasterSecret::from_bytes(r.bytes().map_err(|_| PepsiError::Encoding)?)?;
        let z = Scalar::from_bytes(r.take(r.remaining()).map_err(|_| PepsiError::Encoding)?)?;
        Ok(PepsiSecret { msk, z })
    }
}

impl NodeCredential {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        put_bytes(&mut out, self.id.as_bytes());
        out.extend_from_slice(&self.z.to_bytes());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PepsiError> {
        let mut r = versioned(bytes)?;
        let id = read_identifier(&mut r)?;
        let z = Scalar::from_bytes(r.take(32).map_err(|_| PepsiError::Encoding)?)?;
        let epoch = r.u64().map_err(|_| PepsiError::Encoding)?;
        r.finish().map_err(|_| PepsiError::Encoding)?;
        Ok(NodeCredential { id, z, epoch })
    }
}

impl QueryAuthorization {
    pub fn id(&self) -> &Identifier {
        &self.id
    }

    pub fn key(&self) -> &IbeSecretKey {
        &self.key
    }

    /// Rebuilds an authorization from stored key material, checking it
    /// against `params`.
    pub fn from_key(params: &PepsiParams, key: IbeSecretKey) -> Result<Self, PepsiError> {
        let id = Identifier::from_canonical(
            std::str::from_utf8(key.identity()).map_err(|_| PepsiError::Encoding)?,
        )
        .map_err(|_| PepsiError::Encoding)?;
        if !params.ibe.is_valid_key(&key) {
            return Err(PepsiError::MalformedAuthorization);
        }
        Ok(QueryAuthorization { id, key })
    }
}

impl SubscriptionSecret {
    /// Broker upload under `handle`.
    pub fn upload(&self, handle: Vec<u8>) -> SubscriptionUpload {
        SubscriptionUpload { epoch: Some(self.epoch), handle, tag: self.tag }
    }

    fn key(&self) -> SymmetricKey {
        derive_key(&self.id, &self.h, &self.z1, &self.z2)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![ENCODING_VERSION];
        out.extend_from_slice(self.tag.as_bytes());
        put_bytes(&mut out, self.id.as_bytes());
        put_bytes(&mut out, &self.z1.to_bytes());
        put_bytes(&mut out, &self.z2.to_bytes());
        put_bytes(&mut out, &self.h.encode());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PepsiError> {
        let mut r = versioned(bytes)?;
        let enc = |_| PepsiError::Encoding;
        let tag = Tag::try_from(r.take(32).map_err(enc)?).map_err(enc)?;
        let id = read_identifier(&mut r)?;
        let z1 = GtElement::from_bytes(r.bytes().map_err(enc)?)?;
        let z2 = GtElement::from_bytes(r.bytes().map_err(enc)?)?;
        let h = G1Element::decode(r.bytes().map_err(enc)?)?;
        let epoch = r.u64().map_err(enc)?;
        r.finish().map_err(enc)?;
        Ok(SubscriptionSecret { tag, id, z1, z2, h, epoch })
    }
}

fn versioned(bytes: &[u8]) -> Result<Reader<'_>, PepsiError> {
    let mut r = Reader::new(bytes);
    match r.u8() {
        Ok(ENCODING_VERSION) => Ok(r),
        _ => Err(PepsiError::Encoding),
    }
}

fn read_identifier(r: &mut Reader<'_>) -> Result<Identifier, PepsiError> {
    let raw = r.bytes().map_err(|_| PepsiError::Encoding)?;
    let s = std::str::from_utf8(raw).map_err(|_| PepsiError::Encoding)?;
    Identifier::from_canonical(s).map_err(|_| PepsiError::Encoding)
}

fn derive_tag(width: TagWidth, id: &Identifier, h: &G1Element, z1: &GtElement, z2: &GtElement) -> Tag {
    hash_tag_with(width, &[id.as_bytes(), &h.to_compressed(), &z1.to_bytes(), &z2.to_bytes()])
}

fn derive_key(id: &Identifier, h: &G1Element, z1: &GtElement, z2: &GtElement) -> SymmetricKey {
    hash_key(&[id.as_bytes(), &h.to_compressed(), &z1.to_bytes(), &z2.to_bytes()])
}

/// RA setup: IBE key pair plus the first nonce `z`, epoch 0.
pub fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (PepsiParams, PepsiSecret) {
    let (ibe, msk) = ibe::setup(rng);
    let z = Scalar::random(rng);
    let params = PepsiParams {
        h: ibe.g().pow(&z),
        ibe,
        epoch: 0,
        tag_width: TagWidth::FULL,
        max_payload: DEFAULT_MAX_PAYLOAD,
    };
    (params, PepsiSecret { msk, z })
}

/// Node registration: the node receives `(ID, z)` for the current epoch.
pub fn register_node(secret: &PepsiSecret, params: &PepsiParams, id: &Identifier) -> NodeCredential {
    NodeCredential { id: id.clone(), z: secret.z, epoch: params.epoch }
}

/// Querier, first message: `μ = H1(ID*) · g^r`.
pub fn request_authorization<R: RngCore + CryptoRng>(
    params: &PepsiParams,
    id: &Identifier,
    rng: &mut R,
) -> Result<(PendingAuthorization, G1Element), PepsiError> {
    let (blinding, mu) = ibe::blind_extract_request(&params.ibe, id.as_bytes(), rng)?;
    Ok((PendingAuthorization { id: id.clone(), blinding }, mu))
}

/// RA: `(μ'1, μ'2) = (μ^x1, μ^x2)`.
pub fn respond_authorization(secret: &PepsiSecret, mu: &G1Element) -> Result<ExtractResponse, PepsiError> {
    Ok(ibe::blind_extract_respond(&secret.msk, mu)?)
}

impl PendingAuthorization {
    /// Removes the blinding factor and checks the key with the pairing test.
    pub fn finalize(self, params: &PepsiParams, response: &ExtractResponse) -> Result<QueryAuthorization, PepsiError> {
        let key = ibe::blind_extract_finalize(&params.ibe, self.blinding, response)?;
        Ok(QueryAuthorization { id: self.id, key })
    }
}

/// Both sides of query authorization in one call. The transcript holds
/// everything the RA saw or sent.
pub fn authorize_query<R: RngCore + CryptoRng>(
    params: &PepsiParams,
    secret: &PepsiSecret,
    id: &Identifier,
    rng: &mut R,
) -> Result<(QueryAuthorization, AuthorizationTranscript), PepsiError> {
    let (pending, request) = request_authorization(params, id, rng)?;
    let response = respond_authorization(secret, &request)?;
    let auth = pending.finalize(params, &response)?;
    Ok((auth, AuthorizationTranscript { request, response }))
}

/// Query subscription: `Z_i* = e(h, sk_i)`, `T* = H2(ID*, h, Z1*, Z2*)`.
pub fn subscribe(params: &PepsiParams, auth: &QueryAuthorization) -> Result<(SubscriptionSecret, Tag), PepsiError> {
    let z1 = pairing(&params.h, auth.key.sk1())?;
    let z2 = pairing(&params.h, auth.key.sk2())?;
    let tag = derive_tag(params.tag_width, &auth.id, &params.h, &z1, &z2);
    let sub = SubscriptionSecret { tag, id: auth.id.clone(), z1, z2, h: params.h, epoch: params.epoch };
    Ok((sub, tag))
}

/// Data report: `Z_i = e(H1(ID)^z, X_i)`, tag `T`, key `k`, `CT = Enc_k(D)`.
pub fn produce_report<R: RngCore + CryptoRng>(
    params: &PepsiParams,
    cred: &NodeCredential,
    measurement: &Measurement,
    rng: &mut R,
) -> Result<ReportEnvelope, PepsiError> {
    if cred.epoch != params.epoch {
        return Err(PepsiError::StaleCredential { credential: cred.epoch, current: params.epoch });
    }
    let len = measurement.payload().len();
    if len > params.max_payload {
        return Err(PepsiError::PayloadTooLarge { len, max: params.max_payload });
    }
    let blinded = hash_to_g1(cred.id.as_bytes())?.pow(&cred.z);
    let z1 = pairing(&blinded, params.ibe.x1())?;
    let z2 = pairing(&blinded, params.ibe.x2())?;
    let tag = derive_tag(params.tag_width, &cred.id, &params.h, &z1, &z2);
    let key = derive_key(&cred.id, &params.h, &z1, &z2);
    let ciphertext = sym::seal(&key, measurement.payload(), rng);
    Ok(ReportEnvelope { epoch: Some(params.epoch), tag, ciphertext, sender: None })
}

/// Notification: recompute `k*` and decrypt.
pub fn open_notification(sub: &SubscriptionSecret, envelope: &ReportEnvelope) -> Result<Measurement, PepsiError> {
    if envelope.tag != sub.tag {
        return Err(PepsiError::NotMySubscription);
    }
    sym::open(&sub.key(), &envelope.ciphertext)
        .map(Measurement)
        .map_err(|_| PepsiError::CorruptOrCollidingReport)
}

/// Registered nodes with their identifiers, plus the eviction list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeRegistry {
    nodes: BTreeMap<String, BTreeSet<Identifier>>,
    evicted: BTreeSet<String>,
}

impl NodeRegistry {
    pub fn add(&mut self, node: &str, id: &Identifier) -> Result<(), PepsiError> {
        if self.evicted.contains(node) {
            return Err(PepsiError::NodeEvicted(node.to_owned()));
        }
        self.nodes.entry(node.to_owned()).or_default().insert(id.clone());
        Ok(())
    }

    pub fn evict(&mut self, node: &str) {
        self.evicted.insert(node.to_owned());
    }

    pub fn is_evicted(&self, node: &str) -> bool {
        self.evicted.contains(node)
    }

    /// Non-evicted nodes with their identifiers, in name order.
    pub fn active(&self) -> impl Iterator<Item = (&str, &BTreeSet<Identifier>)> {
        self.nodes
            .iter()
            .filter(|(n, _)| !self.evicted.contains(*n))
            .map(|(n, ids)| (n.as_str(), ids))
    }

    pub fn evicted(&self) -> impl Iterator<Item = &str> {
        self.evicted.iter().map(String::as_str)
    }

    pub fn all(&self) -> impl Iterator<Item = (&str, &BTreeSet<Identifier>)> {
        self.nodes.iter().map(|(n, ids)| (n.as_str(), ids))
    }
}

/// Nonce renewal: fresh `z' != z`, `h' = g^z'`, epoch + 1, and new credentials
/// for every non-evicted node. Querier keys are untouched.
pub fn renew_nonce<R: RngCore + CryptoRng>(
    secret: &PepsiSecret,
    params: &PepsiParams,
    registry: &NodeRegistry,
    rng: &mut R,
) -> (PepsiSecret, PepsiParams, Vec<Redistribution>) {
    let z = loop {
        let z = Scalar::random(rng);
        if z != secret.z {
            break z;
        }
    };
    let next_secret = PepsiSecret { msk: secret.msk.clone(), z };
    let next_params = PepsiParams { h: params.ibe.g().pow(&z), epoch: params.epoch + 1, ..params.clone() };
    let redistribution = registry
        .active()
        .map(|(node, ids)| Redistribution {
            node: node.to_owned(),
            credentials: ids.iter().map(|id| register_node(&next_secret, &next_params, id)).collect(),
        })
        .collect();
    (next_secret, next_params, redistribution)
}

/// The RA's mutable state. Renewal takes `&mut self`, so it cannot interleave
/// with a registration.
#[derive(Clone, Debug)]
pub struct RegistrationAuthority {
    params: PepsiParams,
    secret: PepsiSecret,
    registry: NodeRegistry,
}

impl RegistrationAuthority {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let (params, secret) = setup(rng);
        Self::from_parts(params, secret, NodeRegistry::default())
    }

    pub fn from_parts(params: PepsiParams, secret: PepsiSecret, registry: NodeRegistry) -> Self {
        RegistrationAuthority { params, secret, registry }
    }

    pub fn params(&self) -> &PepsiParams {
        &self.params
    }

    pub fn secret(&self) -> &PepsiSecret {
        &self.secret
    }

    pub fn registry(&self) -> &NodeRegistry {
        &self.registry
    }

    pub fn register_node(&mut self, node: &str, id: &Identifier) -> Result<NodeCredential, PepsiError> {
        self.registry.add(node, id)?;
        Ok(register_node(&self.secret, &self.params, id))
    }

    pub fn evict(&mut self, node: &str) {
        self.registry.evict(node);
    }

    pub fn respond_authorization(&self, mu: &G1Element) -> Result<ExtractResponse, PepsiError> {
        respond_authorization(&self.secret, mu)
    }

    pub fn renew_nonce<R: RngCore + CryptoRng>(&mut self, rng: &mut R) -> Vec<Redistribution> {
        let (secret, params, list) = renew_nonce(&self.secret, &self.params, &self.registry, rng);
        self.secret = secret;
        self.params = params;
        list
    }
}
