//! Authenticated symmetric encryption of report payloads (AES-256-GCM).
//!
//! Sealed layout: `nonce (12) | ciphertext | gcm tag (16)`.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};

use crate::group::SymmetricKey;

pub const NONCE_LEN: usize = 12;
pub const AUTH_TAG_LEN: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("authenticated decryption failed")]
pub struct AuthenticationError;

pub fn seal<R: RngCore + CryptoRng>(key: &SymmetricKey, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new(key.as_bytes().into());
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("payload within AES-GCM limits");
    let mut out = Vec::with_capacity(NONCE_LEN + ct.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

pub fn open(key: &SymmetricKey, sealed: &[u8]) -> Result<Vec<u8>, AuthenticationError> {
    if sealed.len() < NONCE_LEN + AUTH_TAG_LEN {
        return Err(AuthenticationError);
    }
    let (nonce, ct) = sealed.split_at(NONCE_LEN);
    Aes256Gcm::new(key.as_bytes().into())
        .decrypt(Nonce::from_slice(nonce), ct)
        .map_err(|_| AuthenticationError)
}
