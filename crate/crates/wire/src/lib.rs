//! Wire formats shared by every party.
//!
//! Nothing here knows about pairings or identifiers. The broker depends
//! on this crate alone and sees only tag bytes, epochs and opaque handles.
//!
//! Report envelope layout (all integers big-endian):
//!
//! ```text
//! IBE  : 0x01 | epoch (8) | tag (32) | ct_len (4) | ciphertext
//! OPRF : 0x02 |             tag (32) | ct_len (4) | ciphertext
//! ```
//!
//! Subscription upload layout:
//!
//! ```text
//! IBE  : 0x01 | epoch (8) | handle_len (4) | handle | tag (32)
//! OPRF : 0x02 |             handle_len (4) | handle | tag (32)
//! ```

use std::fmt;

mod frame;

pub use frame::{TransportFrame, TransportMetadata};

/// Tag width in bytes (256 bits).
pub const TAG_LEN: usize = 32;

/// Version byte of the pairing-based instantiation. Carries an epoch.
pub const VERSION_IBE: u8 = 0x01;
/// Version byte of the blind-RSA instantiation. No epoch field.
pub const VERSION_OPRF: u8 = 0x02;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated input: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("unknown version byte {0:#04x}")]
    UnknownVersion(u8),
    #[error("tag must be {TAG_LEN} bytes, got {0}")]
    BadTagLength(usize),
    #[error("ciphertext is empty")]
    EmptyCiphertext,
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("field too long: {0} bytes")]
    FieldTooLong(usize),
    #[error("malformed transport frame: {0}")]
    BadFrame(&'static str),
}

/// Opaque fixed-width matching tag.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag([u8; TAG_LEN]);

impl Tag {
    pub const fn new(bytes: [u8; TAG_LEN]) -> Self {
        Tag(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; TAG_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl TryFrom<&[u8]> for Tag {
    type Error = WireError;

    fn try_from(bytes: &[u8]) -> Result<Self, WireError> {
        let arr: [u8; TAG_LEN] = bytes
            .try_into()
            .map_err(|_| WireError::BadTagLength(bytes.len()))?;
        Ok(Tag(arr))
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({}..)", &self.to_hex()[..16])
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// An encrypted, tagged report.
///
/// `epoch` is `Some` for the pairing instantiation and `None` for the
/// blind-RSA one; the version byte on the wire follows from it. `sender` is
/// transport metadata: it is never part of [`ReportEnvelope::to_wire`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportEnvelope {
    pub epoch: Option<u64>,
    pub tag: Tag,
    pub ciphertext: Vec<u8>,
    pub sender: Option<String>,
}

impl ReportEnvelope {
    pub fn version(&self) -> u8 {
        version_for(self.epoch)
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 8 + TAG_LEN + 4 + self.ciphertext.len());
        out.push(self.version());
        if let Some(epoch) = self.epoch {
            out.extend_from_slice(&epoch.to_be_bytes());
        }
        out.extend_from_slice(&self.tag.0);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let envelope = Self::read(&mut r)?;
        r.finish()?;
        Ok(envelope)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let epoch = read_version_and_epoch(r)?;
        let tag = Tag::try_from(r.take(TAG_LEN)?)?;
        let len = r.u32()? as usize;
        if len == 0 {
            return Err(WireError::EmptyCiphertext);
        }
        let ciphertext = r.take(len)?.to_vec();
        Ok(ReportEnvelope { epoch, tag, ciphertext, sender: None })
    }

    /// Copy of this envelope with transport metadata removed.
    pub fn without_sender(&self) -> Self {
        ReportEnvelope { sender: None, ..self.clone() }
    }
}

/// What a querier uploads to the broker when subscribing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubscriptionUpload {
    pub epoch: Option<u64>,
    pub handle: Vec<u8>,
    pub tag: Tag,
}

impl SubscriptionUpload {
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 8 + 4 + self.handle.len() + TAG_LEN);
        out.push(version_for(self.epoch));
        if let Some(epoch) = self.epoch {
            out.extend_from_slice(&epoch.to_be_bytes());
        }
        out.extend_from_slice(&(self.handle.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.handle);
        out.extend_from_slice(&self.tag.0);
        out
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let epoch = read_version_and_epoch(&mut r)?;
        let len = r.u32()? as usize;
        let handle = r.take(len)?.to_vec();
        let tag = Tag::try_from(r.take(TAG_LEN)?)?;
        r.finish()?;
        Ok(SubscriptionUpload { epoch, handle, tag })
    }
}

fn version_for(epoch: Option<u64>) -> u8 {
    match epoch {
        Some(_) => VERSION_IBE,
        None => VERSION_OPRF,
    }
}

fn read_version_and_epoch(r: &mut Reader<'_>) -> Result<Option<u64>, WireError> {
    match r.u8()? {
        VERSION_IBE => Ok(Some(r.u64()?)),
        VERSION_OPRF => Ok(None),
        other => Err(WireError::UnknownVersion(other)),
    }
}

/// Minimal big-endian cursor over a byte slice.
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated { needed: n - self.buf.len() });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// 4-byte length followed by that many bytes.
    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Result<(), WireError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(WireError::TrailingBytes(n)),
        }
    }
}

/// Appends a 4-byte length prefix and `bytes`.
pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn envelope(epoch: Option<u64>) -> ReportEnvelope {
        ReportEnvelope {
            epoch,
            tag: Tag::new([7u8; TAG_LEN]),
            ciphertext: vec![1, 2, 3],
            sender: Some("node-7".into()),
        }
    }

    #[test]
    fn ibe_layout_is_exact() {
        let wire = envelope(Some(5)).to_wire();
        let mut expected = vec![VERSION_IBE, 0, 0, 0, 0, 0, 0, 0, 5];
        expected.extend_from_slice(&[7u8; TAG_LEN]);
        expected.extend_from_slice(&[0, 0, 0, 3, 1, 2, 3]);
        assert_eq!(wire, expected);
    }

    #[test]
    fn oprf_layout_omits_epoch() {
        let wire = envelope(None).to_wire();
        assert_eq!(wire[0], VERSION_OPRF);
        assert_eq!(wire.len(), 1 + TAG_LEN + 4 + 3);
    }

    #[test]
    fn sender_never_serialized() {
        let env = envelope(Some(1));
        let wire = env.to_wire();
        assert!(!wire.windows(6).any(|w| w == b"node-7"));
        assert_eq!(ReportEnvelope::from_wire(&wire).unwrap(), env.without_sender());
    }

    #[test]
    fn short_tag_rejected() {
        let mut wire = vec![VERSION_OPRF];
        wire.extend_from_slice(&[0u8; 31]);
        assert!(matches!(ReportEnvelope::from_wire(&wire), Err(WireError::Truncated { .. })));
        assert_eq!(Tag::try_from(&[0u8; 31][..]), Err(WireError::BadTagLength(31)));
    }

    #[test]
    fn empty_ciphertext_rejected() {
        let mut env = envelope(None);
        env.ciphertext.clear();
        assert_eq!(ReportEnvelope::from_wire(&env.to_wire()), Err(WireError::EmptyCiphertext));
    }

    #[test]
    fn unknown_version_and_trailing_bytes() {
        let mut wire = envelope(Some(0)).to_wire();
        wire.push(0);
        assert_eq!(ReportEnvelope::from_wire(&wire), Err(WireError::TrailingBytes(1)));
        wire[0] = 9;
        assert_eq!(ReportEnvelope::from_wire(&wire), Err(WireError::UnknownVersion(9)));
    }

    proptest! {
        #[test]
        fn envelope_round_trip(epoch in proptest::option::of(any::<u64>()),
                               tag in any::<[u8; 32]>(),
                               ct in proptest::collection::vec(any::<u8>(), 1..200)) {
            let env = ReportEnvelope { epoch, tag: Tag::new(tag), ciphertext: ct, sender: None };
            prop_assert_eq!(ReportEnvelope::from_wire(&env.to_wire()).unwrap(), env);
        }

        #[test]
        fn subscription_round_trip(epoch in proptest::option::of(any::<u64>()),
                                   tag in any::<[u8; 32]>(),
                                   handle in proptest::collection::vec(any::<u8>(), 0..40)) {
            let up = SubscriptionUpload { epoch, handle, tag: Tag::new(tag) };
            prop_assert_eq!(SubscriptionUpload::from_wire(&up.to_wire()).unwrap(), up);
        }
    }
}
