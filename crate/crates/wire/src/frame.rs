//! Transport frames: a report envelope as it leaves a mobile node, still
//! carrying the metadata the network operator sees and must remove.

use crate::{put_bytes, Reader, ReportEnvelope, WireError};

const FRAME_MAGIC: u8 = 0xF0;

const FIELD_SENDER: u8 = 1;
const FIELD_CELL: u8 = 2;
const FIELD_LOCATION: u8 = 3;
const FIELD_SENT_AT: u8 = 4;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransportMetadata {
    pub cell_id: Option<String>,
    pub location: Option<String>,
    pub sent_at: Option<u64>,
}

/// Envelope plus transport metadata. The sender identifier travels in
/// `envelope.sender`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportFrame {
    pub envelope: ReportEnvelope,
    pub metadata: TransportMetadata,
}

impl TransportFrame {
    pub fn new(envelope: ReportEnvelope) -> Self {
        TransportFrame { envelope, metadata: TransportMetadata::default() }
    }

    /// `0xF0 | len-prefixed envelope | n_fields (1) | (id (1) | len (2) | value)*`
    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        let mut out = vec![FRAME_MAGIC];
        put_bytes(&mut out, &self.envelope.to_wire());

        let sent_at = self.metadata.sent_at.map(|t| t.to_be_bytes());
        let fields: Vec<(u8, &[u8])> = [
            (FIELD_SENDER, self.envelope.sender.as_deref().map(str::as_bytes)),
            (FIELD_CELL, self.metadata.cell_id.as_deref().map(str::as_bytes)),
            (FIELD_LOCATION, self.metadata.location.as_deref().map(str::as_bytes)),
            (FIELD_SENT_AT, sent_at.as_ref().map(|b| &b[..])),
        ]
        .into_iter()
        .filter_map(|(id, v)| v.map(|v| (id, v)))
        .collect();

        out.push(fields.len() as u8);
        for (id, value) in fields {
            let len = u16::try_from(value.len()).map_err(|_| WireError::FieldTooLong(value.len()))?;
            out.push(id);
            out.extend_from_slice(&len.to_be_bytes());
            out.extend_from_slice(value);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != FRAME_MAGIC {
            return Err(WireError::BadFrame("missing frame marker"));
        }
        let mut envelope = ReportEnvelope::from_wire(r.bytes()?)?;
        let mut metadata = TransportMetadata::default();
        let count = r.u8()?;
        for _ in 0..count {
            let id = r.u8()?;
            let len = r.u16()? as usize;
            let value = r.take(len)?;
            let text = || {
                String::from_utf8(value.to_vec()).map_err(|_| WireError::BadFrame("non-utf8 metadata"))
            };
            match id {
                FIELD_SENDER => envelope.sender = Some(text()?),
                FIELD_CELL => metadata.cell_id = Some(text()?),
                FIELD_LOCATION => metadata.location = Some(text()?),
                FIELD_SENT_AT => {
                    let raw: [u8; 8] =
                        value.try_into().map_err(|_| WireError::BadFrame("timestamp width"))?;
                    metadata.sent_at = Some(u64::from_be_bytes(raw));
                }
                _ => return Err(WireError::BadFrame("unknown metadata field")),
            }
        }
        r.finish()?;
        Ok(TransportFrame { envelope, metadata })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Tag, TAG_LEN};

    #[test]
    fn frame_round_trip_keeps_metadata() {
        let frame = TransportFrame {
            envelope: ReportEnvelope {
                epoch: Some(3),
                tag: Tag::new([1; TAG_LEN]),
                ciphertext: vec![9; 20],
                sender: Some("node-7".into()),
            },
            metadata: TransportMetadata {
                cell_id: Some("cell-310-410".into()),
                location: Some("40.71,-74.00".into()),
                sent_at: Some(1_700_000_000),
            },
        };
        let bytes = frame.to_bytes().unwrap();
        assert_eq!(TransportFrame::from_bytes(&bytes).unwrap(), frame);
    }

    #[test]
    fn bare_frame_round_trip() {
        let frame = TransportFrame::new(ReportEnvelope {
            epoch: None,
            tag: Tag::new([2; TAG_LEN]),
            ciphertext: vec![1],
            sender: None,
        });
        assert_eq!(TransportFrame::from_bytes(&frame.to_bytes().unwrap()).unwrap(), frame);
    }
}
