//! The network operator's pass-through: drops everything a frame carries
//! besides the envelope and forwards the envelope at once.

use pepsi_wire::{ReportEnvelope, TransportFrame, WireError};

use crate::{BrokerError, ReportAck, SharedBroker};

/// Keeps only `(version, epoch, tag, ciphertext)`.
pub fn relay_strip(frame: TransportFrame) -> ReportEnvelope {
    frame.envelope.without_sender()
}

/// Byte-level form of [`relay_strip`]: transport frame in, envelope wire out.
pub fn relay_strip_bytes(frame: &[u8]) -> Result<Vec<u8>, WireError> {
    Ok(relay_strip(TransportFrame::from_bytes(frame)?).to_wire())
}

/// A relay wired to a broker. Each frame is stripped and handed over as
/// soon as it arrives; nothing is buffered.
#[derive(Clone, Debug)]
pub struct Relay {
    broker: SharedBroker,
}

impl Relay {
    pub fn new(broker: SharedBroker) -> Self {
        Relay { broker }
    }

    pub fn forward(&self, frame: TransportFrame) -> Result<ReportAck, BrokerError> {
        self.broker.accept_report(relay_strip(frame))
    }

    pub fn forward_bytes(&self, frame: &[u8]) -> Result<ReportAck, BrokerError> {
        let envelope = relay_strip(TransportFrame::from_bytes(frame)?);
        self.broker.accept_report(envelope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pepsi_wire::{Tag, TransportMetadata};

    fn frame() -> TransportFrame {
        TransportFrame {
            envelope: ReportEnvelope {
                epoch: Some(3),
                tag: Tag::new([0x11; 32]),
                ciphertext: vec![0xAB; 40],
                sender: Some("node-7".into()),
            },
            metadata: TransportMetadata {
                cell_id: Some("cell-310-260-42".into()),
                location: Some("40.7128,-74.0060".into()),
                sent_at: Some(1_700_000_000),
            },
        }
    }

    #[test]
    fn sender_removed() {
        let out = relay_strip(frame());
        assert_eq!(out.sender, None);
        assert_eq!(out.ciphertext, frame().envelope.ciphertext);
    }

    #[test]
    fn output_is_exact_envelope_wire() {
        let bytes = relay_strip_bytes(&frame().to_bytes().unwrap()).unwrap();
        let mut expected = vec![0x01];
        expected.extend_from_slice(&3u64.to_be_bytes());
        expected.extend_from_slice(&[0x11; 32]);
        expected.extend_from_slice(&40u32.to_be_bytes());
        expected.extend_from_slice(&[0xAB; 40]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn stripping_is_idempotent() {
        let once = relay_strip(frame());
        let twice = relay_strip(TransportFrame::new(once.clone()));
        assert_eq!(once, twice);
    }

    #[test]
    fn forwarding_is_immediate() {
        let broker = SharedBroker::default();
        broker
            .accept_subscription(pepsi_wire::SubscriptionUpload {
                epoch: None,
                handle: b"q".to_vec(),
                tag: Tag::new([0x22; 32]),
            })
            .unwrap();
        let relay = Relay::new(broker.clone());
        let mut f = frame();
        f.envelope.epoch = None;
        f.envelope.tag = Tag::new([0x22; 32]);
        relay.forward_bytes(&f.to_bytes().unwrap()).unwrap();
        let got = broker.drain_deliveries(b"q");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].sender, None);
    }
}
