//! Broker persistence: a header followed by length-prefixed records.
//!
//! ```text
//! "PEPSIBRK" | 0x01 | epoch (8) | clock (8) | next_sequence (8) | record*
//! record = kind (1) | len (4) | body
//!   1 subscription  created_at (8) | sequence (8) | subscription upload wire
//!   2 report        id (8) | received_at (8) | envelope wire
//!   3 marked        id (8) | handle
//!   4 pending       id (8) | len (4) | handle | envelope wire
//! ```

use pepsi_wire::{put_bytes, Reader, ReportEnvelope, SubscriptionUpload};

use crate::{Broker, BrokerConfig, BrokerError, ReportId, StoredReport, SubscriptionEntry};

const MAGIC: &[u8; 8] = b"PEPSIBRK";
const FORMAT: u8 = 1;

const SUBSCRIPTION: u8 = 1;
const REPORT: u8 = 2;
const MARKED: u8 = 3;
const PENDING: u8 = 4;

impl Broker {
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.push(FORMAT);
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.extend_from_slice(&self.clock.to_be_bytes());
        out.extend_from_slice(&self.next_sequence.to_be_bytes());

        let mut record = |kind: u8, body: Vec<u8>| {
            out.push(kind);
            put_bytes(&mut out, &body);
        };
        for entry in self.subscriptions.values() {
            let upload = SubscriptionUpload { epoch: entry.epoch, handle: entry.handle.clone(), tag: entry.tag };
            let mut body = entry.created_at.to_be_bytes().to_vec();
            body.extend_from_slice(&entry.sequence.to_be_bytes());
            body.extend_from_slice(&upload.to_wire());
            record(SUBSCRIPTION, body);
        }
        for report in self.reports.values() {
            let mut body = report.id.0.to_be_bytes().to_vec();
            body.extend_from_slice(&report.received_at.to_be_bytes());
            body.extend_from_slice(&report.envelope.to_wire());
            record(REPORT, body);
        }
        let mut marked: Vec<_> = self.marked.iter().collect();
        marked.sort();
        for (id, handles) in marked {
            for handle in handles {
                let mut body = id.0.to_be_bytes().to_vec();
                body.extend_from_slice(handle);
                record(MARKED, body);
            }
        }
        for (handle, queue) in &self.pending {
            for (id, envelope) in queue {
                let mut body = id.0.to_be_bytes().to_vec();
                put_bytes(&mut body, handle);
                body.extend_from_slice(&envelope.to_wire());
                record(PENDING, body);
            }
        }
        out
    }

    pub fn restore(bytes: &[u8], config: BrokerConfig) -> Result<Broker, BrokerError> {
        let mut r = Reader::new(bytes);
        if r.take(MAGIC.len())? != MAGIC {
            return Err(BrokerError::Snapshot("bad magic"));
        }
        if r.u8()? != FORMAT {
            return Err(BrokerError::Snapshot("unsupported format"));
        }
        let mut broker = Broker::new(config);
        broker.epoch = r.u64()?;
        broker.clock = r.u64()?;
        broker.next_sequence = r.u64()?;

        while !r.is_empty() {
            let kind = r.u8()?;
            let mut body = Reader::new(r.bytes()?);
            match kind {
                SUBSCRIPTION => {
                    let created_at = body.u64()?;
                    let sequence = body.u64()?;
                    let upload = SubscriptionUpload::from_wire(body.take(body.remaining())?)?;
                    broker.restore_subscription(SubscriptionEntry {
                        handle: upload.handle,
                        tag: upload.tag,
                        epoch: upload.epoch,
                        created_at,
                        sequence,
                    })?;
                }
                REPORT => {
                    let id = ReportId(body.u64()?);
                    let received_at = body.u64()?;
                    let envelope = ReportEnvelope::from_wire(body.take(body.remaining())?)?;
                    broker.restore_report(StoredReport { id, envelope, received_at })?;
                }
                MARKED => {
                    let id = ReportId(body.u64()?);
                    let handle = body.take(body.remaining())?.to_vec();
                    broker.marked.entry(id).or_default().insert(handle);
                }
                PENDING => {
                    let id = ReportId(body.u64()?);
                    let handle = body.bytes()?.to_vec();
                    let envelope = ReportEnvelope::from_wire(body.take(body.remaining())?)?;
                    broker.pending.entry(handle).or_default().insert(id, envelope);
                }
                _ => return Err(BrokerError::Snapshot("unknown record kind")),
            }
        }
        Ok(broker)
    }

    fn restore_subscription(&mut self, entry: SubscriptionEntry) -> Result<(), BrokerError> {
        if entry.sequence >= self.next_sequence {
            return Err(BrokerError::Snapshot("sequence beyond counter"));
        }
        let key = (entry.handle.clone(), entry.tag);
        self.subscribers.entry((entry.epoch, entry.tag)).or_default().insert(entry.handle.clone());
        if self.subscriptions.insert(key, entry).is_some() {
            return Err(BrokerError::Snapshot("duplicate subscription"));
        }
        Ok(())
    }

    fn restore_report(&mut self, report: StoredReport) -> Result<(), BrokerError> {
        if report.id.0 >= self.next_sequence {
            return Err(BrokerError::Snapshot("sequence beyond counter"));
        }
        let key = (report.envelope.epoch, report.envelope.tag);
        self.reports_by_tag.entry(key).or_default().insert(report.id);
        if self.reports.insert(report.id, report).is_some() {
            return Err(BrokerError::Snapshot("duplicate report"));
        }
        Ok(())
    }
}
