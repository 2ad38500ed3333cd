//! The service provider: stores subscriptions `(Q, T*)` and reports
//! `(T, CT)`, marks every tag-equal pair for delivery, and hands marked
//! reports to queriers when they drain.
//!
//! The broker sees tags, epochs, handles and opaque ciphertexts, nothing
//! else. It has no dependency on any cryptographic type.
//!
//! Matching goes through a hash index keyed by `(epoch, tag)`. The result is
//! the same set as the double loop over `R × S`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use pepsi_wire::{ReportEnvelope, SubscriptionUpload, Tag, WireError};

mod relay;
mod snapshot;

pub use relay::{relay_strip, relay_strip_bytes, Relay};

/// Arrival sequence number of a stored report. Never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReportId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubscriptionEntry {
    pub handle: Vec<u8>,
    pub tag: Tag,
    pub epoch: Option<u64>,
    /// Broker clock at acceptance.
    pub created_at: u64,
    /// Position in the broker's total order of accepted messages.
    pub sequence: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredReport {
    pub id: ReportId,
    pub envelope: ReportEnvelope,
    pub received_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeliveryMark {
    pub handle: Vec<u8>,
    pub report: ReportId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BrokerConfig {
    /// Oldest reports are dropped once more than this many are stored.
    pub max_reports: usize,
    /// Reports older than this many clock ticks are dropped.
    pub retention_ticks: u64,
    /// Match new subscriptions against reports already stored.
    pub retroactive: bool,
    /// Match on every accepted message rather than only in [`Broker::match_all`].
    pub eager: bool,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig { max_reports: 10_000, retention_ticks: 3_600, retroactive: true, eager: true }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BrokerError {
    #[error("malformed message: {0}")]
    Malformed(#[from] WireError),
    #[error("empty querier handle")]
    EmptyHandle,
    #[error("epoch {got} is not the current epoch {current}")]
    StaleEpoch { got: u64, current: u64 },
    #[error("cannot move from epoch {current} to {requested}")]
    NonMonotonicEpoch { current: u64, requested: u64 },
    #[error("corrupt snapshot: {0}")]
    Snapshot(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubscriptionAck {
    Stored { retroactive_marks: usize },
    /// The `(handle, tag)` pair was already stored; nothing changed.
    Duplicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportAck {
    pub id: ReportId,
    pub marks: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PurgeReport {
    pub subscriptions: usize,
    pub reports: usize,
}

type MatchKey = (Option<u64>, Tag);

#[derive(Debug)]
pub struct Broker {
    config: BrokerConfig,
    epoch: u64,
    clock: u64,
    next_sequence: u64,
    subscriptions: BTreeMap<(Vec<u8>, Tag), SubscriptionEntry>,
    subscribers: HashMap<MatchKey, BTreeSet<Vec<u8>>>,
    reports: BTreeMap<ReportId, StoredReport>,
    reports_by_tag: HashMap<MatchKey, BTreeSet<ReportId>>,
    marked: HashMap<ReportId, BTreeSet<Vec<u8>>>,
    pending: BTreeMap<Vec<u8>, BTreeMap<ReportId, ReportEnvelope>>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new(BrokerConfig::default())
    }
}

impl Broker {
    pub fn new(config: BrokerConfig) -> Self {
        Broker {
            config,
            epoch: 0,
            clock: 0,
            next_sequence: 0,
            subscriptions: BTreeMap::new(),
            subscribers: HashMap::new(),
            reports: BTreeMap::new(),
            reports_by_tag: HashMap::new(),
            marked: HashMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock forward and drops reports past retention.
    pub fn advance_clock(&mut self, ticks: u64) {
        self.clock = self.clock.saturating_add(ticks);
        self.expire();
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &SubscriptionEntry> {
        self.subscriptions.values()
    }

    pub fn reports(&self) -> impl Iterator<Item = &StoredReport> {
        self.reports.values()
    }

    fn check_epoch(&self, epoch: Option<u64>) -> Result<(), BrokerError> {
        match epoch {
            Some(got) if got != self.epoch => Err(BrokerError::StaleEpoch { got, current: self.epoch }),
            _ => Ok(()),
        }
    }

    fn sequence(&mut self) -> u64 {
        let s = self.next_sequence;
        self.next_sequence += 1;
        s
    }

    pub fn accept_subscription(&mut self, upload: SubscriptionUpload) -> Result<SubscriptionAck, BrokerError> {
        if upload.handle.is_empty() {
            return Err(BrokerError::EmptyHandle);
        }
        self.check_epoch(upload.epoch)?;
        let key = (upload.handle.clone(), upload.tag);
        if self.subscriptions.contains_key(&key) {
            return Ok(SubscriptionAck::Duplicate);
        }
        let entry = SubscriptionEntry {
            handle: upload.handle,
            tag: upload.tag,
            epoch: upload.epoch,
            created_at: self.clock,
            sequence: self.sequence(),
        };
        let retroactive_marks = self.insert_subscription(entry);
        Ok(SubscriptionAck::Stored { retroactive_marks })
    }

    fn insert_subscription(&mut self, entry: SubscriptionEntry) -> usize {
        let match_key = (entry.epoch, entry.tag);
        let handle = entry.handle.clone();
        self.subscribers.entry(match_key).or_default().insert(handle.clone());
        self.subscriptions.insert((handle.clone(), entry.tag), entry);
        if !(self.config.eager && self.config.retroactive) {
            return 0;
        }
        let ids: Vec<ReportId> = self.reports_by_tag.get(&match_key).into_iter().flatten().copied().collect();
        ids.into_iter().filter(|id| self.mark(&handle, *id)).count()
    }

    /// Parses and accepts a report in its wire form.
    pub fn accept_report_wire(&mut self, bytes: &[u8]) -> Result<ReportAck, BrokerError> {
        self.accept_report(ReportEnvelope::from_wire(bytes)?)
    }

    pub fn accept_report(&mut self, envelope: ReportEnvelope) -> Result<ReportAck, BrokerError> {
        if envelope.ciphertext.is_empty() {
            return Err(WireError::EmptyCiphertext.into());
        }
        self.check_epoch(envelope.epoch)?;
        let id = ReportId(self.sequence());
        let match_key = (envelope.epoch, envelope.tag);
        let report = StoredReport { id, envelope: envelope.without_sender(), received_at: self.clock };
        self.reports.insert(id, report);
        self.reports_by_tag.entry(match_key).or_default().insert(id);

        let mut marks = 0;
        if self.config.eager {
            let handles: Vec<Vec<u8>> = self.subscribers.get(&match_key).into_iter().flatten().cloned().collect();
            marks = handles.iter().filter(|h| self.mark(h, id)).count();
        }
        self.expire();
        Ok(ReportAck { id, marks })
    }

    /// Records `(handle, id)` for delivery unless it was marked before.
    fn mark(&mut self, handle: &[u8], id: ReportId) -> bool {
        if !self.marked.entry(id).or_default().insert(handle.to_vec()) {
            return false;
        }
        let envelope = self.reports[&id].envelope.clone();
        self.pending.entry(handle.to_vec()).or_default().insert(id, envelope);
        true
    }

    fn may_match(&self, sub: &SubscriptionEntry, report: ReportId) -> bool {
        self.config.retroactive || sub.sequence < report.0
    }

    /// Runs matching over everything stored and returns every pair marked
    /// for delivery and not yet drained.
    pub fn match_all(&mut self) -> BTreeSet<DeliveryMark> {
        let mut todo = Vec::new();
        for (key, ids) in &self.reports_by_tag {
            let Some(handles) = self.subscribers.get(key) else { continue };
            for handle in handles {
                let sub = &self.subscriptions[&(handle.clone(), key.1)];
                for &id in ids {
                    if self.may_match(sub, id) {
                        todo.push((handle.clone(), id));
                    }
                }
            }
        }
        for (handle, id) in todo {
            self.mark(&handle, id);
        }
        self.pending_marks()
    }

    pub fn pending_marks(&self) -> BTreeSet<DeliveryMark> {
        self.pending
            .iter()
            .flat_map(|(handle, queue)| queue.keys().map(|&report| DeliveryMark { handle: handle.clone(), report }))
            .collect()
    }

    /// Returns and clears the handle's pending reports, oldest first.
    pub fn drain_deliveries(&mut self, handle: &[u8]) -> Vec<ReportEnvelope> {
        self.pending.remove(handle).map(|q| q.into_values().collect()).unwrap_or_default()
    }

    /// Moves to `new_epoch` (which must be the next one) and drops
    /// subscriptions and reports from earlier epochs. Already-marked
    /// deliveries stay queued.
    pub fn epoch_advance(&mut self, new_epoch: u64) -> Result<PurgeReport, BrokerError> {
        if self.epoch.checked_add(1) != Some(new_epoch) {
            return Err(BrokerError::NonMonotonicEpoch { current: self.epoch, requested: new_epoch });
        }
        self.epoch = new_epoch;
        let stale = |e: Option<u64>| matches!(e, Some(e) if e < new_epoch);

        let subs: Vec<(Vec<u8>, Tag)> =
            self.subscriptions.iter().filter(|(_, s)| stale(s.epoch)).map(|(k, _)| k.clone()).collect();
        for key in &subs {
            let entry = self.subscriptions.remove(key).expect("listed above");
            self.unindex_subscription(&entry);
        }
        let reports: Vec<ReportId> =
            self.reports.values().filter(|r| stale(r.envelope.epoch)).map(|r| r.id).collect();
        for id in &reports {
            self.remove_report(*id);
        }
        Ok(PurgeReport { subscriptions: subs.len(), reports: reports.len() })
    }

    fn unindex_subscription(&mut self, entry: &SubscriptionEntry) {
        let key = (entry.epoch, entry.tag);
        if let Some(set) = self.subscribers.get_mut(&key) {
            set.remove(&entry.handle);
            if set.is_empty() {
                self.subscribers.remove(&key);
            }
        }
    }

    fn remove_report(&mut self, id: ReportId) {
        let Some(report) = self.reports.remove(&id) else { return };
        let key = (report.envelope.epoch, report.envelope.tag);
        if let Some(set) = self.reports_by_tag.get_mut(&key) {
            set.remove(&id);
            if set.is_empty() {
                self.reports_by_tag.remove(&key);
            }
        }
        self.marked.remove(&id);
    }

    fn expire(&mut self) {
        while let Some((&id, oldest)) = self.reports.first_key_value() {
            let too_many = self.reports.len() > self.config.max_reports;
            let too_old = self.clock.saturating_sub(oldest.received_at) >= self.config.retention_ticks;
            if !(too_many || too_old) {
                break;
            }
            self.remove_report(id);
        }
    }
}

/// A broker behind a mutex. Every call is one critical section, so callers
/// on different threads observe a single total order of operations.
#[derive(Clone, Debug, Default)]
pub struct SharedBroker(Arc<Mutex<Broker>>);

impl SharedBroker {
    pub fn new(broker: Broker) -> Self {
        SharedBroker(Arc::new(Mutex::new(broker)))
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut Broker) -> T) -> T {
        let mut guard = self.0.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
        f(&mut guard)
    }

    pub fn accept_subscription(&self, upload: SubscriptionUpload) -> Result<SubscriptionAck, BrokerError> {
        self.with(|b| b.accept_subscription(upload))
    }

    pub fn accept_report(&self, envelope: ReportEnvelope) -> Result<ReportAck, BrokerError> {
        self.with(|b| b.accept_report(envelope))
    }

    pub fn drain_deliveries(&self, handle: &[u8]) -> Vec<ReportEnvelope> {
        self.with(|b| b.drain_deliveries(handle))
    }

    pub fn match_all(&self) -> BTreeSet<DeliveryMark> {
        self.with(Broker::match_all)
    }

    pub fn epoch_advance(&self, new_epoch: u64) -> Result<PurgeReport, BrokerError> {
        self.with(|b| b.epoch_advance(new_epoch))
    }
}
