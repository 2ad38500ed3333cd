//! Executes a [`Scenario`] against real parties and a real broker.
//!
//! The runner plays every party except the broker, including the network relay.
//! It alone knows which identifier each tag stands for; the broker is built
//! from a default config and only ever receives wire bytes. At quiescence the
//! runner compares what each querier decrypted with a cleartext oracle:
//! querier `q` must receive exactly the payloads of reports whose identifier
//! and epoch equal one of `q`'s subscriptions.

use std::collections::{BTreeMap, BTreeSet};

use pepsi_broker::{relay_strip_bytes, Broker, BrokerConfig, SubscriptionAck};
use pepsi_core::oprf::{self, OprfSubscription, RsaParams, RsaSecret, Signature};
use pepsi_core::pepsi::{self, NodeCredential, QueryAuthorization, RegistrationAuthority, SubscriptionSecret};
use pepsi_core::{Identifier, Measurement, ReportEnvelope};
use pepsi_wire::{SubscriptionUpload, TransportFrame, TransportMetadata};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::scenario::{Event, Instantiation, Scenario};

const HANDLE_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub transcript: Vec<String>,
    pub verdict: Verdict,
    /// Payloads each querier decrypted, in delivery order.
    pub delivered: BTreeMap<String, Vec<String>>,
    /// Payloads each querier should have received, sorted.
    pub oracle: BTreeMap<String, Vec<String>>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn transcript_bytes(&self) -> Vec<u8> {
        let mut out = self.transcript.join("\n").into_bytes();
        out.push(b'\n');
        out
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RunError {
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("line {line}: {message}")]
    Step { line: usize, message: String },
}

enum Authority {
    Ibe(Box<RegistrationAuthority>),
    Oprf { params: RsaParams, secret: RsaSecret },
}

enum NodeKey {
    Ibe(NodeCredential),
    Oprf(Signature),
}

enum QuerierKey {
    Ibe(Box<QueryAuthorization>),
    Oprf(Signature),
}

enum SubKey {
    Ibe(Box<SubscriptionSecret>),
    Oprf(OprfSubscription),
}

struct LoggedReport {
    id: Identifier,
    epoch: Option<u64>,
    payload: String,
}

struct World {
    rng: ChaCha20Rng,
    authority: Authority,
    broker: Broker,
    node_keys: BTreeMap<(String, Identifier), NodeKey>,
    querier_keys: BTreeMap<(String, Identifier), QuerierKey>,
    handles: BTreeMap<(String, Identifier, Option<u64>), Vec<u8>>,
    subs: BTreeMap<Vec<u8>, SubKey>,
    inbox: BTreeMap<String, Vec<String>>,
    delivered: BTreeMap<String, Vec<String>>,
    subscribed: BTreeSet<(String, Identifier, Option<u64>)>,
    reports: Vec<LoggedReport>,
    transcript: Vec<String>,
    failures: Vec<String>,
    frames: u64,
}

pub fn run_scenario(sc: &Scenario) -> Result<Outcome, RunError> {
    let mut rng = ChaCha20Rng::seed_from_u64(sc.seed);
    let authority = match sc.instantiation {
        Instantiation::Ibe => Authority::Ibe(Box::new(RegistrationAuthority::new(&mut rng))),
        Instantiation::Oprf => {
            let (params, secret) = oprf::setup(sc.rsa_bits, &mut rng).map_err(|e| RunError::Setup(e.to_string()))?;
            Authority::Oprf { params, secret }
        }
    };
    let mut w = World {
        rng,
        authority,
        broker: Broker::new(BrokerConfig::default()),
        node_keys: BTreeMap::new(),
        querier_keys: BTreeMap::new(),
        handles: BTreeMap::new(),
        subs: BTreeMap::new(),
        inbox: sc.queriers.iter().map(|q| (q.clone(), Vec::new())).collect(),
        delivered: sc.queriers.iter().map(|q| (q.clone(), Vec::new())).collect(),
        subscribed: BTreeSet::new(),
        reports: Vec::new(),
        transcript: Vec::new(),
        failures: Vec::new(),
        frames: 0,
    };
    w.log(format!("scenario instantiation={} seed={}", sc.instantiation, sc.seed));
    w.log(format!("setup {}", w.public_parameters()));
    for (line, event) in &sc.events {
        w.step(sc, *line, event).map_err(|message| RunError::Step { line: *line, message })?;
    }
    Ok(w.finish(sc))
}

impl World {
    fn log(&mut self, line: String) {
        self.transcript.push(line);
    }

    fn epoch(&self) -> Option<u64> {
        match &self.authority {
            Authority::Ibe(ra) => Some(ra.params().epoch()),
            Authority::Oprf { .. } => None,
        }
    }

    fn public_parameters(&self) -> String {
        match &self.authority {
            Authority::Ibe(ra) => format!("ibe params={}", hex::encode(ra.params().to_bytes())),
            Authority::Oprf { params, .. } => {
                format!("oprf n={} e={}", params.n().to_str_radix(16), params.e().to_str_radix(16))
            }
        }
    }

    fn step(&mut self, sc: &Scenario, line: usize, event: &Event) -> Result<(), String> {
        match event {
            Event::Register { node } => self.register(sc, line, node),
            Event::Authorize { querier, id } => self.authorize(line, querier, id),
            Event::Subscribe { querier, id } => self.subscribe(line, querier, id),
            Event::Report { node, id, payload } => self.report(line, node, id, payload),
            Event::Renew { evict } => self.renew(line, evict),
            Event::Match => {
                let pending = self.broker.match_all().len();
                self.log(format!("L{line} match pending={pending}"));
                Ok(())
            }
            Event::Drain { querier } => {
                self.drain(line, querier);
                Ok(())
            }
            Event::Expect { querier, payloads } => {
                self.broker.match_all();
                self.drain(line, querier);
                let mut got = std::mem::take(self.inbox.get_mut(querier).expect("declared"));
                got.sort();
                let mut want = payloads.clone();
                want.sort();
                if got == want {
                    self.log(format!("L{line} expect querier={querier} ok count={}", got.len()));
                } else {
                    let msg = format!("L{line} expect querier={querier} FAILED want={want:?} got={got:?}");
                    self.failures.push(msg.clone());
                    self.log(msg);
                }
                Ok(())
            }
        }
    }

    fn register(&mut self, sc: &Scenario, line: usize, node: &str) -> Result<(), String> {
        for id in &sc.nodes[node] {
            match &mut self.authority {
                Authority::Ibe(ra) => match ra.register_node(node, id) {
                    Ok(cred) => {
                        let msg = format!(
                            "L{line} register node={node} id={id} credential={}",
                            hex::encode(cred.to_bytes())
                        );
                        self.node_keys.insert((node.to_owned(), id.clone()), NodeKey::Ibe(cred));
                        self.log(msg);
                    }
                    Err(e) => self.log(format!("L{line} register node={node} id={id} refused: {e}")),
                },
                Authority::Oprf { params, secret } => {
                    let (state, mu) = oprf::blind(params, id.as_bytes(), &mut self.rng).map_err(|e| e.to_string())?;
                    let mu_prime = oprf::sign_blinded(secret, &mu).map_err(|e| e.to_string())?;
                    let sig = oprf::unblind(state, &mu_prime, params).map_err(|e| e.to_string())?;
                    let msg = format!(
                        "L{line} register node={node} id={id} blinded={} signed={}",
                        mu.to_str_radix(16),
                        mu_prime.to_str_radix(16)
                    );
                    self.node_keys.insert((node.to_owned(), id.clone()), NodeKey::Oprf(sig));
                    self.log(msg);
                }
            }
        }
        Ok(())
    }

    fn authorize(&mut self, line: usize, querier: &str, id: &Identifier) -> Result<(), String> {
        let (key, msg) = match &self.authority {
            Authority::Ibe(ra) => {
                let (pending, mu) = pepsi::request_authorization(ra.params(), id, &mut self.rng).map_err(|e| e.to_string())?;
                let resp = ra.respond_authorization(&mu).map_err(|e| e.to_string())?;
                let auth = pending.finalize(ra.params(), &resp).map_err(|e| e.to_string())?;
                let msg = format!(
                    "request={} response={}{}",
                    hex::encode(mu.encode()),
                    hex::encode(resp.sk1.encode()),
                    hex::encode(resp.sk2.encode())
                );
                (QuerierKey::Ibe(Box::new(auth)), msg)
            }
            Authority::Oprf { params, secret } => {
                let (state, mu) = oprf::blind(params, id.as_bytes(), &mut self.rng).map_err(|e| e.to_string())?;
                let mu_prime = oprf::sign_blinded(secret, &mu).map_err(|e| e.to_string())?;
                let sig = oprf::unblind(state, &mu_prime, params).map_err(|e| e.to_string())?;
                let msg = format!("blinded={} signed={}", mu.to_str_radix(16), mu_prime.to_str_radix(16));
                (QuerierKey::Oprf(sig), msg)
            }
        };
        self.querier_keys.insert((querier.to_owned(), id.clone()), key);
        self.log(format!("L{line} authorize querier={querier} id={id} {msg}"));
        Ok(())
    }

    fn subscribe(&mut self, line: usize, querier: &str, id: &Identifier) -> Result<(), String> {
        let key = self
            .querier_keys
            .get(&(querier.to_owned(), id.clone()))
            .ok_or_else(|| format!("querier {querier:?} is not authorized for {id}"))?;
        let (sub, tag) = match (&self.authority, key) {
            (Authority::Ibe(ra), QuerierKey::Ibe(auth)) => {
                let (sub, tag) = pepsi::subscribe(ra.params(), auth).map_err(|e| e.to_string())?;
                (SubKey::Ibe(Box::new(sub)), tag)
            }
            (Authority::Oprf { params, .. }, QuerierKey::Oprf(sig)) => {
                let (sub, tag) = oprf::subscribe(params, sig);
                (SubKey::Oprf(sub), tag)
            }
            _ => unreachable!("one instantiation per run"),
        };
        let epoch = self.epoch();
        let slot = (querier.to_owned(), id.clone(), epoch);
        let handle = match self.handles.get(&slot) {
            Some(h) => h.clone(),
            None => {
                let h: [u8; HANDLE_LEN] = self.rng.gen();
                self.handles.insert(slot.clone(), h.to_vec());
                h.to_vec()
            }
        };
        let upload = SubscriptionUpload { epoch, handle: handle.clone(), tag };
        let wire = upload.to_wire();
        let ack = match self.broker.accept_subscription(upload) {
            Ok(SubscriptionAck::Stored { retroactive_marks }) => {
                self.subs.insert(handle, sub);
                self.subscribed.insert(slot);
                format!("stored retroactive={retroactive_marks}")
            }
            Ok(SubscriptionAck::Duplicate) => "duplicate".to_owned(),
            Err(e) => format!("rejected: {e}"),
        };
        self.log(format!("L{line} subscribe querier={querier} id={id} upload={} ack={ack}", hex::encode(wire)));
        Ok(())
    }

    fn report(&mut self, line: usize, node: &str, id: &Identifier, payload: &str) -> Result<(), String> {
        let key = self
            .node_keys
            .get(&(node.to_owned(), id.clone()))
            .ok_or_else(|| format!("node {node:?} is not registered for {id}"))?;
        let measurement = Measurement::from(payload);
        let produced = match (&self.authority, key) {
            (Authority::Ibe(ra), NodeKey::Ibe(cred)) => {
                pepsi::produce_report(ra.params(), cred, &measurement, &mut self.rng).map_err(|e| e.to_string())
            }
            (Authority::Oprf { params, .. }, NodeKey::Oprf(sig)) => {
                oprf::produce_report(params, sig, &measurement, &mut self.rng).map_err(|e| e.to_string())
            }
            _ => unreachable!("one instantiation per run"),
        };
        let envelope = match produced {
            Ok(env) => env,
            Err(e) => {
                self.log(format!("L{line} report node={node} id={id} refused: {e}"));
                return Ok(());
            }
        };
        self.frames += 1;
        let frame = TransportFrame {
            envelope: ReportEnvelope { sender: Some(node.to_owned()), ..envelope.clone() },
            metadata: TransportMetadata {
                cell_id: Some(format!("cell-{}", self.rng.gen_range(0..64u32))),
                location: Some(format!(
                    "{:.4},{:.4}",
                    self.rng.gen_range(40.70..40.80f64),
                    self.rng.gen_range(-74.02..-73.93f64)
                )),
                sent_at: Some(self.frames),
            },
        };
        let frame_bytes = frame.to_bytes().map_err(|e| e.to_string())?;
        let stripped = relay_strip_bytes(&frame_bytes).map_err(|e| e.to_string())?;
        let ack = match self.broker.accept_report_wire(&stripped) {
            Ok(ack) => {
                self.reports.push(LoggedReport { id: id.clone(), epoch: envelope.epoch, payload: payload.to_owned() });
                format!("stored id={} marks={}", ack.id.0, ack.marks)
            }
            Err(e) => format!("rejected: {e}"),
        };
        self.log(format!(
            "L{line} report node={node} id={id} frame={} stripped={} ack={ack}",
            hex::encode(frame_bytes),
            hex::encode(stripped)
        ));
        Ok(())
    }

    fn renew(&mut self, line: usize, evict: &[String]) -> Result<(), String> {
        let Authority::Ibe(ra) = &mut self.authority else {
            return Err("renew is only defined for the ibe instantiation".into());
        };
        for node in evict {
            ra.evict(node);
        }
        let redistribution = ra.renew_nonce(&mut self.rng);
        let epoch = ra.params().epoch();
        let params = hex::encode(ra.params().to_bytes());
        let purge = self.broker.epoch_advance(epoch).map_err(|e| e.to_string())?;
        let mut refreshed = Vec::new();
        for r in redistribution {
            for cred in r.credentials {
                self.node_keys.insert((r.node.clone(), cred.id.clone()), NodeKey::Ibe(cred));
            }
            refreshed.push(r.node);
        }
        self.log(format!(
            "L{line} renew epoch={epoch} evicted={evict:?} refreshed={refreshed:?} purged_subscriptions={} purged_reports={} params={params}",
            purge.subscriptions, purge.reports
        ));
        Ok(())
    }

    fn drain(&mut self, line: usize, querier: &str) {
        let handles: Vec<Vec<u8>> =
            self.handles.iter().filter(|((q, _, _), _)| q == querier).map(|(_, h)| h.clone()).collect();
        let mut count = 0;
        for handle in handles {
            for env in self.broker.drain_deliveries(&handle) {
                count += 1;
                let opened = match &self.subs[&handle] {
                    SubKey::Ibe(sub) => pepsi::open_notification(sub, &env).map_err(|e| e.to_string()),
                    SubKey::Oprf(sub) => oprf::open_notification(sub, &env).map_err(|e| e.to_string()),
                };
                match opened {
                    Ok(m) => {
                        let text = String::from_utf8_lossy(m.payload()).into_owned();
                        self.log(format!("L{line} deliver querier={querier} tag={} payload={text:?}", env.tag));
                        self.inbox.get_mut(querier).expect("declared").push(text.clone());
                        self.delivered.get_mut(querier).expect("declared").push(text);
                    }
                    Err(e) => {
                        let msg = format!("L{line} deliver querier={querier} tag={} FAILED: {e}", env.tag);
                        self.failures.push(msg.clone());
                        self.log(msg);
                    }
                }
            }
        }
        self.log(format!("L{line} drain querier={querier} delivered={count}"));
    }

    fn finish(mut self, sc: &Scenario) -> Outcome {
        self.broker.match_all();
        for q in &sc.queriers {
            self.drain(0, q);
        }
        let mut oracle = BTreeMap::new();
        for q in &sc.queriers {
            let mut want: Vec<String> = self
                .reports
                .iter()
                .filter(|r| self.subscribed.contains(&(q.clone(), r.id.clone(), r.epoch)))
                .map(|r| r.payload.clone())
                .collect();
            want.sort();
            let mut got = self.delivered[q].clone();
            got.sort();
            if got != want {
                let msg = format!("oracle querier={q} FAILED want={} got={}", want.len(), got.len());
                self.failures.push(msg.clone());
                self.log(msg);
            }
            oracle.insert(q.clone(), want);
        }
        let verdict = if self.failures.is_empty() { Verdict::Pass } else { Verdict::Fail(self.failures.clone()) };
        self.log(match &verdict {
            Verdict::Pass => "verdict PASS".to_owned(),
            Verdict::Fail(f) => format!("verdict FAIL ({} problems)", f.len()),
        });
        Outcome { transcript: self.transcript, verdict, delivered: self.delivered, oracle }
    }
}
