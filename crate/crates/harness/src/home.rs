//! On-disk state for the command-line tool.
//!
//! ```text
//! <home>/authority.json       RA keys (and, for ibe, the node registry)
//! <home>/nodes/<name>.json    a node's credentials, keyed by identifier
//! <home>/queriers/<name>.json a querier's authorizations and subscriptions
//! <state>                     broker snapshot (default <home>/broker.bin)
//! ```
//!
//! Every party file is written by the party's own command only, so the
//! broker snapshot never contains anything but wire-format records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pepsi_broker::{relay_strip_bytes, Broker, BrokerConfig, SubscriptionAck};
use pepsi_core::ibe::IbeSecretKey;
use pepsi_core::oprf::{self, RegistrationMode, RsaParams, RsaSecret, Signature};
use pepsi_core::pepsi::{
    self, NodeCredential, NodeRegistry, PepsiParams, PepsiSecret, QueryAuthorization, RegistrationAuthority,
    SubscriptionSecret,
};
use pepsi_core::{Identifier, Measurement, ReportEnvelope};
use pepsi_wire::{SubscriptionUpload, TransportFrame, TransportMetadata};
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::scenario::Instantiation;

#[derive(Serialize, Deserialize)]
#[serde(tag = "instantiation", rename_all = "lowercase")]
enum AuthorityFile {
    Ibe { params: String, secret: String, nodes: BTreeMap<String, Vec<String>>, evicted: Vec<String> },
    Oprf { params: String, secret: String },
}

#[derive(Default, Serialize, Deserialize)]
struct NodeFile {
    credentials: BTreeMap<String, String>,
}

#[derive(Default, Serialize, Deserialize)]
struct QuerierFile {
    authorizations: BTreeMap<String, String>,
    subscriptions: Vec<SubscriptionRecord>,
}

#[derive(Clone, Serialize, Deserialize)]
struct SubscriptionRecord {
    id: String,
    epoch: Option<u64>,
    handle: String,
    /// ibe only: the encoded `SubscriptionSecret`.
    secret: Option<String>,
}

enum Authority {
    Ibe(Box<RegistrationAuthority>),
    Oprf { params: RsaParams, secret: RsaSecret },
}

pub struct Home {
    dir: PathBuf,
    state: PathBuf,
}

fn unhex(s: &str) -> Result<Vec<u8>> {
    hex::decode(s).context("invalid hex in state file")
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        bail!("party names may only use letters, digits, '-', '_' and '.' ({name:?})");
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

impl Home {
    pub fn new(dir: impl Into<PathBuf>, state: Option<PathBuf>) -> Self {
        let dir = dir.into();
        let state = state.unwrap_or_else(|| dir.join("broker.bin"));
        Home { dir, state }
    }

    fn authority_path(&self) -> PathBuf {
        self.dir.join("authority.json")
    }

    fn node_path(&self, name: &str) -> Result<PathBuf> {
        check_name(name)?;
        Ok(self.dir.join("nodes").join(format!("{name}.json")))
    }

    fn querier_path(&self, name: &str) -> Result<PathBuf> {
        check_name(name)?;
        Ok(self.dir.join("queriers").join(format!("{name}.json")))
    }

    /// Creates fresh RA keys and an empty broker.
    pub fn setup<R: RngCore + CryptoRng>(&self, inst: Instantiation, rsa_bits: usize, rng: &mut R) -> Result<String> {
        if self.authority_path().exists() {
            bail!("{} already holds a deployment", self.dir.display());
        }
        let authority = match inst {
            Instantiation::Ibe => Authority::Ibe(Box::new(RegistrationAuthority::new(rng))),
            Instantiation::Oprf => {
                let (params, secret) = oprf::setup(rsa_bits, rng)?;
                Authority::Oprf { params, secret }
            }
        };
        self.save_authority(&authority)?;
        self.save_broker(&Broker::new(BrokerConfig::default()))?;
        Ok(match &authority {
            Authority::Ibe(ra) => format!("ibe deployment created, epoch {}", ra.params().epoch()),
            Authority::Oprf { params, .. } => format!("oprf deployment created, {}-bit modulus", params.modulus_bits()),
        })
    }

    pub fn instantiation(&self) -> Result<Instantiation> {
        Ok(match self.load_authority()? {
            Authority::Ibe(_) => Instantiation::Ibe,
            Authority::Oprf { .. } => Instantiation::Oprf,
        })
    }

    fn load_authority(&self) -> Result<Authority> {
        let file: AuthorityFile = read_json(&self.authority_path())?
            .ok_or_else(|| anyhow!("no deployment in {}; run `pepsi setup` first", self.dir.display()))?;
        Ok(match file {
            AuthorityFile::Ibe { params, secret, nodes, evicted } => {
                let params = PepsiParams::from_bytes(&unhex(&params)?)?;
                let secret = PepsiSecret::from_bytes(&unhex(&secret)?)?;
                let mut registry = NodeRegistry::default();
                for (node, ids) in &nodes {
                    for id in ids {
                        registry.add(node, &Identifier::from_canonical(id)?)?;
                    }
                }
                for node in &evicted {
                    registry.evict(node);
                }
                Authority::Ibe(Box::new(RegistrationAuthority::from_parts(params, secret, registry)))
            }
            AuthorityFile::Oprf { params, secret } => {
                let params = RsaParams::from_bytes(&unhex(&params)?)?;
                let secret = RsaSecret::from_bytes(&params, &unhex(&secret)?)?;
                Authority::Oprf { params, secret }
            }
        })
    }

    fn save_authority(&self, authority: &Authority) -> Result<()> {
        let file = match authority {
            Authority::Ibe(ra) => AuthorityFile::Ibe {
                params: hex::encode(ra.params().to_bytes()),
                secret: hex::encode(ra.secret().to_bytes()),
                nodes: ra
                    .registry()
                    .all()
                    .map(|(n, ids)| (n.to_owned(), ids.iter().map(|i| i.as_str().to_owned()).collect()))
                    .collect(),
                evicted: ra.registry().evicted().map(str::to_owned).collect(),
            },
            Authority::Oprf { params, secret } => AuthorityFile::Oprf {
                params: hex::encode(params.to_bytes()),
                secret: hex::encode(secret.to_bytes()),
            },
        };
        write_json(&self.authority_path(), &file)
    }

    fn load_broker(&self) -> Result<Broker> {
        let bytes = fs::read(&self.state).with_context(|| format!("reading {}", self.state.display()))?;
        Ok(Broker::restore(&bytes, BrokerConfig::default())?)
    }

    fn save_broker(&self, broker: &Broker) -> Result<()> {
        if let Some(parent) = self.state.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&self.state, broker.snapshot()).with_context(|| format!("writing {}", self.state.display()))
    }

    /// Registers `node` for `ids`. In the blind-RSA instantiation the node
    /// obtains one signature per identifier, blindly unless `mode` is plain.
    pub fn register_node<R: RngCore + CryptoRng>(
        &self,
        node: &str,
        ids: &[Identifier],
        mode: RegistrationMode,
        rng: &mut R,
    ) -> Result<Vec<String>> {
        let path = self.node_path(node)?;
        let mut file: NodeFile = read_json(&path)?.unwrap_or_default();
        let mut authority = self.load_authority()?;
        let mut out = Vec::new();
        for id in ids {
            let encoded = match &mut authority {
                Authority::Ibe(ra) => hex::encode(ra.register_node(node, id)?.to_bytes()),
                Authority::Oprf { params, secret } => {
                    let sig = match mode {
                        RegistrationMode::Plain => oprf::issue_plain(secret, params, id.as_bytes())?,
                        RegistrationMode::Blind => {
                            let (state, mu) = oprf::blind(params, id.as_bytes(), rng)?;
                            oprf::unblind(state, &oprf::sign_blinded(secret, &mu)?, params)?
                        }
                    };
                    hex::encode(sig.to_bytes())
                }
            };
            file.credentials.insert(id.as_str().to_owned(), encoded);
            out.push(format!("registered {node} for {id}"));
        }
        self.save_authority(&authority)?;
        write_json(&path, &file)?;
        Ok(out)
    }

    pub fn authorize<R: RngCore + CryptoRng>(&self, querier: &str, id: &Identifier, rng: &mut R) -> Result<String> {
        let path = self.querier_path(querier)?;
        let mut file: QuerierFile = read_json(&path)?.unwrap_or_default();
        let encoded = match self.load_authority()? {
            Authority::Ibe(ra) => {
                let (pending, mu) = pepsi::request_authorization(ra.params(), id, rng)?;
                let auth = pending.finalize(ra.params(), &ra.respond_authorization(&mu)?)?;
                hex::encode(auth.key().to_bytes())
            }
            Authority::Oprf { params, secret } => {
                let (state, mu) = oprf::blind(&params, id.as_bytes(), rng)?;
                hex::encode(oprf::unblind(state, &oprf::sign_blinded(&secret, &mu)?, &params)?.to_bytes())
            }
        };
        file.authorizations.insert(id.as_str().to_owned(), encoded);
        write_json(&path, &file)?;
        Ok(format!("{querier} authorized for {id}"))
    }

    /// Derives the tag for `id` and uploads it to the broker under a handle
    /// private to this querier, identifier and epoch.
    pub fn subscribe<R: RngCore + CryptoRng>(&self, querier: &str, id: &Identifier, rng: &mut R) -> Result<String> {
        let path = self.querier_path(querier)?;
        let mut file: QuerierFile = read_json(&path)?.unwrap_or_default();
        let key = file
            .authorizations
            .get(id.as_str())
            .ok_or_else(|| anyhow!("{querier} is not authorized for {id}; run `pepsi authorize` first"))?;
        let key = unhex(key)?;
        let (epoch, tag, secret) = match self.load_authority()? {
            Authority::Ibe(ra) => {
                let auth = QueryAuthorization::from_key(ra.params(), IbeSecretKey::from_bytes(&key)?)?;
                let (sub, tag) = pepsi::subscribe(ra.params(), &auth)?;
                (Some(ra.params().epoch()), tag, Some(hex::encode(sub.to_bytes())))
            }
            Authority::Oprf { params, .. } => {
                let sig = Signature::from_bytes(&params, id.as_bytes(), &key)?;
                (None, oprf::subscribe(&params, &sig).1, None)
            }
        };
        let existing = file.subscriptions.iter().find(|s| s.id == id.as_str() && s.epoch == epoch);
        let handle = match existing {
            Some(s) => unhex(&s.handle)?,
            None => {
                let h: [u8; 16] = rng.gen();
                file.subscriptions.push(SubscriptionRecord {
                    id: id.as_str().to_owned(),
                    epoch,
                    handle: hex::encode(h),
                    secret,
                });
                h.to_vec()
            }
        };
        let mut broker = self.load_broker()?;
        let ack = broker.accept_subscription(SubscriptionUpload { epoch, handle, tag })?;
        self.save_broker(&broker)?;
        write_json(&path, &file)?;
        Ok(match ack {
            SubscriptionAck::Stored { retroactive_marks } => {
                format!("{querier} subscribed to {id} (tag {tag}); {retroactive_marks} stored report(s) matched")
            }
            SubscriptionAck::Duplicate => format!("{querier} was already subscribed to {id}"),
        })
    }

    /// Encrypts `payload` under `id`, wraps it in a transport frame, strips
    /// the frame at the relay and hands the envelope to the broker.
    pub fn report<R: RngCore + CryptoRng>(
        &self,
        node: &str,
        id: &Identifier,
        payload: &str,
        rng: &mut R,
    ) -> Result<String> {
        let file: NodeFile = read_json(&self.node_path(node)?)?.unwrap_or_default();
        let cred = file
            .credentials
            .get(id.as_str())
            .ok_or_else(|| anyhow!("{node} is not registered for {id}; run `pepsi register-node` first"))?;
        let cred = unhex(cred)?;
        let measurement = Measurement::from(payload);
        let envelope: ReportEnvelope = match self.load_authority()? {
            Authority::Ibe(ra) => {
                pepsi::produce_report(ra.params(), &NodeCredential::from_bytes(&cred)?, &measurement, rng)?
            }
            Authority::Oprf { params, .. } => {
                let sig = Signature::from_bytes(&params, id.as_bytes(), &cred)?;
                oprf::produce_report(&params, &sig, &measurement, rng)?
            }
        };
        let frame = TransportFrame {
            envelope: ReportEnvelope { sender: Some(node.to_owned()), ..envelope },
            metadata: TransportMetadata::default(),
        };
        let stripped = relay_strip_bytes(&frame.to_bytes()?)?;
        let mut broker = self.load_broker()?;
        let ack = broker.accept_report_wire(&stripped)?;
        self.save_broker(&broker)?;
        Ok(format!("report {} stored; {} delivery mark(s)", ack.id.0, ack.marks))
    }

    pub fn match_all(&self) -> Result<String> {
        let mut broker = self.load_broker()?;
        let marks = broker.match_all();
        self.save_broker(&broker)?;
        Ok(format!("{} pending deliveries", marks.len()))
    }

    /// Pulls and decrypts everything pending for `querier`.
    pub fn drain(&self, querier: &str) -> Result<Vec<String>> {
        let file: QuerierFile = read_json(&self.querier_path(querier)?)?.unwrap_or_default();
        let authority = self.load_authority()?;
        let mut broker = self.load_broker()?;
        let mut out = Vec::new();
        for rec in &file.subscriptions {
            let envelopes = broker.drain_deliveries(&unhex(&rec.handle)?);
            if envelopes.is_empty() {
                continue;
            }
            for env in envelopes {
                let opened = match &authority {
                    Authority::Ibe(_) => {
                        let secret = rec.secret.as_deref().ok_or_else(|| anyhow!("subscription record lacks its secret"))?;
                        pepsi::open_notification(&SubscriptionSecret::from_bytes(&unhex(secret)?)?, &env)?
                    }
                    Authority::Oprf { params, .. } => {
                        let key = file
                            .authorizations
                            .get(&rec.id)
                            .ok_or_else(|| anyhow!("missing authorization for {}", rec.id))?;
                        let sig = Signature::from_bytes(params, rec.id.as_bytes(), &unhex(key)?)?;
                        oprf::open_notification(&oprf::subscribe(params, &sig).0, &env)?
                    }
                };
                out.push(String::from_utf8_lossy(opened.payload()).into_owned());
            }
        }
        self.save_broker(&broker)?;
        Ok(out)
    }

    /// Nonce renewal: evicts `evict`, rotates `z`, re-issues credentials to
    /// the remaining nodes and moves the broker to the new epoch.
    pub fn renew<R: RngCore + CryptoRng>(&self, evict: &[String], rng: &mut R) -> Result<String> {
        let Authority::Ibe(mut ra) = self.load_authority()? else {
            bail!("renewal is only defined for the ibe instantiation; rotate the RSA key instead");
        };
        for node in evict {
            ra.evict(node);
        }
        let redistribution = ra.renew_nonce(rng);
        for r in &redistribution {
            let path = self.node_path(&r.node)?;
            let mut file: NodeFile = read_json(&path)?.unwrap_or_default();
            for cred in &r.credentials {
                file.credentials.insert(cred.id.as_str().to_owned(), hex::encode(cred.to_bytes()));
            }
            write_json(&path, &file)?;
        }
        let epoch = ra.params().epoch();
        let mut broker = self.load_broker()?;
        let purge = broker.epoch_advance(epoch)?;
        self.save_authority(&Authority::Ibe(ra))?;
        self.save_broker(&broker)?;
        Ok(format!(
            "epoch {epoch}: {} node(s) re-credentialed, {} subscription(s) and {} report(s) purged",
            redistribution.len(),
            purge.subscriptions,
            purge.reports
        ))
    }
}
