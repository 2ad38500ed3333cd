//! One execution of a protocol step from the mobile node's or querier's side,
//! with its operation tally and wall-clock time. RA work inside a step (the
//! signing half of an interactive exchange) is neither counted nor timed.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use pepsi_core::ops::{self, OpTally};
use pepsi_core::oprf::{self, OprfSubscription, RsaParams, RsaSecret, Signature};
use pepsi_core::pepsi::{self, NodeCredential, QueryAuthorization, RegistrationAuthority, SubscriptionSecret};
use pepsi_core::{Identifier, Measurement, ReportEnvelope};
use rand_chacha::ChaCha20Rng;

use crate::scenario::Instantiation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    NodeRegistration,
    DataReport,
    QueryAuthorization,
    QuerySubscription,
    Notification,
}

impl Step {
    pub const ALL: [Step; 5] =
        [Step::NodeRegistration, Step::DataReport, Step::QueryAuthorization, Step::QuerySubscription, Step::Notification];

    pub fn name(self) -> &'static str {
        match self {
            Step::NodeRegistration => "node-registration",
            Step::DataReport => "data-report",
            Step::QueryAuthorization => "query-auth",
            Step::QuerySubscription => "query-subscription",
            Step::Notification => "notification",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Step::ALL.into_iter().find(|step| step.name() == s).ok_or_else(|| {
            let names: Vec<_> = Step::ALL.iter().map(|s| s.name()).collect();
            format!("unknown step {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StepError {
    #[error("protocol error: {0}")]
    Protocol(String),
}

fn protocol<E: ToString>(e: E) -> StepError {
    StepError::Protocol(e.to_string())
}

/// Accumulates operations and time over the client-side parts of a step.
#[derive(Clone, Copy, Debug, Default)]
pub struct Meter {
    pub tally: OpTally,
    pub elapsed: Duration,
}

impl Meter {
    fn client<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let (out, tally) = ops::measure(f);
        self.elapsed += start.elapsed();
        self.tally += tally;
        out
    }
}

/// Long-lived material every step can start from.
#[allow(clippy::large_enum_variant)]
pub enum Fixture {
    Ibe {
        ra: Box<RegistrationAuthority>,
        id: Identifier,
        credential: NodeCredential,
        authorization: QueryAuthorization,
        subscription: SubscriptionSecret,
        envelope: ReportEnvelope,
    },
    Oprf {
        params: RsaParams,
        secret: RsaSecret,
        id: Identifier,
        signature: Signature,
        subscription: OprfSubscription,
        envelope: ReportEnvelope,
    },
}

const FIXTURE_ID: &str = "pollution|manhattan";
const FIXTURE_PAYLOAD: &str = "PM2.5=12ug/m3;lat=40.7831;lon=-73.9712";

impl Fixture {
    pub fn new(instantiation: Instantiation, rsa_bits: usize, rng: &mut ChaCha20Rng) -> Result<Fixture, StepError> {
        let id = Identifier::parse(FIXTURE_ID).expect("valid");
        let payload = Measurement::from(FIXTURE_PAYLOAD);
        Ok(match instantiation {
            Instantiation::Ibe => {
                let mut ra = RegistrationAuthority::new(rng);
                let credential = ra.register_node("bench-node", &id).map_err(protocol)?;
                let (authorization, _) = pepsi::authorize_query(ra.params(), ra.secret(), &id, rng).map_err(protocol)?;
                let (subscription, _) = pepsi::subscribe(ra.params(), &authorization).map_err(protocol)?;
                let envelope = pepsi::produce_report(ra.params(), &credential, &payload, rng).map_err(protocol)?;
                Fixture::Ibe { ra: Box::new(ra), id, credential, authorization, subscription, envelope }
            }
            Instantiation::Oprf => {
                let (params, secret) = oprf::setup(rsa_bits, rng).map_err(protocol)?;
                let signature = oprf::issue_plain(&secret, &params, id.as_bytes()).map_err(protocol)?;
                let (subscription, _) = oprf::subscribe(&params, &signature);
                let envelope = oprf::produce_report(&params, &signature, &payload, rng).map_err(protocol)?;
                Fixture::Oprf { params, secret, id, signature, subscription, envelope }
            }
        })
    }

    /// Runs `step` once and returns the client-side cost.
    pub fn execute(&mut self, step: Step, rng: &mut ChaCha20Rng) -> Result<Meter, StepError> {
        let mut m = Meter::default();
        let payload = Measurement::from(FIXTURE_PAYLOAD);
        match self {
            Fixture::Ibe { ra, id, credential, authorization, subscription, envelope } => match step {
                Step::NodeRegistration => {
                    // The node only stores `(ID, z)`; no computation.
                    let cred = ra.register_node("bench-node", id).map_err(protocol)?;
                    *credential = m.client(|| cred);
                }
                Step::DataReport => {
                    *envelope = m
                        .client(|| pepsi::produce_report(ra.params(), credential, &payload, rng))
                        .map_err(protocol)?;
                }
                Step::QueryAuthorization => {
                    let (pending, mu) =
                        m.client(|| pepsi::request_authorization(ra.params(), id, rng)).map_err(protocol)?;
                    let response = ra.respond_authorization(&mu).map_err(protocol)?;
                    *authorization = m.client(|| pending.finalize(ra.params(), &response)).map_err(protocol)?;
                }
                Step::QuerySubscription => {
                    *subscription = m.client(|| pepsi::subscribe(ra.params(), authorization)).map_err(protocol)?.0;
                }
                Step::Notification => {
                    m.client(|| pepsi::open_notification(subscription, envelope)).map_err(protocol)?;
                }
            },
            Fixture::Oprf { params, secret, id, signature, subscription, envelope } => match step {
                Step::NodeRegistration | Step::QueryAuthorization => {
                    let (state, mu) = m.client(|| oprf::blind(params, id.as_bytes(), rng)).map_err(protocol)?;
                    let mu_prime = oprf::sign_blinded(secret, &mu).map_err(protocol)?;
                    *signature = m.client(|| oprf::unblind(state, &mu_prime, params)).map_err(protocol)?;
                }
                Step::DataReport => {
                    *envelope =
                        m.client(|| oprf::produce_report(params, signature, &payload, rng)).map_err(protocol)?;
                }
                Step::QuerySubscription => {
                    *subscription = m.client(|| oprf::subscribe(params, signature)).0;
                }
                Step::Notification => {
                    m.client(|| oprf::open_notification(subscription, envelope)).map_err(protocol)?;
                }
            },
        }
        Ok(m)
    }
}

/// Operation counts for one execution of `step`.
pub fn count_ops(instantiation: Instantiation, step: Step) -> Result<OpTally, StepError> {
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(0x00c0_ffee);
    let mut fixture = Fixture::new(instantiation, oprf::LEGACY_MODULUS_BITS, &mut rng)?;
    Ok(fixture.execute(step, &mut rng)?.tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_names_round_trip() {
        for s in Step::ALL {
            assert_eq!(s.name().parse::<Step>().unwrap(), s);
        }
        assert!("data".parse::<Step>().unwrap_err().contains("data-report"));
    }

    #[test]
    fn counts_do_not_vary_between_runs() {
        for inst in [Instantiation::Ibe, Instantiation::Oprf] {
            for step in Step::ALL {
                assert_eq!(count_ops(inst, step).unwrap(), count_ops(inst, step).unwrap(), "{inst} {step}");
            }
        }
    }
}
