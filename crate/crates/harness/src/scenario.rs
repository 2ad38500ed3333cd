//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! instantiation ibe            # or oprf
//! seed 7
//! rsa-bits 1024                # oprf only
//! node n1 "pollution|manhattan" "noise|soho"
//! querier q1
//! register n1
//! authorize q1 "pollution|manhattan"
//! subscribe q1 "pollution|manhattan"
//! report n1 "pollution|manhattan" "PM2.5=12"
//! match
//! drain q1
//! renew evict n2               # ibe only
//! expect q1 "PM2.5=12"
//! ```
//!
//! Words are split with shell quoting rules. `expect` with no payloads
//! expects nothing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use pepsi_core::Identifier;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instantiation {
    #[default]
    Ibe,
    Oprf,
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instantiation::Ibe => "ibe",
            Instantiation::Oprf => "oprf",
        })
    }
}

impl FromStr for Instantiation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ibe" => Ok(Instantiation::Ibe),
            "oprf" => Ok(Instantiation::Oprf),
            other => Err(format!("unknown instantiation {other:?} (expected ibe or oprf)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Register { node: String },
    Authorize { querier: String, id: Identifier },
    Subscribe { querier: String, id: Identifier },
    Report { node: String, id: Identifier, payload: String },
    Renew { evict: Vec<String> },
    Match,
    Drain { querier: String },
    Expect { querier: String, payloads: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub instantiation: Instantiation,
    pub seed: u64,
    pub rsa_bits: usize,
    pub nodes: BTreeMap<String, Vec<Identifier>>,
    pub queriers: BTreeSet<String>,
    /// Events with their 1-based source line.
    pub events: Vec<(usize, Event)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub const DEFAULT_RSA_BITS: usize = pepsi_core::oprf::LEGACY_MODULUS_BITS;

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ParseError> {
        let mut sc = Scenario {
            instantiation: Instantiation::Ibe,
            seed: 0,
            rsa_bits: DEFAULT_RSA_BITS,
            nodes: BTreeMap::new(),
            queriers: BTreeSet::new(),
            events: Vec::new(),
        };
        let mut seen_instantiation = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ParseError { line, message };
            let words = shlex::split(raw).ok_or_else(|| err("unbalanced quotes".into()))?;
            let words: Vec<String> = words.into_iter().take_while(|w| !w.starts_with('#')).collect();
            let Some((keyword, args)) = words.split_first() else { continue };
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{keyword} takes {n} argument(s), got {}", args.len())))
                }
            };
            let ident = |s: &str| Identifier::parse(s).map_err(|e| err(format!("bad identifier {s:?}: {e}")));

            match keyword.as_str() {
                "instantiation" => {
                    arity(1)?;
                    if seen_instantiation || !sc.events.is_empty() {
                        return Err(err("instantiation must be set once, before any event".into()));
                    }
                    sc.instantiation = args[0].parse().map_err(err)?;
                    seen_instantiation = true;
                }
                "seed" => {
                    arity(1)?;
                    sc.seed = args[0].parse().map_err(|_| err(format!("bad seed {:?}", args[0])))?;
                }
                "rsa-bits" => {
                    arity(1)?;
                    sc.rsa_bits = args[0].parse().map_err(|_| err(format!("bad bit length {:?}", args[0])))?;
                }
                "node" => {
                    if args.len() < 2 {
                        return Err(err("node needs a name and at least one identifier".into()));
                    }
                    let ids = args[1..].iter().map(|s| ident(s)).collect::<Result<Vec<_>, _>>()?;
                    if sc.nodes.contains_key(&args[0]) || sc.queriers.contains(&args[0]) {
                        return Err(err(format!("party {:?} declared twice", args[0])));
                    }
                    sc.nodes.insert(args[0].clone(), ids);
                }
                "querier" => {
                    arity(1)?;
                    if sc.nodes.contains_key(&args[0]) || !sc.queriers.insert(args[0].clone()) {
                        return Err(err(format!("party {:?} declared twice", args[0])));
                    }
                }
                "register" => {
                    arity(1)?;
                    sc.node(&args[0]).map_err(err)?;
                    sc.events.push((line, Event::Register { node: args[0].clone() }));
                }
                "authorize" | "subscribe" => {
                    arity(2)?;
                    sc.querier(&args[0]).map_err(err)?;
                    let (querier, id) = (args[0].clone(), ident(&args[1])?);
                    let event = if keyword == "authorize" {
                        Event::Authorize { querier, id }
                    } else {
                        Event::Subscribe { querier, id }
                    };
                    sc.events.push((line, event));
                }
                "report" => {
                    arity(3)?;
                    let id = ident(&args[1])?;
                    if !sc.node(&args[0]).map_err(err)?.contains(&id) {
                        return Err(err(format!("node {:?} was not declared with {id}", args[0])));
                    }
                    sc.events.push((line, Event::Report { node: args[0].clone(), id, payload: args[2].clone() }));
                }
                "renew" => {
                    if sc.instantiation != Instantiation::Ibe {
                        return Err(err("renew is only defined for the ibe instantiation".into()));
                    }
                    let evict = match args.split_first() {
                        None => Vec::new(),
                        Some((kw, nodes)) if kw == "evict" && !nodes.is_empty() => nodes.to_vec(),
                        _ => return Err(err("expected `renew` or `renew evict <node>...`".into())),
                    };
                    for n in &evict {
                        sc.node(n).map_err(err)?;
                    }
                    sc.events.push((line, Event::Renew { evict }));
                }
                "match" => {
                    arity(0)?;
                    sc.events.push((line, Event::Match));
                }
                "drain" => {
                    arity(1)?;
                    sc.querier(&args[0]).map_err(err)?;
                    sc.events.push((line, Event::Drain { querier: args[0].clone() }));
                }
                "expect" => {
                    let Some((querier, payloads)) = args.split_first() else {
                        return Err(err("expect needs a querier".into()));
                    };
                    sc.querier(querier).map_err(err)?;
                    sc.events.push((line, Event::Expect { querier: querier.clone(), payloads: payloads.to_vec() }));
                }
                other => return Err(err(format!("unknown keyword {other:?}"))),
            }
        }
        Ok(sc)
    }

    fn node(&self, name: &str) -> Result<&Vec<Identifier>, String> {
        self.nodes.get(name).ok_or_else(|| format!("undeclared node {name:?}"))
    }

    fn querier(&self, name: &str) -> Result<(), String> {
        if self.queriers.contains(name) {
            Ok(())
        } else {
            Err(format!("undeclared querier {name:?}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# soundness
instantiation ibe
seed 7
node n1 "Pollution | Manhattan"
querier q1
register n1
authorize q1 "pollution|manhattan"
subscribe q1 "pollution|manhattan"   # trailing comment
report n1 "pollution|manhattan" "PM2.5 = 12"
expect q1 "PM2.5 = 12"
expect q1
"#;

    #[test]
    fn parses_sample() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        assert_eq!(sc.seed, 7);
        assert_eq!(sc.nodes["n1"], vec![Identifier::parse("pollution|manhattan").unwrap()]);
        assert_eq!(sc.events.len(), 6);
        assert_eq!(sc.events[0], (7, Event::Register { node: "n1".into() }));
        assert_eq!(sc.events[4].1, Event::Expect { querier: "q1".into(), payloads: vec!["PM2.5 = 12".into()] });
        assert_eq!(sc.events[5].1, Event::Expect { querier: "q1".into(), payloads: vec![] });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("querier q\nfrobnicate", 2, "unknown keyword"),
            ("querier q\n\nsubscribe r a", 3, "undeclared querier"),
            ("node n a\nreport n b x", 2, "not declared"),
            ("instantiation oprf\nnode n a\nrenew", 3, "only defined"),
            ("seed x", 1, "bad seed"),
            ("node n \"a\n", 1, "unbalanced"),
            ("querier q\nquerier q", 2, "twice"),
            ("node n ||", 1, "bad identifier"),
        ];
        for (text, line, needle) in cases {
            let e = Scenario::parse(text).unwrap_err();
            assert_eq!(e.line, line, "{text}");
            assert!(e.message.contains(needle), "{e}");
        }
    }
}
