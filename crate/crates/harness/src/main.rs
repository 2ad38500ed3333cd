use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pepsi_core::oprf::RegistrationMode;
use pepsi_core::Identifier;
use pepsi_harness::home::Home;
use pepsi_harness::{bench, count_ops, run_scenario, Instantiation, Preset, Scenario, Step, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Private participatory sensing: parties, broker and simulation harness.
#[derive(Parser)]
#[command(name = "pepsi", version)]
struct Cli {
    /// Protocol instantiation. Defaults to the one recorded at setup.
    #[arg(long, global = true)]
    instantiation: Option<Instantiation>,

    /// Broker snapshot file.
    #[arg(long, global = true)]
    state: Option<PathBuf>,

    /// Directory holding RA, node and querier state.
    #[arg(long, global = true, default_value = ".pepsi")]
    home: PathBuf,

    /// Seed for all randomness drawn by this invocation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create RA keys and an empty broker.
    Setup {
        #[arg(long, default_value_t = pepsi_core::oprf::DEFAULT_MODULUS_BITS)]
        rsa_bits: usize,
    },
    /// Issue credentials to a mobile node for one or more identifiers.
    RegisterNode {
        node: String,
        #[arg(required = true)]
        ids: Vec<String>,
        /// Let the RA see the identifiers (oprf only).
        #[arg(long)]
        plain: bool,
    },
    /// Obtain a query authorization through the blind protocol.
    Authorize { querier: String, id: String },
    /// Upload a subscription tag to the broker.
    Subscribe { querier: String, id: String },
    /// Encrypt and upload a report through the relay.
    Report { node: String, id: String, payload: String },
    /// Run matching at the broker.
    Match,
    /// Fetch and decrypt a querier's pending reports.
    Drain { querier: String },
    /// Rotate the nonce, optionally evicting nodes (ibe only).
    Renew {
        #[arg(long)]
        evict: Vec<String>,
    },
    /// Execute a scenario file; exits 0 only when the verdict is PASS.
    Run {
        scenario: PathBuf,
        /// Write the transcript here instead of standard output.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Time the client-side protocol steps.
    Bench {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = bench::MIN_ITERATIONS)]
        iterations: usize,
    },
    /// Count group operations for one protocol step.
    CountOps {
        #[arg(long)]
        step: Step,
    },
}

fn ids(raw: &[String]) -> Result<Vec<Identifier>> {
    raw.iter().map(|s| Identifier::parse(s).with_context(|| format!("identifier {s:?}"))).collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut rng = match cli.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_entropy(),
    };
    let home = Home::new(&cli.home, cli.state.clone());
    let check = |home: &Home| -> Result<()> {
        if let Some(want) = cli.instantiation {
            let have = home.instantiation()?;
            if want != have {
                bail!("--instantiation {want} does not match the {have} deployment in {}", cli.home.display());
            }
        }
        Ok(())
    };
    let print = |lines: Vec<String>| lines.iter().for_each(|l| println!("{l}"));

    match cli.command {
        Command::Setup { rsa_bits } => {
            print(vec![home.setup(cli.instantiation.unwrap_or_default(), rsa_bits, &mut rng)?]);
        }
        Command::RegisterNode { node, ids: raw, plain } => {
            check(&home)?;
            let mode = if plain { RegistrationMode::Plain } else { RegistrationMode::Blind };
            print(home.register_node(&node, &ids(&raw)?, mode, &mut rng)?);
        }
        Command::Authorize { querier, id } => {
            check(&home)?;
            print(vec![home.authorize(&querier, &ids(&[id])?[0], &mut rng)?]);
        }
        Command::Subscribe { querier, id } => {
            check(&home)?;
            print(vec![home.subscribe(&querier, &ids(&[id])?[0], &mut rng)?]);
        }
        Command::Report { node, id, payload } => {
            check(&home)?;
            print(vec![home.report(&node, &ids(&[id])?[0], &payload, &mut rng)?]);
        }
        Command::Match => {
            check(&home)?;
            print(vec![home.match_all()?]);
        }
        Command::Drain { querier } => {
            check(&home)?;
            print(home.drain(&querier)?);
        }
        Command::Renew { evict } => {
            check(&home)?;
            print(vec![home.renew(&evict, &mut rng)?]);
        }
        Command::Run { scenario, transcript } => {
            let text = std::fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let mut sc = Scenario::parse(&text)?;
            if let Some(inst) = cli.instantiation {
                sc.instantiation = inst;
            }
            if let Some(seed) = cli.seed {
                sc.seed = seed;
            }
            let outcome = run_scenario(&sc)?;
            match transcript {
                Some(path) => std::fs::write(&path, outcome.transcript_bytes())?,
                None => print(outcome.transcript.clone()),
            }
            if let Verdict::Fail(problems) = &outcome.verdict {
                problems.iter().for_each(|p| eprintln!("{p}"));
                eprintln!("FAIL");
                return Ok(ExitCode::FAILURE);
            }
            eprintln!("PASS");
        }
        Command::Bench { preset, iterations } => {
            if let Some(inst) = cli.instantiation {
                if inst != preset.instantiation() {
                    bail!("preset {preset} belongs to the {} instantiation", preset.instantiation());
                }
            }
            let report = bench::bench(preset, iterations)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::CountOps { step } => {
            let inst = cli.instantiation.unwrap_or_default();
            let tally = count_ops(inst, step)?;
            let json = serde_json::json!({
                "instantiation": inst.to_string(),
                "step": step.name(),
                "exponentiations": tally.protocol.exponentiations,
                "multiplications": tally.protocol.multiplications,
                "pairings": tally.protocol.pairings,
                "hashes": tally.protocol.hashes,
                "verification": {
                    "exponentiations": tally.verification.exponentiations,
                    "multiplications": tally.verification.multiplications,
                    "pairings": tally.verification.pairings,
                    "hashes": tally.verification.hashes,
                },
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
