//! Wall-clock micro-benchmarks of the client-side protocol steps.
//!
//! Timings describe the machine they ran on and nothing else; no threshold
//! is applied to them.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Instantiation;
use crate::steps::{Fixture, Step, StepError};

pub const MIN_ITERATIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Blind-RSA instantiation with a 1024-bit modulus.
    Rsa1024,
    /// Blind-RSA instantiation with a 2048-bit modulus.
    Rsa2048,
    /// Pairing instantiation on BLS12-381.
    Ibe,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Rsa1024, Preset::Rsa2048, Preset::Ibe];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rsa1024 => "paper-1024-rsa",
            Preset::Rsa2048 => "modern-2048-rsa",
            Preset::Ibe => "ibe-default",
        }
    }

    pub fn instantiation(self) -> Instantiation {
        match self {
            Preset::Ibe => Instantiation::Ibe,
            _ => Instantiation::Oprf,
        }
    }

    pub fn modulus_bits(self) -> Option<usize> {
        match self {
            Preset::Rsa1024 => Some(1024),
            Preset::Rsa2048 => Some(2048),
            Preset::Ibe => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected paper-1024-rsa, modern-2048-rsa or ibe-default)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    pub step: String,
    pub iterations: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareNote {
    pub arch: String,
    pub os: String,
    pub cpu: Option<String>,
    pub logical_cpus: usize,
    pub optimized_build: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub preset: String,
    pub instantiation: String,
    pub modulus_bits: Option<usize>,
    pub hardware: HardwareNote,
    pub operations: Vec<OpStats>,
}

impl BenchReport {
    pub fn step(&self, step: Step) -> Option<&OpStats> {
        self.operations.iter().find(|o| o.step == step.name())
    }
}

pub fn hardware_note() -> HardwareNote {
    let cpu = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|info| {
        info.lines()
            .find(|l| l.starts_with("model name"))
            .and_then(|l| l.split_once(':'))
            .map(|(_, v)| v.trim().to_owned())
    });
    HardwareNote {
        arch: std::env::consts::ARCH.to_owned(),
        os: std::env::consts::OS.to_owned(),
        cpu,
        logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        optimized_build: !cfg!(debug_assertions),
        note: "single-threaded timings on this machine; not comparable across hardware".to_owned(),
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[Duration], p: f64) -> Duration {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn stats(step: Step, mut samples: Vec<Duration>) -> OpStats {
    samples.sort();
    let total: Duration = samples.iter().sum();
    OpStats {
        step: step.name().to_owned(),
        iterations: samples.len(),
        mean_ms: millis(total) / samples.len() as f64,
        p50_ms: millis(percentile(&samples, 50.0)),
        p95_ms: millis(percentile(&samples, 95.0)),
    }
}

/// Benchmarks `steps` under `preset`, at least [`MIN_ITERATIONS`] times each.
pub fn bench_steps(preset: Preset, iterations: usize, steps: &[Step]) -> Result<BenchReport, StepError> {
    let iterations = iterations.max(MIN_ITERATIONS);
    let mut rng = ChaCha20Rng::seed_from_u64(0xbe9c);
    let bits = preset.modulus_bits().unwrap_or(pepsi_core::oprf::LEGACY_MODULUS_BITS);
    let mut fixture = Fixture::new(preset.instantiation(), bits, &mut rng)?;
    let mut operations = Vec::new();
    for &step in steps {
        // One untimed warm-up run.
        fixture.execute(step, &mut rng)?;
        let samples =
            (0..iterations).map(|_| fixture.execute(step, &mut rng).map(|m| m.elapsed)).collect::<Result<_, _>>()?;
        operations.push(stats(step, samples));
    }
    Ok(BenchReport {
        preset: preset.name().to_owned(),
        instantiation: preset.instantiation().to_string(),
        modulus_bits: preset.modulus_bits(),
        hardware: hardware_note(),
        operations,
    })
}

pub fn bench(preset: Preset, iterations: usize) -> Result<BenchReport, StepError> {
    bench_steps(preset, iterations, &Step::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_use_nearest_rank() {
        let v: Vec<Duration> = (1..=100).map(Duration::from_millis).collect();
        assert_eq!(percentile(&v, 50.0), Duration::from_millis(50));
        assert_eq!(percentile(&v, 95.0), Duration::from_millis(95));
        let one = [Duration::from_millis(7)];
        assert_eq!(percentile(&one, 95.0), one[0]);
    }

    #[test]
    fn preset_names() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fast".parse::<Preset>().is_err());
    }

    #[test]
    fn iteration_floor_and_json_shape() {
        let report = bench_steps(Preset::Rsa1024, 3, &[Step::DataReport]).unwrap();
        assert_eq!(report.operations[0].iterations, MIN_ITERATIONS);
        let json = serde_json::to_string(&report).unwrap();
        let back: BenchReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let stats = report.step(Step::DataReport).unwrap();
        assert!(stats.p50_ms <= stats.p95_ms);
    }
}
