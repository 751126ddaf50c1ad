use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{confidence_from_llr, llr_threshold, LlrState, NoiseDistribution};
use crate::protocol::ProtocolConfig;
use crate::stats;
use crate::{Error, Result};

/// Version of the per-trial seed derivation in [`derive_seed`]. Bump whenever
/// the mixing changes, since curves are only comparable within a version.
pub const SEED_SCHEME_VERSION: u32 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial, independent of scheduling order.
pub fn derive_seed(master: u64, eta_index: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ eta_index) ^ trial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseFamily {
    Laplace,
    Normal,
}

impl NoiseFamily {
    pub fn law(&self, mu: f64, sigma: f64) -> Result<NoiseDistribution> {
        match self {
            Self::Laplace => NoiseDistribution::laplace(mu, sigma),
            Self::Normal => NoiseDistribution::normal(mu, sigma),
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Laplace => "laplace",
            Self::Normal => "normal",
        })
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplace" => Ok(Self::Laplace),
            "normal" => Ok(Self::Normal),
            _ => Err(Error::Config(format!("unknown noise family `{s}`"))),
        }
    }
}

/// Inclusive `start:end:step` range of reading counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadingRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl ReadingRange {
    pub fn new(start: usize, end: usize, step: usize) -> Result<Self> {
        if start == 0 || step == 0 || end < start {
            return Err(Error::Config(format!(
                "reading range {start}:{end}:{step} must satisfy 1 <= start <= end and step >= 1"
            )));
        }
        Ok(Self { start, end, step })
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }

    /// Largest count actually visited.
    pub fn max(&self) -> usize {
        self.start + (self.end - self.start) / self.step * self.step
    }
}

impl FromStr for ReadingRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("reading range `{s}`: {e}")))
        };
        match parts.as_slice() {
            [a, b, c] => Self::new(num(a)?, num(b)?, num(c)?),
            [a, b] => Self::new(num(a)?, num(b)?, 1),
            [a] => {
                let n = num(a)?;
                Self::new(n, n, 1)
            }
            _ => Err(Error::Config(format!("reading range `{s}` is not start:end:step"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub noise_family: NoiseFamily,
    /// Noise scale over interference magnitude, one curve per value.
    pub eta_values: Vec<f64>,
    pub n_readings: ReadingRange,
    pub trials: usize,
    pub p_target: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.eta_values.is_empty() {
            return Err(Error::Config("at least one eta value is required".into()));
        }
        if let Some(e) = self.eta_values.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eta {e} must be positive and finite")));
        }
        if !(self.p_target > 0.0 && self.p_target < 0.5) {
            return Err(Error::Config(format!("p {} must lie in (0, 0.5)", self.p_target)));
        }
        ReadingRange::new(self.n_readings.start, self.n_readings.end, self.n_readings.step)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub eta: f64,
    pub n: usize,
    pub mean_confidence: f64,
    pub std_confidence: f64,
    pub mean_llr: f64,
}

/// How trials are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Rayon's global pool.
    Parallel,
    /// A dedicated pool with this many threads.
    Threads(usize),
}

/// Cumulative LLR of one trial at each checkpoint.
fn run_trial(spec: &ExperimentSpec, eta_index: usize, trial: usize, checkpoints: &[usize]) -> Result<Vec<f64>> {
    let eta = spec.eta_values[eta_index];
    // Normalized units: delta = 1 and mu = 0, so sigma = eta.
    let truth = spec.noise_family.law(0.0, eta)?;
    let alt = spec.noise_family.law(-1.0, eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, eta_index as u64, trial as u64));
    let mut state = LlrState::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let last = *checkpoints.last().expect("nonempty range");
    for i in 1..=last {
        state = state.update(truth.sample(&mut rng), &truth, &alt)?;
        while next.peek() == Some(&&i) {
            out.push(state.cum_llr);
            next.next();
        }
    }
    Ok(out)
}

/// Confidence-vs-readings curves: for each eta, `trials` independent streams
/// from the true law scored against the law shifted down by one unit.
pub fn run_confidence_curve(spec: &ExperimentSpec) -> Result<Vec<CurvePoint>> {
    run_confidence_curve_with(spec, Execution::Parallel)
}

pub fn run_confidence_curve_with(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    let checkpoints = spec.n_readings.values();
    let jobs: Vec<(usize, usize)> = (0..spec.eta_values.len())
        .flat_map(|e| (0..spec.trials).map(move |t| (e, t)))
        .collect();
    let job = |&(e, t): &(usize, usize)| run_trial(spec, e, t, &checkpoints);

    let results: Vec<Vec<f64>> = match exec {
        Execution::Serial => jobs.iter().map(job).collect::<Result<_>>()?,
        Execution::Parallel => jobs.par_iter().map(job).collect::<Result<_>>()?,
        Execution::Threads(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(job).collect::<Result<_>>())?,
    };

    // `results` is in job order (eta-major, then trial), so aggregation order is fixed.
    let mut points = Vec::with_capacity(spec.eta_values.len() * checkpoints.len());
    for (e, &eta) in spec.eta_values.iter().enumerate() {
        let trials = &results[e * spec.trials..(e + 1) * spec.trials];
        for (k, &n) in checkpoints.iter().enumerate() {
            let llrs: Vec<f64> = trials.iter().map(|t| t[k]).collect();
            let confs: Vec<f64> = llrs.iter().map(|&m| confidence_from_llr(m)).collect();
            points.push(CurvePoint {
                eta,
                n,
                mean_confidence: stats::mean(&confs),
                std_confidence: stats::sample_std(&confs),
                mean_llr: stats::mean(&llrs),
            });
        }
    }
    Ok(points)
}

/// First reading count on the curve for `eta` whose mean LLR reaches
/// `ln((1-p)/p)`, i.e. where the confidence of the mean evidence hits `1 - p`.
pub fn llr_crossing(points: &[CurvePoint], eta: f64, p: f64) -> Option<usize> {
    let t = llr_threshold(p);
    points
        .iter()
        .filter(|c| c.eta == eta)
        .find(|c| c.mean_llr >= t)
        .map(|c| c.n)
}

/// Mean emitted strength over `m` for a noise-injection sender.
pub fn power_utilization(cfg: &ProtocolConfig, m: f64) -> Result<f64> {
    match cfg {
        ProtocolConfig::NoiseInjection { emission } => {
            emission.validate()?;
            Ok(emission.mean() / m)
        }
        other => Err(Error::ProtocolMisuse(format!(
            "power utilization is defined for noise injection, not {}",
            other.name()
        ))),
    }
}
