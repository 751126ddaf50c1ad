//! Passive detectors and sample-complexity bounds.
//!
//! Sign convention: the LLR puts the `b = 1` hypothesis in the numerator, so
//! positive evidence points at a person being present.

use crate::channel::{clamp_probability, Environment1D};
use crate::dist::{confidence_from_llr, llr_threshold, LlrState, NoiseDistribution};
use crate::protocol::{ProtocolConfig, CLAMP_GUARD};
use crate::{Error, Result};

/// Reading laws at the adversary under each value of the interference bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisPair {
    /// Readings when no person interferes.
    pub h0: NoiseDistribution,
    /// Readings when a person interferes.
    pub h1: NoiseDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HidingCase {
    PerfectHiding,
    NoisyHiding,
    ImmediateDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    B0,
    B1,
    Undecided,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::B0 => "B0",
            Decision::B1 => "B1",
            Decision::Undecided => "undecided",
        })
    }
}

impl std::fmt::Display for HidingCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HidingCase::PerfectHiding => "perfect-hiding",
            HidingCase::NoisyHiding => "noisy-hiding",
            HidingCase::ImmediateDetection => "immediate-detection",
        })
    }
}

impl HypothesisPair {
    pub fn new(h0: NoiseDistribution, h1: NoiseDistribution) -> Result<Self> {
        h0.validate()?;
        h1.validate()?;
        Ok(Self { h0, h1 })
    }

    /// The reading laws an adversary in `env` faces when the sender runs `cfg`.
    ///
    /// Fails with a configuration error when the zero floor could bind, since
    /// the floored law is not one of the supported families.
    pub fn induced(cfg: &ProtocolConfig, env: &Environment1D) -> Result<Self> {
        env.validate()?;
        let m = env.max_strength;
        cfg.validate(m)?;
        let loss = env.path_loss();
        let floored = || Error::Config("readings can hit the zero floor; the induced law is censored".into());
        match *cfg {
            ProtocolConfig::Shift { delta } => {
                // Mirrors the arithmetic order in `observe`.
                let r0 = ((m - delta) - 0.0) - loss;
                let r1 = match env.interference {
                    NoiseDistribution::PointMass { mu } => Ok((m - mu) - loss),
                    _ => Err(Error::Config("shift protocol assumes constant interference".into())),
                }?;
                Self::new(
                    NoiseDistribution::point_mass(r0.max(0.0))?,
                    NoiseDistribution::point_mass(r1.max(0.0))?,
                )
            }
            ProtocolConfig::RandomShift { shift_dist } => {
                let h0 = shift_dist.reflected(m - loss);
                let h1 = env.interference.reflected(m - loss);
                for h in [&h0, &h1] {
                    if h.support().0 < 0.0 {
                        return Err(floored());
                    }
                }
                Self::new(h0, h1)
            }
            ProtocolConfig::NoiseInjection { emission } => {
                for b in [false, true] {
                    if clamp_probability(env, &emission, b)? >= CLAMP_GUARD {
                        return Err(floored());
                    }
                }
                let h0 = emission.shifted(-loss);
                let h1 = match (emission, env.interference) {
                    (_, NoiseDistribution::PointMass { mu }) => emission.shifted(-mu - loss),
                    (NoiseDistribution::PointMass { mu }, interference) => interference.reflected(mu - loss),
                    _ => {
                        return Err(Error::Config(
                            "random emission with random interference has no closed-form reading law".into(),
                        ))
                    }
                };
                Self::new(h0, h1)
            }
        }
    }
}

fn same_support(a: &NoiseDistribution, b: &NoiseDistribution) -> bool {
    a.is_atomic() == b.is_atomic() && a.support() == b.support()
}

/// Which of the three hiding regimes a hypothesis pair falls into.
pub fn classify_case(pair: &HypothesisPair) -> HidingCase {
    if pair.h0 == pair.h1 {
        HidingCase::PerfectHiding
    } else if !same_support(&pair.h0, &pair.h1) {
        HidingCase::ImmediateDetection
    } else {
        HidingCase::NoisyHiding
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub llr: LlrState,
    pub confidence_b1: f64,
    pub decision: Decision,
    pub case: HidingCase,
}

/// Sequential likelihood-ratio detector with symmetric thresholds
/// `±ln((1-p)/p)`. Stops at the first reading that pushes the LLR strictly
/// past a threshold, or at an immediate detection.
pub fn sequential_detect<I>(pair: &HypothesisPair, readings: I, p: f64) -> Result<DetectionReport>
where
    I: IntoIterator<Item = f64>,
{
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Parameter(format!(
            "confidence parameter p = {p} must lie in (0, 0.5)"
        )));
    }
    let threshold = llr_threshold(p);
    if classify_case(pair) == HidingCase::PerfectHiding {
        return Ok(DetectionReport {
            llr: LlrState::new(),
            confidence_b1: 0.5,
            decision: Decision::Undecided,
            case: HidingCase::PerfectHiding,
        });
    }

    let mut state = LlrState::new();
    let mut decision = Decision::Undecided;
    for x in readings {
        state = state.update(x, &pair.h1, &pair.h0)?;
        if state.cum_llr > threshold {
            decision = Decision::B1;
            break;
        }
        if state.cum_llr < -threshold {
            decision = Decision::B0;
            break;
        }
    }
    Ok(DetectionReport {
        llr: state,
        confidence_b1: confidence_from_llr(state.cum_llr),
        decision,
        case: if state.immediate_detection {
            HidingCase::ImmediateDetection
        } else {
            HidingCase::NoisyHiding
        },
    })
}

/// Drop detector baseline: once `window` readings are available, flags `B1`
/// when the trailing mean is strictly below `threshold`.
pub fn moving_average_detect(readings: &[f64], window: usize, threshold: f64) -> Result<Vec<Decision>> {
    if window == 0 {
        return Err(Error::Parameter("moving-average window must be at least 1".into()));
    }
    Ok((0..readings.len())
        .map(|i| {
            if i + 1 < window {
                return Decision::Undecided;
            }
            let win = &readings[i + 1 - window..=i];
            let mean = win.iter().sum::<f64>() / window as f64;
            if mean < threshold {
                Decision::B1
            } else {
                Decision::B0
            }
        })
        .collect())
}

fn check_p(p: f64) -> Result<f64> {
    if p > 0.0 && p < 0.5 {
        Ok(llr_threshold(p))
    } else {
        Err(Error::Parameter(format!("p = {p} must lie in (0, 0.5)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {v}")))
    }
}

/// Readings needed against Laplace noise: the adversary needs strictly more
/// than `ln((1-p)/p) * eta`, with `eta = sigma / delta`.
pub fn n_required_laplace(p: f64, eta: f64) -> Result<f64> {
    let t = check_p(p)?;
    check_positive("eta", eta)?;
    Ok(t * eta)
}

/// Expected readings needed to separate `Normal(mu1, sigma1)` (truth) from
/// `Normal(mu2, sigma2)`, with `eta1 = sigma2 / sigma1` and
/// `eta2 = (mu2 - mu1) / sigma2`.
pub fn n_required_normal(p: f64, eta1: f64, eta2: f64) -> Result<f64> {
    let t = check_p(p)?;
    check_positive("eta1", eta1)?;
    let denom = (eta2 * eta2 - 1.0) / 2.0 + eta1.ln() + 1.0 / (2.0 * eta1 * eta1);
    if !(denom > 0.0) {
        return Err(Error::PerfectHiding);
    }
    Ok(t / denom)
}

/// Equal-variance special case: `2 ln((1-p)/p) eta^2` with `eta = sigma / delta`.
pub fn n_required_normal_equal_variance(p: f64, eta: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    n_required_normal(p, 1.0, 1.0 / eta)
}

/// Normal emission noise plus normal interference `Normal(mu_i, sigma_i)`,
/// with `sigma1 = sqrt(sigma^2 + sigma_i^2)`, `eta = sigma1 / mu_i` and
/// `eta_prime = sigma1 / sigma`.
pub fn n_required_normal_normal(p: f64, eta: f64, eta_prime: f64) -> Result<f64> {
    let t = check_p(p)?;
    check_positive("eta", eta)?;
    check_positive("eta_prime", eta_prime)?;
    let inv = 1.0 / eta;
    let denom = (inv * inv - 1.0) / 2.0 + eta_prime.ln() + 1.0 / (2.0 * eta_prime * eta_prime);
    if !(denom > 0.0) {
        return Err(Error::PerfectHiding);
    }
    Ok(t / denom)
}

/// [`n_required_normal_normal`] from raw parameters.
pub fn n_required_normal_normal_from_params(p: f64, sigma: f64, sigma_i: f64, mu_i: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if sigma_i < 0.0 {
        return Err(Error::Parameter(format!("sigma_i must be nonnegative, got {sigma_i}")));
    }
    let sigma1 = sigma.hypot(sigma_i);
    let eta = if mu_i == 0.0 {
        f64::INFINITY
    } else {
        sigma1 / mu_i.abs()
    };
    n_required_normal_normal(p, eta, sigma1 / sigma)
}
