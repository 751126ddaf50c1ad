//! One-dimensional propagation: linear decay, a floor at zero, and person interference.

use rand::Rng;

use crate::dist::{NoiseDistribution, NoiseKind};
use crate::quad;
use crate::{Error, Result};

/// Absolute tolerance for the convolution integral in [`clamp_probability`].
const CLAMP_ABS_TOL: f64 = 1e-9;

/// Sender, adversary and interference on a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment1D {
    pub sender_pos: f64,
    pub adversary_pos: f64,
    /// Strength lost per unit distance.
    pub decay_c: f64,
    pub max_strength: f64,
    /// Attenuation caused by a person on the path: a point mass for the
    /// constant-offset model, or a law with nonnegative support.
    pub interference: NoiseDistribution,
}

impl Environment1D {
    pub fn new(
        sender_pos: f64,
        adversary_pos: f64,
        decay_c: f64,
        max_strength: f64,
        interference: NoiseDistribution,
    ) -> Result<Self> {
        let env = Self {
            sender_pos,
            adversary_pos,
            decay_c,
            max_strength,
            interference,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sender_pos.is_finite() || !self.adversary_pos.is_finite() {
            return Err(Error::Parameter("positions must be finite".into()));
        }
        if !(self.decay_c > 0.0 && self.decay_c.is_finite()) {
            return Err(Error::Parameter(format!(
                "decay rate must be positive, got {}",
                self.decay_c
            )));
        }
        if !(self.max_strength > 0.0 && self.max_strength.is_finite()) {
            return Err(Error::Parameter(format!(
                "max strength must be positive, got {}",
                self.max_strength
            )));
        }
        self.interference.validate()?;
        let nonnegative = match self.interference {
            NoiseDistribution::PointMass { mu } => mu >= 0.0,
            NoiseDistribution::TruncatedNormal { lo, .. } => lo >= 0.0,
            _ => false,
        };
        if !nonnegative {
            return Err(Error::Parameter(format!(
                "interference {} must have nonnegative support",
                self.interference
            )));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        (self.sender_pos - self.adversary_pos).abs()
    }

    pub fn path_loss(&self) -> f64 {
        self.decay_c * self.distance()
    }

    /// Same environment with the adversary moved.
    pub fn with_adversary_at(&self, adversary_pos: f64) -> Self {
        Self { adversary_pos, ..*self }
    }
}

/// One RSS reading at the adversary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub value: f64,
    /// The zero floor was active (the unfloored value was negative).
    pub clamped: bool,
    /// Ground truth interference bit; for evaluation only.
    pub truth_b: bool,
}

/// The adversary's reading for emitted strength `alpha`.
///
/// Computed as `max(0, (alpha - b*I) - c*|x - a|)`. Interference is subtracted
/// before path loss, so a sender that pre-subtracts `I` from `alpha` yields a
/// bit-identical reading.
pub fn observe<R: Rng + ?Sized>(env: &Environment1D, alpha: f64, b: bool, rng: &mut R) -> Result<Reading> {
    if !(0.0..=env.max_strength).contains(&alpha) {
        return Err(Error::ProtocolViolation {
            alpha,
            max: env.max_strength,
        });
    }
    let attenuation = if b { env.interference.sample(rng) } else { 0.0 };
    let raw = (alpha - attenuation) - env.path_loss();
    Ok(Reading {
        value: raw.max(0.0),
        clamped: raw < 0.0,
        truth_b: b,
    })
}

/// Probability that a reading hits the zero floor when the sender draws its
/// strength from `emission`.
pub fn clamp_probability(env: &Environment1D, emission: &NoiseDistribution, b: bool) -> Result<f64> {
    emission.validate()?;
    env.validate()?;
    let loss = env.path_loss();
    if !b {
        return Ok(emission.prob_below(loss));
    }
    match env.interference {
        NoiseDistribution::PointMass { mu: delta } => Ok(emission.prob_below(loss + delta)),
        interference => {
            if emission.kind() == NoiseKind::PointMass {
                // Clamp iff I > alpha - loss.
                return Ok(interference.sf(emission.mu() - loss));
            }
            // P(E < loss + I) = integral of g(i) F_E(loss + i) over the interference support.
            let (lo, hi) = interference.support();
            let p = quad::integrate(
                |i| interference.pdf(i).unwrap_or(0.0) * emission.prob_below(loss + i),
                lo,
                hi,
                1e-10,
                CLAMP_ABS_TOL,
            )?;
            Ok(p.clamp(0.0, 1.0))
        }
    }
}
