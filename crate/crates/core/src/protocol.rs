//! Sender-side hiding strategies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{clamp_probability, observe, Environment1D, Reading};
use crate::dist::{NoiseDistribution, NoiseKind};
use crate::{Error, Result};

/// Largest tolerated probability that an untruncated emission leaves `[0, M]`.
pub const CEILING_GUARD: f64 = 1e-6;
/// Largest tolerated probability that a reading hits the zero floor.
pub const CLAMP_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolConfig {
    /// Emit `M - delta` without a person and `M` with one.
    Shift { delta: f64 },
    /// Emit `M - y` with `y ~ shift_dist` without a person and `M` with one.
    RandomShift { shift_dist: NoiseDistribution },
    /// Emit a draw from `emission` regardless of the (unknown) person bit.
    NoiseInjection { emission: NoiseDistribution },
}

impl ProtocolConfig {
    /// Whether the sender observes the interference bit.
    pub fn knows_b(&self) -> bool {
        !matches!(self, Self::NoiseInjection { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Shift { .. } => "shift",
            Self::RandomShift { .. } => "random-shift",
            Self::NoiseInjection { .. } => "noise",
        }
    }

    /// Checks the configuration against max strength `m`, including the
    /// ceiling guard for untruncated emissions.
    pub fn validate(&self, m: f64) -> Result<()> {
        match *self {
            Self::Shift { delta } => {
                if !(0.0..=m).contains(&delta) {
                    return Err(Error::Config(format!("shift delta {delta} outside [0, {m}]")));
                }
            }
            Self::RandomShift { shift_dist } => {
                shift_dist.validate()?;
                let (lo, hi) = shift_dist.support();
                if lo < 0.0 || hi > m {
                    return Err(Error::Config(format!(
                        "shift law {shift_dist} has support outside [0, {m}]"
                    )));
                }
            }
            Self::NoiseInjection { emission } => {
                emission.validate()?;
                match emission.kind() {
                    NoiseKind::TruncatedNormal | NoiseKind::PointMass => {
                        let (lo, hi) = emission.support();
                        if lo < 0.0 || hi > m {
                            return Err(Error::Config(format!(
                                "emission {emission} has support outside [0, {m}]"
                            )));
                        }
                    }
                    NoiseKind::Laplace | NoiseKind::Normal => {
                        let outside = emission.prob_below(0.0) + emission.sf(m);
                        if outside >= CEILING_GUARD {
                            return Err(Error::Config(format!(
                                "emission {emission} leaves [0, {m}] with probability {outside:e}; use a truncated law"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Chooses the emitted strength for one step. `b` must be given exactly
    /// when the protocol knows the interference bit.
    pub fn emit<R: Rng + ?Sized>(&self, m: f64, b: Option<bool>, rng: &mut R) -> Result<f64> {
        let alpha = match (*self, b) {
            (Self::Shift { delta }, Some(b)) => {
                if b {
                    m
                } else {
                    m - delta
                }
            }
            (Self::RandomShift { shift_dist }, Some(b)) => {
                if b {
                    m
                } else {
                    m - shift_dist.sample(rng)
                }
            }
            (Self::NoiseInjection { emission }, None) => emission.sample(rng),
            (cfg, Some(_)) => {
                return Err(Error::ProtocolMisuse(format!(
                    "{} does not know the interference bit",
                    cfg.name()
                )))
            }
            (cfg, None) => {
                return Err(Error::ProtocolMisuse(format!(
                    "{} requires the interference bit",
                    cfg.name()
                )))
            }
        };
        if !(0.0..=m).contains(&alpha) {
            return Err(Error::EmissionRange { value: alpha, max: m });
        }
        Ok(alpha)
    }
}

/// Readings produced by one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTrace {
    pub readings: Vec<Reading>,
    /// Strength emitted at each step.
    pub emitted: Vec<f64>,
    pub max_strength: f64,
}

impl ObservationTrace {
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Observed values without the ground-truth bits.
    pub fn values(&self) -> Vec<f64> {
        self.readings.iter().map(|r| r.value).collect()
    }

    /// Mean emitted strength over `M`; `NaN` for an empty trace.
    pub fn power_utilization(&self) -> f64 {
        self.emitted.iter().sum::<f64>() / self.emitted.len() as f64 / self.max_strength
    }
}

/// Runs `cfg` in `env` over the given interference bits.
///
/// Noise-injection runs are rejected up front if the emission could clamp at
/// the zero floor with probability at least [`CLAMP_GUARD`]; the shift
/// protocols hide exactly even when the floor binds, so they are not guarded.
pub fn run_trace(
    cfg: &ProtocolConfig,
    env: &Environment1D,
    b_sequence: &[bool],
    seed: u64,
) -> Result<ObservationTrace> {
    env.validate()?;
    let m = env.max_strength;
    cfg.validate(m)?;
    if let ProtocolConfig::NoiseInjection { emission } = cfg {
        for b in [false, true] {
            let p = clamp_probability(env, emission, b)?;
            if p >= CLAMP_GUARD {
                return Err(Error::Config(format!(
                    "readings clamp at zero with probability {p:e} (b={}); move the adversary closer or raise the emission mean",
                    b as u8
                )));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut readings = Vec::with_capacity(b_sequence.len());
    let mut emitted = Vec::with_capacity(b_sequence.len());
    for &b in b_sequence {
        let seen = cfg.knows_b().then_some(b);
        let alpha = cfg.emit(m, seen, &mut rng)?;
        readings.push(observe(env, alpha, b, &mut rng)?);
        emitted.push(alpha);
    }
    Ok(ObservationTrace {
        readings,
        emitted,
        max_strength: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn pm(x: f64) -> NoiseDistribution {
        NoiseDistribution::point_mass(x).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn shift_emits_rule() {
        let cfg = ProtocolConfig::Shift { delta: 4.0 };
        assert_eq!(cfg.emit(30.0, Some(false), &mut rng()).unwrap(), 26.0);
        assert_eq!(cfg.emit(30.0, Some(true), &mut rng()).unwrap(), 30.0);
    }

    #[test]
    fn degenerate_random_shift_matches_shift() {
        let a = ProtocolConfig::Shift { delta: 4.0 };
        let b = ProtocolConfig::RandomShift { shift_dist: pm(4.0) };
        for bit in [false, true] {
            assert_eq!(
                a.emit(30.0, Some(bit), &mut rng()).unwrap(),
                b.emit(30.0, Some(bit), &mut rng()).unwrap()
            );
        }
    }

    #[test]
    fn knowledge_mismatch_is_misuse() {
        let noise = ProtocolConfig::NoiseInjection {
            emission: NoiseDistribution::normal(20.0, 2.0).unwrap(),
        };
        assert!(matches!(
            noise.emit(30.0, Some(true), &mut rng()),
            Err(Error::ProtocolMisuse(_))
        ));
        let shift = ProtocolConfig::Shift { delta: 1.0 };
        assert!(matches!(
            shift.emit(30.0, None, &mut rng()),
            Err(Error::ProtocolMisuse(_))
        ));
    }

    #[test]
    fn noise_injection_mean() {
        let cfg = ProtocolConfig::NoiseInjection {
            emission: NoiseDistribution::normal(20.0, 2.0).unwrap(),
        };
        let mut r = rng();
        let xs: Vec<f64> = (0..100_000).map(|_| cfg.emit(30.0, None, &mut r).unwrap()).collect();
        assert!((stats::mean(&xs) - 20.0).abs() < 0.05);
    }

    #[test]
    fn out_of_range_emission_reported() {
        // Bypass validation: a wide normal will eventually leave [0, 30].
        let cfg = ProtocolConfig::NoiseInjection {
            emission: NoiseDistribution::normal(29.0, 5.0).unwrap(),
        };
        let mut r = rng();
        let err = (0..1000).find_map(|_| cfg.emit(30.0, None, &mut r).err()).unwrap();
        assert!(matches!(err, Error::EmissionRange { .. }));
    }

    #[test]
    fn validation_rules() {
        assert!(ProtocolConfig::Shift { delta: 31.0 }.validate(30.0).is_err());
        assert!(ProtocolConfig::Shift { delta: 30.0 }.validate(30.0).is_ok());
        let tn = NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap();
        assert!(ProtocolConfig::RandomShift { shift_dist: tn }.validate(30.0).is_ok());
        assert!(ProtocolConfig::RandomShift { shift_dist: tn }.validate(3.0).is_err());
        let wide = NoiseDistribution::normal(24.0, 2.0).unwrap();
        assert!(matches!(
            ProtocolConfig::NoiseInjection { emission: wide }.validate(30.0),
            Err(Error::Config(_))
        ));
        let narrow = NoiseDistribution::normal(15.0, 2.0).unwrap();
        assert!(ProtocolConfig::NoiseInjection { emission: narrow }
            .validate(30.0)
            .is_ok());
        let lap = NoiseDistribution::laplace(15.0, 1.0).unwrap();
        assert!(ProtocolConfig::NoiseInjection { emission: lap }.validate(30.0).is_ok());
        let lap = NoiseDistribution::laplace(15.0, 2.0).unwrap();
        assert!(ProtocolConfig::NoiseInjection { emission: lap }.validate(30.0).is_err());
    }

    #[test]
    fn shift_trace_is_constant() {
        let env = Environment1D::new(0.0, 10.0, 0.5, 30.0, pm(4.0)).unwrap();
        let cfg = ProtocolConfig::Shift { delta: 4.0 };
        let bits: Vec<bool> = (0..200).map(|i| (i * 7919) % 3 == 0).collect();
        let trace = run_trace(&cfg, &env, &bits, 5).unwrap();
        assert!(trace.values().iter().all(|&v| v == 21.0));
        // Clamped configuration still hides.
        let far = env.with_adversary_at(100.0);
        let trace = run_trace(&cfg, &far, &bits, 5).unwrap();
        assert!(trace.readings.iter().all(|r| r.value == 0.0 && r.clamped));
    }

    #[test]
    fn noise_injection_common_random_numbers() {
        let env = Environment1D::new(0.0, 10.0, 0.5, 30.0, pm(4.0)).unwrap();
        let cfg = ProtocolConfig::NoiseInjection {
            emission: NoiseDistribution::normal(20.0, 2.0).unwrap(),
        };
        let ones = run_trace(&cfg, &env, &[true; 500], 13).unwrap();
        let zeros = run_trace(&cfg, &env, &[false; 500], 13).unwrap();
        assert_eq!(ones.emitted, zeros.emitted);
        for (z, o) in zeros.readings.iter().zip(&ones.readings) {
            assert!((z.value - o.value - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_gives_empty_trace() {
        let env = Environment1D::new(0.0, 10.0, 0.5, 30.0, pm(4.0)).unwrap();
        let trace = run_trace(&ProtocolConfig::Shift { delta: 4.0 }, &env, &[], 0).unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn clamp_guard_rejects_before_running() {
        // Mean reading 18 - 10 - 4 = 4 with sigma 2: clamps with probability ~2%.
        let env = Environment1D::new(0.0, 20.0, 0.5, 30.0, pm(4.0)).unwrap();
        let cfg = ProtocolConfig::NoiseInjection {
            emission: NoiseDistribution::normal(18.0, 2.0).unwrap(),
        };
        assert!(matches!(run_trace(&cfg, &env, &[true], 0), Err(Error::Config(_))));
    }

    #[test]
    fn empirical_power_utilization() {
        let env = Environment1D::new(0.0, 10.0, 0.5, 30.0, pm(4.0)).unwrap();
        let emission = NoiseDistribution::normal(20.0, 2.0).unwrap();
        let cfg = ProtocolConfig::NoiseInjection { emission };
        let trace = run_trace(&cfg, &env, &vec![false; 20_000], 3).unwrap();
        let se = 2.0 / 30.0 / (20_000f64).sqrt();
        assert!((trace.power_utilization() - 20.0 / 30.0).abs() < 3.0 * se);
    }
}
