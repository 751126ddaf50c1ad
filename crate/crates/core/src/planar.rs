//! Directional emission in the plane: the narrow-band random-direction
//! protocol and the gradual-decay two-adversary beam solver.
//!
//! Angles are radians measured at the sender. Radial path loss to each
//! adversary is fixed and folded into the base strength, so only angular
//! offsets matter here.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::{Error, Result};

/// Normalizes an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed offset from `from` to `to`, in `(-π, π]`.
pub fn signed_offset(from: f64, to: f64) -> f64 {
    let d = wrap_angle(to - from);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Angular distance in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    signed_offset(a, b).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene2D {
    pub adversary_angles: Vec<f64>,
    /// Beam strength with nobody interfering.
    pub base_strength: f64,
    pub max_strength: f64,
    /// Half-width of the narrow band.
    pub tau: f64,
    /// Strength lost per radian away from the beam axis.
    pub decay_slope: f64,
    /// Constant person effect on one adversary's path.
    pub interference_delta: f64,
}

impl Scene2D {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.tau > 0.0 && self.tau < PI) {
            return bad(format!("tau = {} must lie in (0, π)", self.tau));
        }
        if !(self.decay_slope > 0.0 && self.decay_slope.is_finite()) {
            return bad(format!("decay slope {} must be positive", self.decay_slope));
        }
        if !(self.base_strength > 0.0 && self.base_strength <= self.max_strength && self.max_strength.is_finite()) {
            return bad(format!(
                "need 0 < base strength {} <= max strength {}",
                self.base_strength, self.max_strength
            ));
        }
        if !(self.interference_delta >= 0.0 && self.interference_delta.is_finite()) {
            return bad(format!("interference {} must be nonnegative", self.interference_delta));
        }
        for (i, &a) in self.adversary_angles.iter().enumerate() {
            if !(0.0..TAU).contains(&a) {
                return bad(format!("adversary {i} angle {a} outside [0, 2π)"));
            }
            if self.adversary_angles[..i].contains(&a) {
                return bad(format!("adversary {i} shares its angle with another adversary"));
            }
        }
        Ok(())
    }

    /// Fails with a geometry error naming the first pair of adversaries whose
    /// separation is not larger than `2 tau`.
    pub fn check_narrowband_separation(&self) -> Result<()> {
        let angles = &self.adversary_angles;
        for i in 0..angles.len() {
            for j in i + 1..angles.len() {
                let sep = angular_distance(angles[i], angles[j]);
                if sep <= 2.0 * self.tau {
                    return Err(Error::Geometry {
                        first: i,
                        second: j,
                        separation: sep,
                        required: 2.0 * self.tau,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Whether an adversary sees a narrow beam pointed at `theta`.
pub fn narrowband_visible(adversary_angle: f64, theta: f64, tau: f64) -> bool {
    angular_distance(adversary_angle, theta) < tau
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandRound {
    pub theta: f64,
    pub observers: Vec<usize>,
}

/// One round of the random-direction protocol: a uniform beam direction and
/// the adversaries that can see it.
pub fn narrowband_round<R: Rng + ?Sized>(scene: &Scene2D, rng: &mut R) -> Result<NarrowbandRound> {
    scene.validate()?;
    scene.check_narrowband_separation()?;
    let theta = wrap_angle(rng.random::<f64>() * TAU);
    let observers = scene
        .adversary_angles
        .iter()
        .enumerate()
        .filter(|(_, &a)| narrowband_visible(a, theta, scene.tau))
        .map(|(i, _)| i)
        .collect();
    Ok(NarrowbandRound { theta, observers })
}

/// Reading at adversary `index` for a beam at `theta` with strength `alpha`
/// under linear angular decay.
///
/// # Panics
/// If `index` is out of range.
pub fn gradual_reading(scene: &Scene2D, theta: f64, alpha: f64, index: usize, interfered: bool) -> f64 {
    let offset = angular_distance(scene.adversary_angles[index], theta);
    let delta = if interfered { scene.interference_delta } else { 0.0 };
    (alpha - delta - scene.decay_slope * offset).max(0.0)
}

/// Why a two-adversary configuration cannot be hidden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    /// The adversaries are too close in angle for the beam to compensate.
    AngularSeparation,
    /// Compensation needs more than the maximum strength.
    PowerLimit,
    /// The baseline readings already sit on the zero floor.
    ZeroFloor,
}

impl Infeasibility {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AngularSeparation => "angular-separation",
            Self::PowerLimit => "power-limit",
            Self::ZeroFloor => "zero-floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSolution {
    pub theta: f64,
    pub alpha: f64,
    pub feasible: bool,
    pub reason: Option<Infeasibility>,
}

/// Beam direction used without interference: the midpoint of the minor arc.
pub fn baseline_direction(scene: &Scene2D) -> Result<f64> {
    match scene.adversary_angles.as_slice() {
        &[a0, a1] => Ok(wrap_angle(a0 + signed_offset(a0, a1) / 2.0)),
        other => Err(Error::Parameter(format!(
            "gradual-decay solver needs exactly 2 adversaries, got {}",
            other.len()
        ))),
    }
}

/// Direction and strength that give both adversaries their baseline reading
/// when adversary `interfered_index` is attenuated by the person.
///
/// Solves `alpha + k s_j t = alpha0 + delta_j` for both adversaries, where
/// `t` is the beam offset from the baseline direction and `s_j` the side
/// adversary `j` lies on. Valid only while the beam stays strictly between
/// the adversaries, which holds iff `delta < 2 k phi0`.
pub fn solve_two_adversary(scene: &Scene2D, interfered_index: usize) -> Result<BeamSolution> {
    scene.validate()?;
    let mid = baseline_direction(scene)?;
    if interfered_index > 1 {
        return Err(Error::Parameter(format!(
            "interfered index {interfered_index} is not 0 or 1"
        )));
    }
    let k = scene.decay_slope;
    let alpha0 = scene.base_strength;
    let delta = scene.interference_delta;
    let other = 1 - interfered_index;

    let side = |j: usize| signed_offset(mid, scene.adversary_angles[j]).signum();
    let half_sep = angular_distance(mid, scene.adversary_angles[0]);
    let (si, so) = (side(interfered_index), side(other));

    // Cramer's rule on [[1, k si], [1, k so]] (alpha, t) = (alpha0 + delta, alpha0).
    let det = k * so - k * si;
    let (r1, r2) = (alpha0 + delta, alpha0);
    let alpha = (r1 * k * so - k * si * r2) / det;
    let t = (r2 - r1) / det;
    let theta = wrap_angle(mid + t);

    let reason = if t.abs() >= half_sep {
        Some(Infeasibility::AngularSeparation)
    } else if alpha > scene.max_strength {
        Some(Infeasibility::PowerLimit)
    } else if alpha0 - k * half_sep < 0.0 {
        Some(Infeasibility::ZeroFloor)
    } else {
        None
    };
    Ok(BeamSolution {
        theta,
        alpha,
        feasible: reason.is_none(),
        reason,
    })
}
