//! Noise laws, densities, samplers, KL divergences and log-likelihood ratios.
//!
//! All densities carry their normalizing constants, so LLRs between members of
//! different families (or different scales) are exact.

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution as _;
use statrs::function::erf::{erfc, erfc_inv};

use crate::quad;
use crate::{Error, Result};

/// Relative tolerance for the numerical KL fallback.
pub const KL_REL_TOL: f64 = 1e-8;

// Half-widths (in scale units) at which untruncated supports are cut for
// numerical integration. Both leave tail mass far below KL_REL_TOL.
const NORMAL_SPAN: f64 = 40.0;
const LAPLACE_SPAN: f64 = 60.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Laplace,
    Normal,
    TruncatedNormal,
    PointMass,
}

/// A parametric noise law over signal strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDistribution {
    Laplace {
        mu: f64,
        sigma: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    /// Normal(mu, sigma) conditioned on `[lo, hi]`.
    TruncatedNormal {
        mu: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    PointMass {
        mu: f64,
    },
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate for large `z`.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn std_normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Inverse of [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Inverse of [`std_normal_sf`].
pub fn std_normal_isf(q: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * q)
}

/// Uniform draw on the open interval (0, 1) from exactly one `u64`.
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

impl NoiseDistribution {
    pub fn laplace(mu: f64, sigma: f64) -> Result<Self> {
        Self::Laplace { mu, sigma }.validated()
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Normal { mu, sigma }.validated()
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::TruncatedNormal { mu, sigma, lo, hi }.validated()
    }

    pub fn point_mass(mu: f64) -> Result<Self> {
        Self::PointMass { mu }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            Self::Laplace { .. } => NoiseKind::Laplace,
            Self::Normal { .. } => NoiseKind::Normal,
            Self::TruncatedNormal { .. } => NoiseKind::TruncatedNormal,
            Self::PointMass { .. } => NoiseKind::PointMass,
        }
    }

    /// Location parameter (for truncated laws, the mean of the parent normal).
    pub fn mu(&self) -> f64 {
        match *self {
            Self::Laplace { mu, .. }
            | Self::Normal { mu, .. }
            | Self::TruncatedNormal { mu, .. }
            | Self::PointMass { mu } => mu,
        }
    }

    /// Scale parameter; 0 for a point mass.
    pub fn sigma(&self) -> f64 {
        match *self {
            Self::Laplace { sigma, .. } | Self::Normal { sigma, .. } | Self::TruncatedNormal { sigma, .. } => sigma,
            Self::PointMass { .. } => 0.0,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Self::PointMass { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match *self {
            Self::Laplace { mu, sigma } | Self::Normal { mu, sigma } => {
                if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("{self}: need finite mu and sigma > 0"));
                }
            }
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("{self}: need finite mu and sigma > 0"));
                }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return bad(format!("{self}: need finite bounds lo < hi"));
                }
                if self.truncated_mass() <= 0.0 {
                    return bad(format!("{self}: truncation interval carries no probability mass"));
                }
            }
            Self::PointMass { mu } => {
                if !mu.is_finite() {
                    return bad(format!("{self}: need finite location"));
                }
            }
        }
        Ok(())
    }

    // Standardized bounds and normalizer of a truncated normal.
    fn truncation(&self) -> (f64, f64, f64) {
        match *self {
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let a = (lo - mu) / sigma;
                let b = (hi - mu) / sigma;
                let z = if a >= 0.0 {
                    std_normal_sf(a) - std_normal_sf(b)
                } else if b <= 0.0 {
                    std_normal_cdf(b) - std_normal_cdf(a)
                } else {
                    1.0 - std_normal_cdf(a) - std_normal_sf(b)
                };
                (a, b, z)
            }
            _ => unreachable!("truncation() on untruncated law"),
        }
    }

    fn truncated_mass(&self) -> f64 {
        self.truncation().2
    }

    /// Closed support `(lo, hi)`; infinite for Laplace and Normal, `(mu, mu)` for a point mass.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Laplace { .. } | Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::TruncatedNormal { lo, hi, .. } => (lo, hi),
            Self::PointMass { mu } => (mu, mu),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        lo <= x && x <= hi
    }

    /// Natural log of the density at `x` (log-mass for a point mass).
    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(self.log_pdf_unchecked(x))
    }

    pub(crate) fn log_pdf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Laplace { mu, sigma } => -(x - mu).abs() / sigma - sigma.ln() - LN_2,
            Self::Normal { mu, sigma } => std_normal_ln_pdf((x - mu) / sigma) - sigma.ln(),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                if x < lo || x > hi {
                    f64::NEG_INFINITY
                } else {
                    std_normal_ln_pdf((x - mu) / sigma) - sigma.ln() - self.truncated_mass().ln()
                }
            }
            Self::PointMass { mu } => {
                if x == mu {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Laplace { mu, sigma } => {
                if x < mu {
                    0.5 * ((x - mu) / sigma).exp()
                } else {
                    1.0 - 0.5 * (-(x - mu) / sigma).exp()
                }
            }
            Self::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                if x <= lo {
                    return 0.0;
                }
                if x >= hi {
                    return 1.0;
                }
                let (a, _, z) = self.truncation();
                let t = (x - mu) / sigma;
                let num = if a >= 0.0 {
                    std_normal_sf(a) - std_normal_sf(t)
                } else {
                    std_normal_cdf(t) - std_normal_cdf(a)
                };
                (num / z).clamp(0.0, 1.0)
            }
            Self::PointMass { mu } => {
                if x >= mu {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(X < x)`; differs from [`cdf`](Self::cdf) only at an atom.
    pub fn prob_below(&self, x: f64) -> f64 {
        match *self {
            Self::PointMass { mu } => {
                if mu < x {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(x),
        }
    }

    /// `P(X > x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Laplace { mu, sigma } => {
                if x < mu {
                    1.0 - 0.5 * ((x - mu) / sigma).exp()
                } else {
                    0.5 * (-(x - mu) / sigma).exp()
                }
            }
            Self::Normal { mu, sigma } => std_normal_sf((x - mu) / sigma),
            Self::TruncatedNormal { .. } => 1.0 - self.cdf(x),
            Self::PointMass { mu } => {
                if mu > x {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean of the law (the truncated mean for a truncated normal).
    pub fn mean(&self) -> f64 {
        match *self {
            Self::TruncatedNormal { mu, sigma, .. } => {
                let (a, b, z) = self.truncation();
                let phi = |t: f64| std_normal_ln_pdf(t).exp();
                mu + sigma * (phi(a) - phi(b)) / z
            }
            _ => self.mu(),
        }
    }

    /// The same law translated by `offset` (bounds move with it).
    pub fn shifted(&self, offset: f64) -> Self {
        match *self {
            Self::Laplace { mu, sigma } => Self::Laplace { mu: mu + offset, sigma },
            Self::Normal { mu, sigma } => Self::Normal { mu: mu + offset, sigma },
            Self::TruncatedNormal { mu, sigma, lo, hi } => Self::TruncatedNormal {
                mu: mu + offset,
                sigma,
                lo: lo + offset,
                hi: hi + offset,
            },
            Self::PointMass { mu } => Self::PointMass { mu: mu + offset },
        }
    }

    /// Law of `c - X`.
    pub fn reflected(&self, c: f64) -> Self {
        match *self {
            Self::Laplace { mu, sigma } => Self::Laplace { mu: c - mu, sigma },
            Self::Normal { mu, sigma } => Self::Normal { mu: c - mu, sigma },
            Self::TruncatedNormal { mu, sigma, lo, hi } => Self::TruncatedNormal {
                mu: c - mu,
                sigma,
                lo: c - hi,
                hi: c - lo,
            },
            Self::PointMass { mu } => Self::PointMass { mu: c - mu },
        }
    }

    /// Draws one value. Laplace and truncated normal use the inverse CDF (one
    /// `u64` per draw); the normal uses the ziggurat sampler; a point mass
    /// consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Laplace { mu, sigma } => {
                let u = open_unit(rng) - 0.5;
                mu - sigma * u.signum() * (-2.0 * u.abs()).ln_1p()
            }
            Self::Normal { mu, sigma } => rand_distr::Normal::new(mu, sigma)
                .expect("validated normal")
                .sample(rng),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let (a, b, z) = self.truncation();
                let u = open_unit(rng);
                let t = if a >= 0.0 {
                    // Work in the upper tail to keep precision when the window is far right.
                    std_normal_isf(std_normal_sf(a) - u * z)
                } else {
                    std_normal_quantile(std_normal_cdf(a) + u * z)
                };
                (mu + sigma * t.clamp(a, b)).clamp(lo, hi)
            }
            Self::PointMass { mu } => mu,
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

impl fmt::Display for NoiseDistribution {
    /// Formats in the `kind:params` syntax accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Laplace { mu, sigma } => write!(f, "laplace:{mu},{sigma}"),
            Self::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            Self::TruncatedNormal { mu, sigma, lo, hi } => write!(f, "truncnormal:{mu},{sigma},{lo},{hi}"),
            Self::PointMass { mu } => write!(f, "point:{mu}"),
        }
    }
}

impl FromStr for NoiseDistribution {
    type Err = Error;

    /// Parses `laplace:MU,SIGMA`, `normal:MU,SIGMA`,
    /// `truncnormal:MU,SIGMA,LO,HI` or `point:MU`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("distribution `{s}` is missing `kind:` prefix")))?;
        let args = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("distribution `{s}`: {e}")))?;
        let d = match (kind.trim().to_ascii_lowercase().as_str(), args.as_slice()) {
            ("laplace", &[mu, sigma]) => Self::Laplace { mu, sigma },
            ("normal", &[mu, sigma]) => Self::Normal { mu, sigma },
            ("truncnormal", &[mu, sigma, lo, hi]) => Self::TruncatedNormal { mu, sigma, lo, hi },
            ("point", &[mu]) => Self::PointMass { mu },
            _ => return Err(Error::Config(format!("unrecognized distribution `{s}`"))),
        };
        d.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(d)
    }
}

/// KL divergence with the support-violation outcome made explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDivergence {
    pub value: f64,
    /// Set when `p` puts mass where `q` has none; `value` is then `+inf`.
    pub immediate_detection: bool,
}

impl KlDivergence {
    fn finite(value: f64) -> Self {
        Self {
            value,
            immediate_detection: false,
        }
    }

    fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            immediate_detection: true,
        }
    }
}

/// `KL(p || q)`. Normal/Normal and Laplace/Laplace pairs use closed forms;
/// every other absolutely continuous pair is integrated numerically.
pub fn kl_divergence(p: &NoiseDistribution, q: &NoiseDistribution) -> Result<KlDivergence> {
    use NoiseDistribution::*;
    p.validate()?;
    q.validate()?;
    match (*p, *q) {
        (PointMass { mu: a }, PointMass { mu: b }) => Ok(if a == b {
            KlDivergence::finite(0.0)
        } else {
            KlDivergence::infinite()
        }),
        (PointMass { .. }, _) | (_, PointMass { .. }) => Ok(KlDivergence::infinite()),
        (Normal { mu: m1, sigma: s1 }, Normal { mu: m2, sigma: s2 }) => Ok(KlDivergence::finite(
            ((m1 - m2).powi(2) + s1 * s1 - s2 * s2) / (2.0 * s2 * s2) + (s2 / s1).ln(),
        )),
        (Laplace { mu: m1, sigma: b1 }, Laplace { mu: m2, sigma: b2 }) => {
            let d = (m1 - m2).abs();
            Ok(KlDivergence::finite(
                (b2 / b1).ln() + d / b2 + (b1 / b2) * (-d / b1).exp() - 1.0,
            ))
        }
        _ => kl_divergence_numerical(p, q),
    }
}

/// `KL(p || q)` by adaptive quadrature of `p ln(p/q)` over the support of `p`,
/// to relative tolerance [`KL_REL_TOL`]. Point masses are not supported here.
pub fn kl_divergence_numerical(p: &NoiseDistribution, q: &NoiseDistribution) -> Result<KlDivergence> {
    p.validate()?;
    q.validate()?;
    if p.is_atomic() || q.is_atomic() {
        return Err(Error::Parameter("numerical KL needs two continuous laws".into()));
    }
    let (plo, phi) = p.support();
    let (qlo, qhi) = q.support();
    if plo < qlo || phi > qhi {
        return Ok(KlDivergence::infinite());
    }
    let span = |d: &NoiseDistribution| match d.kind() {
        NoiseKind::Laplace => LAPLACE_SPAN,
        _ => NORMAL_SPAN,
    };
    let lo = plo.max(p.mu() - span(p) * p.sigma());
    let hi = phi.min(p.mu() + span(p) * p.sigma());
    let mut breaks = vec![lo, hi];
    for k in [p.mu(), q.mu()] {
        if k > lo && k < hi {
            breaks.push(k);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let integrand = |x: f64| {
        let lp = p.log_pdf_unchecked(x);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        lp.exp() * (lp - q.log_pdf_unchecked(x))
    };
    let value = quad::integrate_with_breaks(integrand, &breaks, KL_REL_TOL * 1e-2, 1e-15)?;
    // Quadrature noise can leave a tiny negative value for identical laws.
    Ok(KlDivergence::finite(value.max(0.0)))
}

/// `|x - ma| - |x - mt|`, exact outside the interval between the means so a
/// far-away reading cannot exceed `|mt - ma|` through cancellation.
fn laplace_distance_gap(x: f64, mt: f64, ma: f64) -> f64 {
    let gap = mt - ma;
    if x >= mt.max(ma) {
        gap
    } else if x <= mt.min(ma) {
        -gap
    } else {
        ((x - ma).abs() - (x - mt).abs()).clamp(-gap.abs(), gap.abs())
    }
}

/// LLR step for equal-scale Laplace or Normal pairs. Normalizers cancel, and
/// the forms below stay finite for readings whose densities underflow.
fn equal_scale_step(x: f64, p_true: &NoiseDistribution, p_alt: &NoiseDistribution) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    match (*p_true, *p_alt) {
        (NoiseDistribution::Laplace { mu: mt, sigma: st }, NoiseDistribution::Laplace { mu: ma, sigma: sa })
            if st == sa =>
        {
            Some(laplace_distance_gap(x, mt, ma) / st)
        }
        (NoiseDistribution::Normal { mu: mt, sigma: st }, NoiseDistribution::Normal { mu: ma, sigma: sa })
            if st == sa =>
        {
            // ((x - ma)^2 - (x - mt)^2) / 2 sigma^2, factored.
            Some((mt - ma) / st * (((x - mt) + (x - ma)) / (2.0 * st)))
        }
        _ => None,
    }
}

/// Running log-likelihood ratio over a reading stream.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LlrState {
    /// Cumulative `sum ln(p_true(x) / p_alt(x))`; `±inf` after an immediate detection.
    pub cum_llr: f64,
    pub n: u64,
    pub immediate_detection: bool,
}

impl LlrState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds one reading into the ratio of `p_true` (numerator) over `p_alt`.
    ///
    /// A reading outside exactly one support saturates the ratio at `±inf` and
    /// raises the immediate-detection flag. When exactly one law is a point mass,
    /// an atom hit has infinitely more likelihood than any density value.
    pub fn update(&self, x: f64, p_true: &NoiseDistribution, p_alt: &NoiseDistribution) -> Result<Self> {
        p_true.validate()?;
        p_alt.validate()?;
        if let Some(step) = equal_scale_step(x, p_true, p_alt) {
            return self.advance(x, step);
        }
        let lt = p_true.log_pdf_unchecked(x);
        let la = p_alt.log_pdf_unchecked(x);
        if lt == f64::NEG_INFINITY && la == f64::NEG_INFINITY {
            return Err(Error::ImpossibleObservation(x));
        }
        let step = match (p_true.is_atomic(), p_alt.is_atomic()) {
            (true, false) => {
                if lt == 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            (false, true) => {
                if la == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            _ => lt - la,
        };
        self.advance(x, step)
    }

    fn advance(&self, x: f64, step: f64) -> Result<Self> {
        let cum = self.cum_llr + step;
        if cum.is_nan() {
            // +inf from an earlier reading meets -inf now: the sequence fits neither law.
            return Err(Error::ImpossibleObservation(x));
        }
        Ok(Self {
            cum_llr: cum,
            n: self.n + 1,
            immediate_detection: cum.is_infinite(),
        })
    }
}

/// Free-function form of [`LlrState::update`].
pub fn llr_update(state: LlrState, x: f64, p_true: &NoiseDistribution, p_alt: &NoiseDistribution) -> Result<LlrState> {
    state.update(x, p_true, p_alt)
}

/// Logistic map `e^m / (1 + e^m)` from cumulative LLR to confidence.
///
/// Computed so that `confidence_from_llr(m) + confidence_from_llr(-m) == 1` exactly.
pub fn confidence_from_llr(m: f64) -> f64 {
    if m.is_nan() {
        return f64::NAN;
    }
    let t = (-m.abs()).exp();
    let small = t / (1.0 + t);
    if m >= 0.0 {
        1.0 - small
    } else {
        small
    }
}

/// `ln((1 - p) / p)`: the LLR magnitude matching confidence `1 - p`.
pub fn llr_threshold(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    // Composite Simpson on a fixed fine grid; deliberately unrelated to the
    // adaptive Kronrod code used by the library.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn log_pdf_examples() {
        let lap = NoiseDistribution::laplace(0.0, 1.0).unwrap();
        assert!((lap.log_pdf(0.0).unwrap() + LN_2).abs() < 1e-15);
        let nor = NoiseDistribution::normal(0.0, 1.0).unwrap();
        assert!((nor.log_pdf(0.0).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let tn = NoiseDistribution::truncated_normal(0.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(tn.log_pdf(2.0).unwrap(), f64::NEG_INFINITY);
        let pm = NoiseDistribution::point_mass(4.0).unwrap();
        assert_eq!(pm.log_pdf(4.0).unwrap(), 0.0);
        assert_eq!(pm.log_pdf(4.5).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn malformed_parameters_rejected() {
        assert!(matches!(NoiseDistribution::laplace(0.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(NoiseDistribution::normal(0.0, -1.0), Err(Error::Parameter(_))));
        assert!(NoiseDistribution::truncated_normal(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(NoiseDistribution::truncated_normal(0.0, 1.0, 60.0, 61.0).is_err());
        let raw = NoiseDistribution::Normal { mu: 0.0, sigma: 0.0 };
        assert!(raw.log_pdf(0.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in [
            NoiseDistribution::laplace(1.0, 0.7).unwrap(),
            NoiseDistribution::normal(-2.0, 3.0).unwrap(),
            NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap(),
            NoiseDistribution::truncated_normal(0.0, 1.0, 3.0, 5.0).unwrap(),
        ] {
            let (lo, hi) = d.support();
            let (lo, hi) = (lo.max(d.mu() - 60.0 * d.sigma()), hi.min(d.mu() + 60.0 * d.sigma()));
            let mut pts = vec![lo, hi];
            if d.mu() > lo && d.mu() < hi {
                pts.insert(1, d.mu());
            }
            let mass: f64 = pts
                .windows(2)
                .map(|w| simpson(|x| d.pdf(x).unwrap(), w[0], w[1], 200_000))
                .sum();
            assert!((mass - 1.0).abs() < 1e-8, "{d}: {mass}");
        }
    }

    #[test]
    fn truncated_normal_far_tail_is_accurate() {
        let d = NoiseDistribution::truncated_normal(0.0, 1.0, 8.0, 9.0).unwrap();
        let mut r = rng(3);
        for _ in 0..1000 {
            let x = d.sample(&mut r);
            assert!((8.0..=9.0).contains(&x));
        }
        // Most mass sits near the lower bound: P(X < 8.1) = 1 - e^{-0.81} roughly.
        assert!(d.cdf(8.1) > 0.5 && d.cdf(8.1) < 0.6);
    }

    #[test]
    fn point_mass_sampling_is_constant() {
        let d = NoiseDistribution::point_mass(4.0).unwrap();
        let mut r = rng(1);
        assert!((0..100).all(|_| d.sample(&mut r) == 4.0));
    }

    #[test]
    fn truncated_draws_stay_in_support() {
        let d = NoiseDistribution::truncated_normal(0.0, 1.0, 0.0, 3.0).unwrap();
        let mut r = rng(2);
        assert!(d.sample_n(&mut r, 100_000).iter().all(|x| (0.0..=3.0).contains(x)));
    }

    #[test]
    fn normal_moments_large_batch() {
        let d = NoiseDistribution::normal(10.0, 2.0).unwrap();
        let xs = d.sample_n(&mut rng(42), 1_000_000);
        assert!((stats::mean(&xs) - 10.0).abs() < 0.01);
        assert!((stats::sample_std(&xs) - 2.0).abs() < 0.01);
    }

    // Independent oracle samplers: Box-Muller normals, rejection for the
    // truncated law, and a difference of exponentials for Laplace.
    fn oracle_normal(r: &mut ChaCha8Rng, mu: f64, sigma: f64) -> f64 {
        let u1: f64 = 1.0 - r.random::<f64>();
        let u2: f64 = r.random::<f64>();
        mu + sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    fn oracle_sample(d: &NoiseDistribution, r: &mut ChaCha8Rng) -> f64 {
        match *d {
            NoiseDistribution::Normal { mu, sigma } => oracle_normal(r, mu, sigma),
            NoiseDistribution::Laplace { mu, sigma } => {
                let e1 = -(1.0 - r.random::<f64>()).ln();
                let e2 = -(1.0 - r.random::<f64>()).ln();
                mu + sigma * (e1 - e2)
            }
            NoiseDistribution::TruncatedNormal { mu, sigma, lo, hi } => loop {
                let x = oracle_normal(r, mu, sigma);
                if (lo..=hi).contains(&x) {
                    break x;
                }
            },
            NoiseDistribution::PointMass { mu } => mu,
        }
    }

    #[test]
    fn samplers_agree_with_oracle_ks() {
        let n = 50_000;
        for (i, d) in [
            NoiseDistribution::laplace(3.0, 2.0).unwrap(),
            NoiseDistribution::normal(-1.0, 0.5).unwrap(),
            NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap(),
            NoiseDistribution::truncated_normal(0.0, 1.0, 0.5, 2.5).unwrap(),
            NoiseDistribution::truncated_normal(0.0, 1.0, -3.0, -1.0).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let impl_draws = d.sample_n(&mut rng(100 + i as u64), n);
            let mut orng = rng(900 + i as u64);
            let oracle: Vec<f64> = (0..n).map(|_| oracle_sample(d, &mut orng)).collect();
            let ks = stats::ks_two_sample(&impl_draws, &oracle);
            assert!(ks < stats::ks_critical_1pct(n, n), "{d}: KS {ks}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap();
        assert_eq!(d.sample_n(&mut rng(5), 64), d.sample_n(&mut rng(5), 64));
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        let d = NoiseDistribution::truncated_normal(24.0, 2.0, 0.0, 30.0).unwrap();
        let oracle = simpson(|x| x * d.pdf(x).unwrap(), 0.0, 30.0, 400_000);
        assert!((d.mean() - oracle).abs() < 1e-9, "{} vs {oracle}", d.mean());
        let d = NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap();
        let oracle = simpson(|x| x * d.pdf(x).unwrap(), 0.0, 4.0, 100_000);
        assert!((d.mean() - oracle).abs() < 1e-10);
    }

    #[test]
    fn kl_examples() {
        let n01 = NoiseDistribution::normal(0.0, 1.0).unwrap();
        let n11 = NoiseDistribution::normal(1.0, 1.0).unwrap();
        assert_eq!(kl_divergence(&n01, &n01).unwrap().value, 0.0);
        assert!((kl_divergence(&n01, &n11).unwrap().value - 0.5).abs() < 1e-15);

        let l1 = NoiseDistribution::laplace(1.0, 1.0).unwrap();
        let l0 = NoiseDistribution::laplace(0.0, 1.0).unwrap();
        let closed = kl_divergence(&l1, &l0).unwrap().value;
        // Independent oracle: Simpson on p ln(p/q), split at both kinks.
        let f = |x: f64| {
            let lp = l1.log_pdf(x).unwrap();
            lp.exp() * (lp - l0.log_pdf(x).unwrap())
        };
        let oracle = simpson(&f, -60.0, 0.0, 200_000) + simpson(&f, 0.0, 1.0, 20_000) + simpson(&f, 1.0, 61.0, 200_000);
        assert!((oracle - 0.367_879_441_171_442_3).abs() < 1e-9);
        assert!((closed - oracle).abs() < 1e-9);
    }

    #[test]
    fn kl_truncated_against_simpson() {
        let p = NoiseDistribution::truncated_normal(2.0, 0.5, 0.0, 4.0).unwrap();
        let q = NoiseDistribution::truncated_normal(2.5, 0.7, -1.0, 5.0).unwrap();
        let kl = kl_divergence(&p, &q).unwrap();
        let oracle = simpson(
            |x| {
                let lp = p.log_pdf(x).unwrap();
                lp.exp() * (lp - q.log_pdf(x).unwrap())
            },
            0.0,
            4.0,
            200_000,
        );
        assert!(!kl.immediate_detection);
        assert!(((kl.value - oracle) / oracle).abs() < 1e-8, "{} vs {oracle}", kl.value);
    }

    #[test]
    fn kl_support_violation_is_flagged() {
        let tn = NoiseDistribution::truncated_normal(0.0, 1.0, 0.0, 1.0).unwrap();
        let n = NoiseDistribution::normal(0.0, 1.0).unwrap();
        let kl = kl_divergence(&n, &tn).unwrap();
        assert!(kl.immediate_detection && kl.value == f64::INFINITY);
        // The other direction is finite.
        let back = kl_divergence(&tn, &n).unwrap();
        assert!(!back.immediate_detection && back.value.is_finite() && back.value > 0.0);
        let pm = NoiseDistribution::point_mass(0.0).unwrap();
        assert!(kl_divergence(&pm, &n).unwrap().immediate_detection);
        assert!(
            kl_divergence(&pm, &NoiseDistribution::point_mass(1.0).unwrap())
                .unwrap()
                .immediate_detection
        );
        assert_eq!(kl_divergence(&pm, &pm).unwrap().value, 0.0);
    }

    #[test]
    fn llr_examples() {
        let t = NoiseDistribution::laplace(5.0, 1.0).unwrap();
        let a = NoiseDistribution::laplace(4.0, 1.0).unwrap();
        let s = LlrState::new().update(5.0, &t, &a).unwrap();
        assert!((s.cum_llr - 1.0).abs() < 1e-15 && s.n == 1);
        let s = llr_update(LlrState::new(), 4.5, &t, &a).unwrap();
        assert_eq!(s.cum_llr, 0.0);

        let alt = NoiseDistribution::truncated_normal(0.0, 1.0, 0.0, 1.0).unwrap();
        let tru = NoiseDistribution::normal(0.0, 1.0).unwrap();
        let s = LlrState::new().update(2.0, &tru, &alt).unwrap();
        assert_eq!(s.cum_llr, f64::INFINITY);
        assert!(s.immediate_detection);
        // Symmetric case.
        let s = LlrState::new().update(2.0, &alt, &tru).unwrap();
        assert_eq!(s.cum_llr, f64::NEG_INFINITY);
        assert!(s.immediate_detection);
    }

    #[test]
    fn llr_impossible_observation() {
        let a = NoiseDistribution::truncated_normal(0.0, 1.0, 0.0, 1.0).unwrap();
        let b = NoiseDistribution::truncated_normal(0.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(
            LlrState::new().update(5.0, &a, &b),
            Err(Error::ImpossibleObservation(5.0))
        );
        // Saturated at +inf, then a reading only the alternative explains.
        let s = LlrState::new().update(0.2, &a, &b).unwrap();
        assert_eq!(s.cum_llr, f64::INFINITY);
        assert!(matches!(s.update(1.5, &a, &b), Err(Error::ImpossibleObservation(_))));
    }

    #[test]
    fn llr_atom_against_density() {
        let pm = NoiseDistribution::point_mass(3.0).unwrap();
        let n = NoiseDistribution::normal(3.0, 1.0).unwrap();
        assert_eq!(LlrState::new().update(3.0, &pm, &n).unwrap().cum_llr, f64::INFINITY);
        assert_eq!(LlrState::new().update(2.0, &pm, &n).unwrap().cum_llr, f64::NEG_INFINITY);
        assert_eq!(LlrState::new().update(3.0, &n, &pm).unwrap().cum_llr, f64::NEG_INFINITY);
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence_from_llr(0.0), 0.5);
        assert!((confidence_from_llr(19f64.ln()) - 0.95).abs() < 1e-15);
        assert_eq!(confidence_from_llr(f64::INFINITY), 1.0);
        assert_eq!(confidence_from_llr(f64::NEG_INFINITY), 0.0);
        assert!((llr_threshold(0.05) - 19f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["laplace:0,1", "normal:20,2", "truncnormal:2,0.5,0,4", "point:4"] {
            let d: NoiseDistribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("normal:1".parse::<NoiseDistribution>().is_err());
        assert!("gamma:1,2".parse::<NoiseDistribution>().is_err());
        assert!("normal:0,-1".parse::<NoiseDistribution>().is_err());
    }

    #[test]
    fn mean_llr_tracks_kl() {
        let p = NoiseDistribution::laplace(0.0, 2.0).unwrap();
        let q = NoiseDistribution::laplace(-1.0, 2.0).unwrap();
        let kl = kl_divergence(&p, &q).unwrap().value;
        let mut r = rng(77);
        let n = 200;
        let per_trial: Vec<f64> = (0..2000)
            .map(|_| {
                let mut s = LlrState::new();
                for _ in 0..n {
                    s = s.update(p.sample(&mut r), &p, &q).unwrap();
                }
                s.cum_llr / n as f64
            })
            .collect();
        let m = stats::mean(&per_trial);
        assert!((m - kl).abs() < 3.0 * stats::standard_error(&per_trial), "{m} vs {kl}");
    }

    fn continuous_pair() -> impl Strategy<Value = (NoiseDistribution, NoiseDistribution)> {
        (-5.0..5.0f64, 0.2..4.0f64, -5.0..5.0f64, 0.2..4.0f64, 0..3u8).prop_map(|(m1, s1, m2, s2, k)| match k {
            0 => (
                NoiseDistribution::Normal { mu: m1, sigma: s1 },
                NoiseDistribution::Normal { mu: m2, sigma: s2 },
            ),
            1 => (
                NoiseDistribution::Laplace { mu: m1, sigma: s1 },
                NoiseDistribution::Laplace { mu: m2, sigma: s1 },
            ),
            _ => (
                NoiseDistribution::Laplace { mu: m1, sigma: s1 },
                NoiseDistribution::Laplace { mu: m2, sigma: s2 },
            ),
        })
    }

    #[test]
    fn llr_finite_for_far_readings() {
        let lap = |m| NoiseDistribution::laplace(m, 0.1).unwrap();
        let s = LlrState::new().update(f64::MAX / 4.0, &lap(1.0), &lap(0.0)).unwrap();
        assert_eq!(s.cum_llr, 10.0);
        let nor = |m| NoiseDistribution::normal(m, 0.5).unwrap();
        let s = LlrState::new().update(-1e200, &nor(1.0), &nor(0.0)).unwrap();
        assert!(s.cum_llr.is_finite() && s.cum_llr < 0.0 && !s.immediate_detection);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn closed_form_kl_matches_quadrature((p, q) in continuous_pair()) {
            let closed = kl_divergence(&p, &q).unwrap().value;
            let numeric = kl_divergence_numerical(&p, &q).unwrap().value;
            prop_assert!(closed >= 0.0);
            prop_assert!((closed - numeric).abs() <= 1e-6 * closed.max(1e-9), "{} vs {}", closed, numeric);
        }

        #[test]
        fn kl_zero_iff_identical((p, q) in continuous_pair()) {
            prop_assert_eq!(kl_divergence(&p, &p).unwrap().value, 0.0);
            if p != q {
                prop_assert!(kl_divergence(&p, &q).unwrap().value > 0.0);
            }
        }

        #[test]
        fn laplace_llr_never_exceeds_cap(
            xs in proptest::collection::vec(-1e6..1e6f64, 1..200),
            mu in -10.0..10.0f64, delta in -5.0..5.0f64, sigma in 0.1..5.0f64,
        ) {
            let t = NoiseDistribution::Laplace { mu, sigma };
            let a = NoiseDistribution::Laplace { mu: mu + delta, sigma };
            let mut s = LlrState::new();
            for x in xs {
                s = s.update(x, &t, &a).unwrap();
                prop_assert!(s.cum_llr.abs() <= s.n as f64 * delta.abs() / sigma + 1e-9);
            }
        }

        #[test]
        fn confidence_symmetric_and_monotone(m in -800.0..800.0f64, d in 0.0..10.0f64) {
            prop_assert_eq!(confidence_from_llr(m) + confidence_from_llr(-m), 1.0);
            prop_assert!(confidence_from_llr(m + d) >= confidence_from_llr(m));
            let c = confidence_from_llr(m);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
