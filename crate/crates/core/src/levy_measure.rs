//! Finite-activity Lévy measures: compound-Poisson rates with a jump law,
//! their moment functionals, and ε-truncation of continuous (possibly
//! infinite-activity) Lévy densities down to compound-Poisson form.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use crate::polynomial::Polynomial;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{self, Estimate};

/// Tolerance on the total weight of an atom list.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Law of a single jump size.
#[derive(Clone)]
pub enum JumpLaw {
    /// Discrete `(location, weight)` pairs.
    Atoms(Vec<(f64, f64)>),
    /// Mean-zero normal.
    Normal { variance: f64 },
    /// `±magnitude` with probability one half each.
    TwoPoint { magnitude: f64 },
    /// Symmetric Cauchy; no absolute moment of order ≥ 1 exists.
    Cauchy { scale: f64 },
    /// Uniform resampling from an explicit list of jump sizes.
    Empirical(Vec<f64>),
    /// Normalized restriction of a Lévy density to `|x| > ε`.
    Truncated(Arc<TruncatedLaw>),
}

impl fmt::Debug for JumpLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Atoms(a) => f.debug_tuple("Atoms").field(a).finish(),
            Self::Normal { variance } => f.debug_struct("Normal").field("variance", variance).finish(),
            Self::TwoPoint { magnitude } => f.debug_struct("TwoPoint").field("magnitude", magnitude).finish(),
            Self::Cauchy { scale } => f.debug_struct("Cauchy").field("scale", scale).finish(),
            Self::Empirical(s) => f.debug_struct("Empirical").field("len", &s.len()).finish(),
            Self::Truncated(t) => f
                .debug_struct("Truncated")
                .field("density", &t.density)
                .field("epsilon", &t.epsilon)
                .finish(),
        }
    }
}

/// A continuous Lévy density `ν(dx) = density(x) dx` on `ℝ \ {0}`.
#[derive(Clone)]
pub enum LevyDensity {
    /// `height` on `0 < |x| ≤ radius`.
    Uniform { height: f64, radius: f64 },
    /// `scale · |x|^{-1-index}` on `0 < |x| ≤ radius`; infinite activity.
    PowerLaw { scale: f64, index: f64, radius: f64 },
    /// `scale · e^{-decay |x|} · |x|^{-1-index}` on `ℝ \ {0}`.
    TemperedStable { scale: f64, index: f64, decay: f64 },
    /// Caller-supplied density with support in `|x| ≤ radius` (may be ∞).
    Custom {
        name: String,
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        radius: f64,
    },
}

impl fmt::Debug for LevyDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { height, radius } => write!(f, "Uniform {{ height: {height}, radius: {radius} }}"),
            Self::PowerLaw { scale, index, radius } => {
                write!(f, "PowerLaw {{ scale: {scale}, index: {index}, radius: {radius} }}")
            }
            Self::TemperedStable { scale, index, decay } => {
                write!(f, "TemperedStable {{ scale: {scale}, index: {index}, decay: {decay} }}")
            }
            Self::Custom { name, radius, .. } => write!(f, "Custom {{ name: {name:?}, radius: {radius} }}"),
        }
    }
}

impl LevyDensity {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            Self::Uniform { height, radius } => {
                pos("height", height)?;
                pos("radius", radius)
            }
            Self::PowerLaw { scale, index, radius } => {
                pos("scale", scale)?;
                pos("index", index)?;
                pos("radius", radius)
            }
            Self::TemperedStable { scale, index, decay } => {
                pos("scale", scale)?;
                pos("index", index)?;
                pos("decay", decay)
            }
            Self::Custom { radius, .. } => {
                if radius > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("radius", "custom density needs a positive support radius"))
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let a = x.abs();
        if a == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { height, radius } => {
                if a <= radius {
                    height
                } else {
                    0.0
                }
            }
            Self::PowerLaw { scale, index, radius } => {
                if a <= radius {
                    scale * a.powf(-1.0 - index)
                } else {
                    0.0
                }
            }
            Self::TemperedStable { scale, index, decay } => scale * (-decay * a).exp() * a.powf(-1.0 - index),
            Self::Custom { ref density, radius, .. } => {
                if a <= radius {
                    density(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Support radius (`f64::INFINITY` for unbounded support).
    pub fn radius(&self) -> f64 {
        match *self {
            Self::Uniform { radius, .. } | Self::PowerLaw { radius, .. } | Self::Custom { radius, .. } => radius,
            Self::TemperedStable { .. } => f64::INFINITY,
        }
    }

    /// `∫_{|x|>ε} g(x) ν(dx)`.
    pub fn tail_integral<G: Fn(f64) -> f64>(&self, epsilon: f64, g: G) -> Result<Estimate> {
        let radius = self.radius();
        if epsilon >= radius {
            return Ok(Estimate::exact(0.0));
        }
        let tol = quadrature::ABS_TOL / 4.0;
        let mut total = Estimate::exact(0.0);
        for side in [1.0, -1.0] {
            let w = |y: f64| {
                let x = side * y.exp();
                g(x) * self.density(x) * y.exp()
            };
            let split = if radius.is_finite() { radius } else { (2.0 * epsilon).max(1.0) };
            let near = quadrature::integrate(w, epsilon.ln(), split.ln(), tol, quadrature::REL_TOL)?;
            total.value += near.value;
            total.abs_error += near.abs_error;
            if !radius.is_finite() {
                let far = quadrature::integrate_to_infinity(
                    |x| g(side * x) * self.density(side * x),
                    split,
                    tol,
                    quadrature::REL_TOL,
                )?;
                total.value += far.value;
                total.abs_error += far.abs_error;
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy)]
enum Coordinate {
    /// `x = side · e^z`
    Log,
    /// `x = side · (split + z / (1 - z))`
    Mapped { split: f64 },
}

#[derive(Debug, Clone)]
struct CdfPanel {
    side: f64,
    coord: Coordinate,
    lo: f64,
    hi: f64,
    mass: f64,
    cum_end: f64,
}

/// Jump law obtained by restricting a density to `|x| > ε` and normalizing.
/// Sampling inverts a tabulated CDF panel by panel, with each panel solved
/// to near machine precision by a safeguarded Newton iteration.
pub struct TruncatedLaw {
    density: LevyDensity,
    epsilon: f64,
    mass: f64,
    panels: Vec<CdfPanel>,
}

const LOG_PANELS: usize = 64;
const MAPPED_PANELS: usize = 16;

impl TruncatedLaw {
    fn build(density: LevyDensity, epsilon: f64) -> Result<Self> {
        let radius = density.radius();
        let mut panels = Vec::new();
        let mut cum = 0.0;
        if epsilon < radius {
            let split = if radius.is_finite() { radius } else { (2.0 * epsilon).max(1.0) };
            for side in [-1.0, 1.0] {
                let (a, b) = (epsilon.ln(), split.ln());
                for k in 0..LOG_PANELS {
                    let lo = a + (b - a) * k as f64 / LOG_PANELS as f64;
                    let hi = a + (b - a) * (k + 1) as f64 / LOG_PANELS as f64;
                    let mut p = CdfPanel { side, coord: Coordinate::Log, lo, hi, mass: 0.0, cum_end: 0.0 };
                    p.mass = quadrature::integrate(|z| panel_weight(&density, &p, z), lo, hi, 1e-14, 1e-13)
                        .map_err(|_| Error::NonIntegrableTail { epsilon })?
                        .value;
                    cum += p.mass;
                    p.cum_end = cum;
                    panels.push(p);
                }
                if !radius.is_finite() {
                    for k in 0..MAPPED_PANELS {
                        let lo = k as f64 / MAPPED_PANELS as f64;
                        let hi = (k + 1) as f64 / MAPPED_PANELS as f64;
                        let mut p = CdfPanel { side, coord: Coordinate::Mapped { split }, lo, hi, mass: 0.0, cum_end: 0.0 };
                        p.mass = quadrature::integrate(|z| panel_weight(&density, &p, z), lo, hi, 1e-14, 1e-13)
                            .map_err(|_| Error::NonIntegrableTail { epsilon })?
                            .value;
                        cum += p.mass;
                        p.cum_end = cum;
                        panels.push(p);
                    }
                }
            }
        }
        if !cum.is_finite() {
            return Err(Error::NonIntegrableTail { epsilon });
        }
        Ok(Self { density, epsilon, mass: cum, panels })
    }

    pub fn density(&self) -> &LevyDensity {
        &self.density
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `∫_{|x|>ε} ν(dx)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.mass;
        let idx = self
            .panels
            .partition_point(|p| p.cum_end <= target)
            .min(self.panels.len() - 1);
        let p = &self.panels[idx];
        let r = (target - (p.cum_end - p.mass)).clamp(0.0, p.mass);
        let z = invert_panel(&self.density, p, r);
        panel_to_x(p, z)
    }
}

fn panel_to_x(p: &CdfPanel, z: f64) -> f64 {
    match p.coord {
        Coordinate::Log => p.side * z.exp(),
        Coordinate::Mapped { split } => p.side * (split + z / (1.0 - z)),
    }
}

fn panel_weight(density: &LevyDensity, p: &CdfPanel, z: f64) -> f64 {
    match p.coord {
        Coordinate::Log => density.density(p.side * z.exp()) * z.exp(),
        Coordinate::Mapped { split } => {
            let s = 1.0 - z;
            density.density(p.side * (split + z / s)) / (s * s)
        }
    }
}

fn invert_panel(density: &LevyDensity, p: &CdfPanel, r: f64) -> f64 {
    if p.mass <= 0.0 {
        return 0.5 * (p.lo + p.hi);
    }
    let w = |z: f64| panel_weight(density, p, z);
    let (mut lo, mut hi) = (p.lo, p.hi);
    let mut z = p.lo + (p.hi - p.lo) * (r / p.mass);
    for _ in 0..100 {
        let f = quadrature::gk15(&w, p.lo, z).0 - r;
        if f.abs() <= 1e-15 * p.mass.max(1e-300) {
            break;
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let d = w(z);
        let newton = z - f / d;
        z = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Atoms(atoms) => {
                let mut total = 0.0;
                for &(loc, w) in atoms {
                    if !loc.is_finite() || !w.is_finite() || w < 0.0 {
                        return Err(invalid("atoms", format!("bad atom ({loc}, {w})")));
                    }
                    if loc == 0.0 && w > 0.0 {
                        return Err(invalid("atoms", "atom at 0 is not a jump"));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(invalid("atoms", format!("weights sum to {total}, expected 1")));
                }
                Ok(())
            }
            Self::Normal { variance } if !(variance.is_finite() && *variance > 0.0) => {
                Err(invalid("variance", format!("must be positive, got {variance}")))
            }
            Self::TwoPoint { magnitude } if !(magnitude.is_finite() && *magnitude > 0.0) => {
                Err(invalid("magnitude", format!("must be positive, got {magnitude}")))
            }
            Self::Cauchy { scale } if !(scale.is_finite() && *scale > 0.0) => {
                Err(invalid("scale", format!("must be positive, got {scale}")))
            }
            Self::Empirical(s) => {
                if s.is_empty() {
                    return Err(invalid("samples", "empirical law needs at least one sample"));
                }
                if s.iter().any(|v| !v.is_finite() || *v == 0.0) {
                    return Err(invalid("samples", "samples must be finite and non-zero"));
                }
                Ok(())
            }
            Self::Truncated(t) if t.mass <= 0.0 => Err(invalid("truncated", "no mass beyond the truncation level")),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Atoms(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(loc, w) in atoms {
                    acc += w;
                    if u < acc {
                        return loc;
                    }
                }
                atoms.iter().rev().find(|(_, w)| *w > 0.0).map_or(0.0, |a| a.0)
            }
            Self::Normal { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            Self::TwoPoint { magnitude } => {
                if rng.random::<bool>() {
                    *magnitude
                } else {
                    -magnitude
                }
            }
            Self::Cauchy { scale } => {
                let u: f64 = rng.random();
                scale * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            Self::Empirical(s) => s[rng.random_range(0..s.len())],
            Self::Truncated(t) => t.sample(rng),
        }
    }

    /// `E[|J|^q]`.
    pub fn abs_moment(&self, q: u32) -> Result<Estimate> {
        let qf = q as f64;
        match self {
            Self::Atoms(atoms) => Ok(Estimate::exact(atoms.iter().map(|&(x, w)| w * x.abs().powi(q as i32)).sum())),
            Self::Normal { variance } => Ok(Estimate::exact(variance.powf(qf / 2.0) * std_normal_abs_moment(q))),
            Self::TwoPoint { magnitude } => Ok(Estimate::exact(magnitude.powi(q as i32))),
            Self::Cauchy { .. } => {
                if q == 0 {
                    Ok(Estimate::exact(1.0))
                } else {
                    Err(Error::DivergentMoment { order: q })
                }
            }
            Self::Empirical(s) => {
                Ok(Estimate::exact(s.iter().map(|x| x.abs().powi(q as i32)).sum::<f64>() / s.len() as f64))
            }
            Self::Truncated(t) => {
                let est = t
                    .density
                    .tail_integral(t.epsilon, |x| x.abs().powi(q as i32))
                    .map_err(|_| Error::DivergentMoment { order: q })?;
                Ok(Estimate { value: est.value / t.mass, abs_error: est.abs_error / t.mass })
            }
        }
    }

    /// `E[J^k]` (signed).
    pub fn raw_moment(&self, k: u32) -> Result<Estimate> {
        if k == 0 {
            return Ok(Estimate::exact(1.0));
        }
        match self {
            Self::Atoms(atoms) => Ok(Estimate::exact(atoms.iter().map(|&(x, w)| w * x.powi(k as i32)).sum())),
            Self::Normal { variance } => Ok(Estimate::exact(if k % 2 == 1 {
                0.0
            } else {
                variance.powi(k as i32 / 2) * std_normal_abs_moment(k)
            })),
            Self::TwoPoint { magnitude } => Ok(Estimate::exact(if k % 2 == 1 { 0.0 } else { magnitude.powi(k as i32) })),
            Self::Cauchy { .. } => Err(Error::DivergentIntegral { degree: k }),
            Self::Empirical(s) => Ok(Estimate::exact(s.iter().map(|x| x.powi(k as i32)).sum::<f64>() / s.len() as f64)),
            Self::Truncated(t) => {
                let est = t
                    .density
                    .tail_integral(t.epsilon, |x| x.powi(k as i32))
                    .map_err(|_| Error::DivergentIntegral { degree: k })?;
                Ok(Estimate { value: est.value / t.mass, abs_error: est.abs_error / t.mass })
            }
        }
    }
}

/// `E|Z|^q` for `Z ~ N(0, 1)`.
pub fn std_normal_abs_moment(q: u32) -> f64 {
    if q.is_multiple_of(2) {
        // (q - 1)!!
        (1..q).step_by(2).map(|j| j as f64).product()
    } else {
        // sqrt(2/π) · 2^{(q-1)/2} · ((q-1)/2)!
        let m = (q - 1) / 2;
        let fact: f64 = (1..=m).map(|j| j as f64).product();
        (2.0 / std::f64::consts::PI).sqrt() * 2f64.powi(m as i32) * fact
    }
}

/// A finite-activity Lévy measure `ν = rate · law`.
#[derive(Debug, Clone)]
pub struct LevyMeasureSpec {
    rate: f64,
    law: JumpLaw,
}

/// Outcome of [`moment_condition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentCheck {
    pub satisfied: bool,
    pub failing_order: Option<u32>,
}

impl LevyMeasureSpec {
    pub fn new(rate: f64, law: JumpLaw) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid("rate", format!("must be finite and nonnegative, got {rate}")));
        }
        if rate > 0.0 {
            law.validate()?;
        }
        Ok(Self { rate, law })
    }

    /// The zero measure (no jumps).
    pub fn zero() -> Self {
        Self { rate: 0.0, law: JumpLaw::Atoms(Vec::new()) }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    /// `(density, ε)` when this measure came from [`truncate`].
    pub fn source(&self) -> Option<(&LevyDensity, f64)> {
        match &self.law {
            JumpLaw::Truncated(t) => Some((&t.density, t.epsilon)),
            _ => None,
        }
    }

    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.law.sample(rng)
    }

    /// `m_q = rate · E|J|^q` together with its quadrature error bound.
    pub fn absolute_moment_estimate(&self, q: u32) -> Result<Estimate> {
        if q == 0 {
            return Err(invalid("q", "moment order must be at least 1"));
        }
        if self.rate == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let m = self.law.abs_moment(q)?;
        Ok(Estimate { value: self.rate * m.value, abs_error: self.rate * m.abs_error })
    }

    pub fn absolute_moment(&self, q: u32) -> Result<f64> {
        self.absolute_moment_estimate(q).map(|e| e.value)
    }

    /// `∫ f dν = rate · E[f(J)]` for a univariate polynomial with `f(0) = 0`.
    pub fn polynomial_jump_integral(&self, f: &Polynomial) -> Result<f64> {
        let terms = f.univariate_terms()?;
        f.ensure_jump_polynomial(u32::MAX)?;
        if self.rate == 0.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (k, c) in terms {
            total += c * self.law.raw_moment(k)?.value;
        }
        Ok(self.rate * total)
    }

    /// Second moment `rate · E[J²]`, the per-unit-time jump variance.
    pub fn second_moment(&self) -> Result<f64> {
        if self.rate == 0.0 {
            return Ok(0.0);
        }
        Ok(self.rate * self.law.raw_moment(2)?.value)
    }

    /// `rate · E[J]`.
    pub fn first_moment(&self) -> Result<f64> {
        if self.rate == 0.0 {
            return Ok(0.0);
        }
        Ok(self.rate * self.law.raw_moment(1)?.value)
    }
}

pub fn absolute_moment(spec: &LevyMeasureSpec, q: u32) -> Result<f64> {
    spec.absolute_moment(q)
}

pub fn polynomial_jump_integral(spec: &LevyMeasureSpec, f: &Polynomial) -> Result<f64> {
    spec.polynomial_jump_integral(f)
}

/// Restricts `density` to `|x| > ε`: rate `λ^ε = ∫_{|x|>ε} ν(dx)`, jump law
/// the normalized restriction. An ε beyond the support yields the zero
/// measure.
pub fn truncate(density: &LevyDensity, epsilon: f64) -> Result<LevyMeasureSpec> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    density.validate()?;
    let mass = density
        .tail_integral(epsilon, |_| 1.0)
        .map_err(|_| Error::NonIntegrableTail { epsilon })?;
    if !mass.value.is_finite() {
        return Err(Error::NonIntegrableTail { epsilon });
    }
    if mass.value <= 0.0 {
        return Ok(LevyMeasureSpec::zero());
    }
    let law = TruncatedLaw::build(density.clone(), epsilon)?;
    let rate = law.mass;
    Ok(LevyMeasureSpec { rate, law: JumpLaw::Truncated(Arc::new(law)) })
}

/// `true` iff `m_q < ∞` for every `1 ≤ q ≤ order`.
pub fn moment_condition_check(spec: &LevyMeasureSpec, order: u32) -> MomentCheck {
    for q in 1..=order {
        match spec.absolute_moment(q) {
            Ok(v) if v.is_finite() => {}
            _ => {
                return MomentCheck { satisfied: false, failing_order: Some(q) };
            }
        }
    }
    MomentCheck { satisfied: true, failing_order: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pm_one(rate: f64) -> LevyMeasureSpec {
        LevyMeasureSpec::new(rate, JumpLaw::Atoms(vec![(1.0, 0.5), (-1.0, 0.5)])).unwrap()
    }

    #[test]
    fn atom_moment() {
        assert_eq!(absolute_moment(&pm_one(2.0), 3).unwrap(), 2.0);
    }

    #[test]
    fn zero_rate_moment() {
        let spec = LevyMeasureSpec::new(0.0, JumpLaw::Cauchy { scale: 1.0 }).unwrap();
        assert_eq!(absolute_moment(&spec, 2).unwrap(), 0.0);
        assert!(moment_condition_check(&spec, 100).satisfied);
    }

    #[test]
    fn normal_second_moment_matches_monte_carlo() {
        let spec = LevyMeasureSpec::new(1.0, JumpLaw::Normal { variance: 1.0 }).unwrap();
        assert!((absolute_moment(&spec, 2).unwrap() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| spec.sample_jump(&mut rng).powi(2)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn normal_abs_moments_closed_form() {
        assert!((std_normal_abs_moment(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(std_normal_abs_moment(4), 3.0);
        assert_eq!(std_normal_abs_moment(6), 15.0);
        // E|Z|^3 = 2 sqrt(2/π), checked against quadrature of the density
        let q = crate::quadrature::integrate_to_infinity(
            |x| 2.0 * x.powi(3) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            0.0,
            1e-13,
            0.0,
        )
        .unwrap();
        assert!((std_normal_abs_moment(3) - q.value).abs() < 1e-11);
    }

    #[test]
    fn polynomial_integrals() {
        let x2 = Polynomial::univariate(&[(2, 1.0)]).unwrap();
        assert_eq!(polynomial_jump_integral(&pm_one(1.0), &x2).unwrap(), 1.0);
        let x1 = Polynomial::univariate(&[(1, 1.0)]).unwrap();
        let sym = LevyMeasureSpec::new(3.7, JumpLaw::TwoPoint { magnitude: 0.3 }).unwrap();
        assert_eq!(polynomial_jump_integral(&sym, &x1).unwrap(), 0.0);
        let normal = LevyMeasureSpec::new(2.0, JumpLaw::Normal { variance: 1.0 }).unwrap();
        let f = Polynomial::univariate(&[(2, 1.0), (4, 1.0)]).unwrap();
        assert!((polynomial_jump_integral(&normal, &f).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_integral_rejects_constant() {
        let f = Polynomial::univariate(&[(0, 1.0), (2, 1.0)]).unwrap();
        assert!(polynomial_jump_integral(&pm_one(1.0), &f).is_err());
    }

    #[test]
    fn cauchy_fails_first_order() {
        let spec = LevyMeasureSpec::new(1.0, JumpLaw::Cauchy { scale: 1.0 }).unwrap();
        let check = moment_condition_check(&spec, 1);
        assert!(!check.satisfied);
        assert_eq!(check.failing_order, Some(1));
        assert_eq!(absolute_moment(&spec, 1), Err(Error::DivergentMoment { order: 1 }));
    }

    #[test]
    fn normal_passes_order_eight() {
        let spec = LevyMeasureSpec::new(1.0, JumpLaw::Normal { variance: 2.0 }).unwrap();
        assert!(moment_condition_check(&spec, 8).satisfied);
    }

    #[test]
    fn atom_validation() {
        assert!(LevyMeasureSpec::new(1.0, JumpLaw::Atoms(vec![(1.0, 0.5)])).is_err());
        assert!(LevyMeasureSpec::new(1.0, JumpLaw::Atoms(vec![(0.0, 1.0)])).is_err());
        assert!(LevyMeasureSpec::new(-1.0, JumpLaw::Normal { variance: 1.0 }).is_err());
    }

    #[test]
    fn truncate_uniform_density() {
        let nu = LevyDensity::Uniform { height: 1.0, radius: 1.0 };
        let half = truncate(&nu, 0.5).unwrap();
        assert!((half.rate() - 1.0).abs() < 1e-10);
        let tenth = truncate(&nu, 0.1).unwrap();
        assert!((tenth.rate() - 1.8).abs() < 1e-10);
        assert_eq!(half.source().unwrap().1, 0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| half.sample_jump(&mut rng)).collect();
        assert!(xs.iter().all(|x| (0.5..=1.0).contains(&x.abs())));
        // uniform on [0.5, 1] in |x|: mean |x| = 0.75, P(x > 0) = 1/2
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        assert!((mean_abs - 0.75).abs() < 3.0 * (0.25f64.powi(2) / 3.0 / n as f64).sqrt());
        let pos = xs.iter().filter(|x| **x > 0.0).count() as f64 / n as f64;
        assert!((pos - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn truncate_beyond_support_is_zero() {
        let nu = LevyDensity::Uniform { height: 1.0, radius: 1.0 };
        let spec = truncate(&nu, 2.0).unwrap();
        assert_eq!(spec.rate(), 0.0);
    }

    #[test]
    fn truncated_moments_match_analytic() {
        // ν = |x|^{-5/2} on 0<|x|≤1: ∫_{|x|>ε} x² ν = 2 (1 - ε^{1/2}) / (1/2)
        let nu = LevyDensity::PowerLaw { scale: 1.0, index: 1.5, radius: 1.0 };
        let eps = 0.01;
        let spec = truncate(&nu, eps).unwrap();
        let exact_rate = 2.0 * (eps.powf(-1.5) - 1.0) / 1.5;
        assert!((spec.rate() - exact_rate).abs() < 1e-9 * exact_rate);
        let x2 = Polynomial::univariate(&[(2, 1.0)]).unwrap();
        let exact = 4.0 * (1.0 - eps.sqrt());
        assert!((polynomial_jump_integral(&spec, &x2).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn tempered_stable_has_all_moments() {
        let nu = LevyDensity::TemperedStable { scale: 1.0, index: 0.5, decay: 2.0 };
        let spec = truncate(&nu, 0.05).unwrap();
        assert!(moment_condition_check(&spec, 6).satisfied);
        // E|J|² against a direct quadrature of x² e^{-2x} x^{-3/2} on (0.05, ∞), both sides
        let direct = crate::quadrature::integrate_to_infinity(|x| 2.0 * x * x * (-2.0 * x).exp() * x.powf(-1.5), 0.05, 1e-12, 0.0)
            .unwrap();
        assert!((spec.absolute_moment(2).unwrap() - direct.value).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50_000;
        let m2 = (0..n).map(|_| spec.sample_jump(&mut rng).powi(2)).sum::<f64>() / n as f64;
        let exact = spec.absolute_moment(2).unwrap() / spec.rate();
        assert!((m2 - exact).abs() < 0.05 * exact);
    }

    #[test]
    fn heavy_custom_tail_diverges() {
        let nu = LevyDensity::Custom {
            name: "cauchy-like".into(),
            density: Arc::new(|x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x))),
            radius: f64::INFINITY,
        };
        let spec = truncate(&nu, 0.1).unwrap();
        let check = moment_condition_check(&spec, 2);
        assert_eq!(check.failing_order, Some(1));
    }
}
