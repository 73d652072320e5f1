//! Quadratic Lyapunov certificates `(P, α)` with `PA + AᵀP ⪯ -αP`, `P ⪰ I`,
//! and parametric families `P(θ)` whose minimum over the parameter box is
//! attained at the reset point `θ₀`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::linear_sde::SystemMatrices;

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub p: DMatrix<f64>,
    pub alpha: f64,
    /// `λ_max(PA + AᵀP + αP)`.
    pub residual: f64,
}

/// `λ_max(PA + AᵀP + αP)`.
pub fn certificate_residual(p: &DMatrix<f64>, alpha: f64, a: &DMatrix<f64>) -> f64 {
    linalg::sym_max_eigenvalue(&(p * a + a.transpose() * p + p * alpha))
}

/// Solves `P₀A + AᵀP₀ = -I`, takes `α = 1/λ_max(P₀)` and rescales to
/// `P = P₀/λ_min(P₀)` so that `P ⪰ I`.
pub fn certify(a: &DMatrix<f64>) -> Result<Certificate> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "certify",
            expected: "square matrix".into(),
            got: format!("{:?}", a.shape()),
        });
    }
    if !linalg::all_finite(a) {
        return Err(Error::NonFinite("certify input"));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(Error::Unstable { abscissa });
    }
    let n = a.nrows();
    let p0 = linalg::solve_lyapunov(&a.transpose(), &DMatrix::identity(n, n)).map_err(|_| Error::Unstable { abscissa })?;
    let (lo, hi) = linalg::sym_eigen_extremes(&p0);
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::Unstable { abscissa });
    }
    let alpha = 1.0 / hi;
    let p = linalg::symmetrize(&(p0 / lo));
    let residual = certificate_residual(&p, alpha, a);
    Ok(Certificate { p, alpha, residual })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub valid: bool,
    pub residual: f64,
    pub min_eigenvalue: f64,
}

/// Checks `λ_max(PA + AᵀP + αP) ≤ tol` and `λ_min(P) ≥ 1 - tol`.
pub fn verify_certificate(p: &DMatrix<f64>, alpha: f64, a: &DMatrix<f64>, tol: f64) -> CertificateCheck {
    let residual = certificate_residual(p, alpha, a);
    let min_eigenvalue = linalg::sym_min_eigenvalue(p);
    CertificateCheck {
        valid: residual <= tol && min_eigenvalue >= 1.0 - tol,
        residual,
        min_eigenvalue,
    }
}

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// `θ ↦ (A(θ), B(θ), C(θ))` on an axis-aligned box `D₀` with base point `θ₀`.
#[derive(Clone)]
pub struct ParametricFamily {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub theta0: Vec<f64>,
    /// Verification grid density per θ-dimension.
    pub grid_points: usize,
    a: MatrixFn,
    b: MatrixFn,
    c: MatrixFn,
}

impl fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("theta0", &self.theta0)
            .field("grid_points", &self.grid_points)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_GRID_POINTS: usize = 11;

impl ParametricFamily {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, theta0: Vec<f64>, a: MatrixFn, b: MatrixFn, c: MatrixFn) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || theta0.len() != lower.len() {
            return Err(invalid("box", "lower, upper and theta0 must share a positive dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
            return Err(invalid("box", "need finite lower <= upper in every coordinate"));
        }
        let fam = Self { lower, upper, theta0, grid_points: DEFAULT_GRID_POINTS, a, b, c };
        if !fam.contains(&fam.theta0) {
            return Err(invalid("theta0", "base point must lie in the box"));
        }
        fam.system_at(&fam.theta0)?;
        Ok(fam)
    }

    pub fn with_grid_points(mut self, points: usize) -> Self {
        self.grid_points = points.max(1);
        self
    }

    /// `A(θ) = -θ` on `[lower, upper]` (scalar state, scalar parameter).
    pub fn scalar_decay(lower: f64, upper: f64, theta0: f64, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        Self::new(
            vec![lower],
            vec![upper],
            vec![theta0],
            Arc::new(|th: &[f64]| DMatrix::from_element(1, 1, -th[0])),
            constant(b),
            constant(c),
        )
    }

    /// Companion form with characteristic polynomial
    /// `s^n + θ₁ s^{n-1} + … + θ_n`.
    pub fn companion(lower: Vec<f64>, upper: Vec<f64>, theta0: Vec<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = lower.len();
        Self::new(
            lower,
            upper,
            theta0,
            Arc::new(move |th: &[f64]| {
                let mut a = DMatrix::zeros(n, n);
                for i in 0..n.saturating_sub(1) {
                    a[(i, i + 1)] = 1.0;
                }
                for j in 0..n {
                    a[(n - 1, j)] = -th[n - 1 - j];
                }
                a
            }),
            constant(b),
            constant(c),
        )
    }

    /// `A(θ) = A₀ + Σ θ_i A_i`.
    pub fn affine(
        a0: DMatrix<f64>,
        directions: Vec<DMatrix<f64>>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        theta0: Vec<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        if directions.len() != lower.len() {
            return Err(invalid("directions", "one direction matrix per parameter"));
        }
        if directions.iter().any(|d| d.shape() != a0.shape()) {
            return Err(invalid("directions", "direction matrices must match A0"));
        }
        Self::new(
            lower,
            upper,
            theta0,
            Arc::new(move |th: &[f64]| {
                directions
                    .iter()
                    .zip(th)
                    .fold(a0.clone(), |acc, (d, t)| acc + d * *t)
            }),
            constant(b),
            constant(c),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| l <= t && t <= u)
    }

    /// Euclidean projection onto the box.
    pub fn project(&self, theta: &mut [f64]) {
        for (t, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*l, *u);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn a_at(&self, theta: &[f64]) -> DMatrix<f64> {
        (self.a)(theta)
    }

    pub fn system_at(&self, theta: &[f64]) -> Result<SystemMatrices> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "θ",
                expected: self.dim().to_string(),
                got: theta.len().to_string(),
            });
        }
        SystemMatrices::new((self.a)(theta), (self.b)(theta), (self.c)(theta))
    }

    /// Uniform tensor grid over the box, `grid_points` per coordinate
    /// (a degenerate coordinate contributes a single point).
    pub fn verification_grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                if l == u || self.grid_points == 1 {
                    vec![l]
                } else {
                    let m = self.grid_points - 1;
                    (0..=m).map(|k| if k == m { u } else { l + (u - l) * k as f64 / m as f64 }).collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

fn constant(m: DMatrix<f64>) -> MatrixFn {
    Arc::new(move |_: &[f64]| m.clone())
}

/// Per-grid-point verification summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub points: usize,
    pub min_alpha: f64,
    /// `min_θ λ_min(P(θ) - P(θ₀))`.
    pub min_ordering_gap: f64,
    pub max_residual: f64,
}

/// Evaluator `θ ↦ P(θ) = s(θ) P̂(θ)` with
/// `s(θ) = max(1, λ_max(P̂^{-1/2} P(θ₀) P̂^{-1/2}))`, which guarantees
/// `P(θ) ⪰ P(θ₀) ⪰ I` at every θ, and the uniform decay rate over the grid.
#[derive(Debug, Clone)]
pub struct ParametricCertificate {
    family: ParametricFamily,
    p0: DMatrix<f64>,
    alpha: f64,
    summary: GridSummary,
}

impl ParametricCertificate {
    pub fn family(&self) -> &ParametricFamily {
        &self.family
    }

    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }

    /// Uniform α over the verification grid.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn summary(&self) -> &GridSummary {
        &self.summary
    }

    fn base_at(&self, theta: &[f64]) -> Result<Certificate> {
        certify(&self.family.a_at(theta))
    }

    fn scale_for(&self, p_hat: &DMatrix<f64>) -> f64 {
        let r = linalg::sym_inv_sqrt(p_hat);
        linalg::sym_max_eigenvalue(&(&r * &self.p0 * &r)).max(1.0)
    }

    /// `s(θ)`; exactly 1 at `θ₀`.
    pub fn scale_at(&self, theta: &[f64]) -> Result<f64> {
        if theta == self.family.theta0.as_slice() {
            return Ok(1.0);
        }
        Ok(self.scale_for(&self.base_at(theta)?.p))
    }

    /// `P(θ)` with its pointwise decay rate.
    pub fn certificate_at(&self, theta: &[f64]) -> Result<Certificate> {
        if theta == self.family.theta0.as_slice() {
            let a = self.family.a_at(theta);
            let base = certify(&a)?;
            return Ok(Certificate { p: self.p0.clone(), ..base });
        }
        let base = self.base_at(theta)?;
        let s = self.scale_for(&base.p);
        let p = base.p * s;
        let residual = certificate_residual(&p, base.alpha, &self.family.a_at(theta));
        Ok(Certificate { p, alpha: base.alpha, residual })
    }

    pub fn p_at(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        if theta == self.family.theta0.as_slice() {
            return Ok(self.p0.clone());
        }
        self.certificate_at(theta).map(|c| c.p)
    }
}

/// Builds the `P(θ)` evaluator and checks stability, ordering and the α
/// floor on the family's verification grid.
pub fn parametric_certificate(family: &ParametricFamily, alpha_floor: f64) -> Result<ParametricCertificate> {
    if !(alpha_floor.is_finite() && alpha_floor > 0.0) {
        return Err(invalid("alpha_floor", "must be positive"));
    }
    let base0 = certify(&family.a_at(&family.theta0))?;
    let mut cert = ParametricCertificate {
        family: family.clone(),
        p0: base0.p.clone(),
        alpha: base0.alpha,
        summary: GridSummary {
            points: 0,
            min_alpha: base0.alpha,
            min_ordering_gap: 0.0,
            max_residual: base0.residual,
        },
    };
    let mut summary = cert.summary.clone();
    for theta in family.verification_grid() {
        let c = cert.certificate_at(&theta)?;
        summary.points += 1;
        summary.min_alpha = summary.min_alpha.min(c.alpha);
        summary.max_residual = summary.max_residual.max(c.residual);
        summary.min_ordering_gap = summary.min_ordering_gap.min(linalg::sym_min_eigenvalue(&(&c.p - &cert.p0)));
    }
    if summary.min_alpha < alpha_floor {
        return Err(Error::AlphaFloor { alpha: summary.min_alpha, floor: alpha_floor });
    }
    cert.alpha = summary.min_alpha;
    cert.summary = summary;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_identity() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let c = certify(&a).unwrap();
        assert!((c.p.clone() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        assert!((c.alpha - 2.0).abs() < 1e-14);
        assert!(c.residual <= 1e-12);
    }

    #[test]
    fn unstable_scalar() {
        let a = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(certify(&a), Err(Error::Unstable { .. })));
    }

    #[test]
    fn verify_examples() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!(verify_certificate(&eye, 2.0, &(-&eye), 1e-10).valid);
        let bad = verify_certificate(&eye, 3.0, &(-&eye), 1e-10);
        assert!(!bad.valid);
        assert!((bad.residual - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_up_preserves_validity() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let c = certify(&a).unwrap();
        for s in [1.0, 1.5, 10.0] {
            assert!(verify_certificate(&(&c.p * s), c.alpha, &a, 1e-8).valid);
        }
    }

    #[test]
    fn constant_family_is_flat() {
        let fam = ParametricFamily::affine(
            -DMatrix::<f64>::identity(2, 2),
            vec![DMatrix::zeros(2, 2)],
            vec![0.0],
            vec![1.0],
            vec![0.5],
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let cert = parametric_certificate(&fam, 1e-3).unwrap();
        for th in fam.verification_grid() {
            assert!((cert.p_at(&th).unwrap() - cert.p0()).amax() < 1e-12);
            assert!((cert.scale_at(&th).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(cert.scale_at(&[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn alpha_floor_violation() {
        let fam = ParametricFamily::scalar_decay(0.01, 1.0, 1.0, DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(parametric_certificate(&fam, 0.5), Err(Error::AlphaFloor { .. })));
    }

    #[test]
    fn unstable_grid_point() {
        let fam = ParametricFamily::scalar_decay(-1.0, 1.0, 1.0, DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(parametric_certificate(&fam, 1e-3), Err(Error::Unstable { .. })));
    }

    #[test]
    fn companion_layout() {
        let fam = ParametricFamily::companion(vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0 / 2.0, 1.0], DMatrix::identity(2, 2), DMatrix::zeros(2, 1))
            .unwrap();
        let a = fam.a_at(&[3.0, 2.0]);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]));
        assert_eq!(fam.verification_grid().len(), 121);
    }
}
