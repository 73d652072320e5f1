//! Closed-form expectations used as ground truth for Monte Carlo, and the
//! Monte Carlo driver itself.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::levy_measure::LevyMeasureSpec;
use crate::linalg;
use crate::polynomial::Polynomial;
use crate::process_sim::{ComponentJumps, SeedSpec};

pub const PROD_EXP_FORMULA: &str = "exp(t * int f dnu)";
pub const DISCOUNTED_FORMULA: &str = "(1 - exp(-alpha t)) / alpha * int f dnu";
pub const STATIONARY_FORMULA: &str = "A S + S A^T + B diag(rate E[J^2]) B^T + C C^T = 0";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub formula: String,
    /// Hex digest of the oracle inputs.
    pub digest: String,
}

/// First 16 hex digits of sha256 over `text`.
pub fn digest_of(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn jump_polynomial(f: &Polynomial) -> Result<()> {
    f.univariate_terms()?;
    f.ensure_jump_polynomial(u32::MAX)
}

/// `E[∏_{s≤t}(1 + f(ΔL_s))] = e^{t ∫ f dν}`.
pub fn prod_exp_expectation(spec: &LevyMeasureSpec, f: &Polynomial, t: f64) -> Result<OracleResult> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "must be finite and nonnegative"));
    }
    jump_polynomial(f)?;
    let integral = spec.polynomial_jump_integral(f)?;
    let value = (t * integral).exp();
    if !value.is_finite() {
        return Err(Error::NonFinite("prod_exp oracle"));
    }
    Ok(OracleResult {
        value,
        formula: PROD_EXP_FORMULA.into(),
        digest: digest_of(&format!("prod_exp|{spec:?}|{f:?}|{t:e}")),
    })
}

/// `E[Σ_{s≤t} e^{-α(t-s)} f(ΔL_s)] = ((1 - e^{-αt})/α) ∫ f dν`.
pub fn discounted_jump_sum_expectation(spec: &LevyMeasureSpec, f: &Polynomial, alpha: f64, t: f64) -> Result<OracleResult> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "must be finite and nonnegative"));
    }
    jump_polynomial(f)?;
    let integral = spec.polynomial_jump_integral(f)?;
    let value = -(-alpha * t).exp_m1() / alpha * integral;
    Ok(OracleResult {
        value,
        formula: DISCOUNTED_FORMULA.into(),
        digest: digest_of(&format!("discounted|{spec:?}|{f:?}|{alpha:e}|{t:e}")),
    })
}

/// `∏_{s≤t}(1 + f(ΔL_s))` over one sampled path.
pub fn product_functional(jumps: &ComponentJumps, f: &Polynomial, t: f64) -> f64 {
    jumps
        .times
        .iter()
        .zip(&jumps.sizes)
        .take_while(|(s, _)| **s <= t)
        .map(|(_, x)| 1.0 + f.eval(&[*x]))
        .product()
}

/// `Σ_{s≤t} e^{-α(t-s)} f(ΔL_s)` over one sampled path.
pub fn discounted_functional(jumps: &ComponentJumps, f: &Polynomial, alpha: f64, t: f64) -> f64 {
    jumps
        .times
        .iter()
        .zip(&jumps.sizes)
        .take_while(|(s, _)| **s <= t)
        .map(|(s, x)| (-alpha * (t - s)).exp() * f.eval(&[*x]))
        .sum()
}

fn check_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 || !abscissa.is_finite() {
        return Err(Error::Unstable { abscissa });
    }
    Ok(())
}

fn check_loadings(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, specs: &[LevyMeasureSpec]) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.nrows() != n || b.ncols() != specs.len() {
        return Err(Error::DimensionMismatch {
            context: "stationary moments",
            expected: format!("A {n}x{n}, B {n}x{}, C {n}xk", specs.len()),
            got: format!("A {:?}, B {:?}, C {:?}", a.shape(), b.shape(), c.shape()),
        });
    }
    Ok(())
}

/// Stationary mean `-A^{-1} B m₁` with `m₁ = (rateᵢ E[Jᵢ])`.
pub fn stationary_mean(a: &DMatrix<f64>, b: &DMatrix<f64>, specs: &[LevyMeasureSpec]) -> Result<DVector<f64>> {
    check_hurwitz(a)?;
    let c = DMatrix::zeros(a.nrows(), 0);
    check_loadings(a, b, &c, specs)?;
    let m1 = specs.iter().map(|s| s.first_moment()).collect::<Result<Vec<_>>>()?;
    let rhs = -(b * DVector::from_vec(m1));
    a.clone().lu().solve(&rhs).ok_or(Error::Singular("stationary mean"))
}

/// Stationary covariance about the mean, solving
/// `AΣ + ΣAᵀ + B M Bᵀ + C Cᵀ = 0` with `M = diag(rateᵢ E[Jᵢ²])`.
pub fn stationary_covariance(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    specs: &[LevyMeasureSpec],
) -> Result<DMatrix<f64>> {
    check_hurwitz(a)?;
    check_loadings(a, b, c, specs)?;
    let m2 = specs.iter().map(|s| s.second_moment()).collect::<Result<Vec<_>>>()?;
    let q = b * DMatrix::from_diagonal(&DVector::from_vec(m2)) * b.transpose() + c * c.transpose();
    linalg::solve_lyapunov(a, &q).map(|s| linalg::symmetrize(&s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Sample mean and `sd/√n`, summed in index order.
pub fn summarize(values: &[f64]) -> McEstimate {
    let n = values.len();
    if n > 0 && values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return McEstimate { mean: values[0], se: 0.0, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n as f64 - 1.0) / n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate { mean, se, n }
}

/// Runs `functional` on replications `0..n_paths` of `master` (each gets
/// `SeedSpec::new(master, i, "")` and derives its streams from it) and
/// reduces the results in replication order, so the estimate does not
/// depend on the thread count.
pub fn mc_estimate<F>(n_paths: usize, master: u64, functional: F) -> Result<McEstimate>
where
    F: Fn(&SeedSpec) -> Result<f64> + Sync,
{
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least two replications"));
    }
    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| functional(&SeedSpec::new(master, i, "")))
        .collect::<Result<_>>()?;
    Ok(summarize(&values))
}

/// Vector-valued version of [`mc_estimate`]; every replication must
/// return the same number of coordinates.
pub fn mc_estimate_many<F>(n_paths: usize, master: u64, functional: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&SeedSpec) -> Result<Vec<f64>> + Sync,
{
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least two replications"));
    }
    let rows: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| functional(&SeedSpec::new(master, i, "")))
        .collect::<Result<_>>()?;
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(invalid("functional", "replications returned different lengths"));
    }
    Ok((0..width)
        .map(|j| summarize(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect())
}
