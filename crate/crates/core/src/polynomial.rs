//! Sparse multivariate polynomials over jump sizes.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};

/// A polynomial in `vars` variables stored as multi-index → coefficient.
///
/// Zero coefficients are dropped on construction, so `terms()` only yields
/// monomials that actually contribute.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(vars: usize) -> Self {
        Self {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn new<I>(vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(vars);
        for (idx, c) in terms {
            if idx.len() != vars {
                return Err(invalid(
                    "polynomial",
                    format!("multi-index {idx:?} does not have {vars} entries"),
                ));
            }
            if !c.is_finite() {
                return Err(invalid("polynomial", format!("coefficient of {idx:?} is not finite")));
            }
            p.add_term(idx, c);
        }
        Ok(p)
    }

    /// `Σ c_k x^k` from `(k, c_k)` pairs.
    pub fn univariate(terms: &[(u32, f64)]) -> Result<Self> {
        Self::new(1, terms.iter().map(|&(k, c)| (vec![k], c)))
    }

    /// Single-variable monomial `c · x_i^k`.
    pub fn monomial(vars: usize, var: usize, power: u32, coeff: f64) -> Self {
        let mut idx = vec![0; vars];
        idx[var] = power;
        let mut p = Self::zero(vars);
        p.add_term(idx, coeff);
        p
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    fn add_term(&mut self, idx: Vec<u32>, c: f64) {
        let sum = self.terms.get(&idx).copied().unwrap_or(0.0) + c;
        if sum == 0.0 {
            self.terms.remove(&idx);
        } else {
            self.terms.insert(idx, sum);
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn coefficient(&self, idx: &[u32]) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|k| k.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&vec![0; self.vars])
    }

    /// Checks that every exponent sum lies in `1..=bound`: no constant term,
    /// degree at most `bound`.
    pub fn ensure_jump_polynomial(&self, bound: u32) -> Result<()> {
        if self.constant_term() != 0.0 {
            return Err(invalid("polynomial", "constant term must be zero so that f(0) = 0"));
        }
        if self.degree() > bound {
            return Err(invalid(
                "polynomial",
                format!("degree {} exceeds bound {bound}", self.degree()),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.vars);
        self.terms
            .iter()
            .map(|(idx, c)| {
                c * idx
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.vars);
        for (k, &c) in &self.terms {
            p.add_term(k.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut p = self.clone();
        for (k, &c) in &other.terms {
            p.add_term(k.clone(), c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.vars, other.vars);
        let mut p = Self::zero(self.vars);
        for (ka, &ca) in &self.terms {
            for (kb, &cb) in &other.terms {
                let idx = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                p.add_term(idx, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.vars, 1.0), |acc, _| acc.mul(self))
    }

    /// Same monomials with absolute-valued coefficients.
    pub fn abs(&self) -> Self {
        Self {
            vars: self.vars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.abs())).collect(),
        }
    }

    /// `(power, coefficient)` pairs of a univariate polynomial.
    pub fn univariate_terms(&self) -> Result<Vec<(u32, f64)>> {
        if self.vars != 1 {
            return Err(invalid("polynomial", "expected a polynomial in one variable"));
        }
        Ok(self.terms.iter().map(|(k, &c)| (k[0], c)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_degree() {
        let p = Polynomial::new(2, [(vec![1, 0], 2.0), (vec![1, 1], -1.0), (vec![0, 3], 0.5)]).unwrap();
        assert_eq!(p.degree(), 3);
        assert_eq!(p.eval(&[2.0, 1.0]), 4.0 - 2.0 + 0.5);
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = Polynomial::univariate(&[(2, 1.0)]).unwrap();
        let q = p.add(&p.scale(-1.0));
        assert_eq!(q.terms().count(), 0);
    }

    #[test]
    fn binomial_square() {
        let p = Polynomial::univariate(&[(0, 1.0), (1, 1.0)]).unwrap();
        let sq = p.pow(2);
        assert_eq!(sq.coefficient(&[1]), 2.0);
        assert_eq!(sq.coefficient(&[2]), 1.0);
        assert_eq!(sq.constant_term(), 1.0);
    }

    #[test]
    fn rejects_constant_term() {
        let p = Polynomial::univariate(&[(0, 1.0), (2, 1.0)]).unwrap();
        assert!(p.ensure_jump_polynomial(4).is_err());
        let p = Polynomial::univariate(&[(5, 1.0)]).unwrap();
        assert!(p.ensure_jump_polynomial(4).is_err());
    }
}
