#![allow(dead_code)]

use hylevy::linalg;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random `n × n` matrix shifted so its spectral abscissa is at most `-margin`.
pub fn random_hurwitz<R: Rng>(rng: &mut R, n: usize, margin: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
    let shift = linalg::spectral_abscissa(&m) + margin + rng.random_range(0.0..1.0);
    m - DMatrix::identity(n, n) * shift
}

/// Classical Runge–Kutta for `x' = A x` with `steps` equal steps.
pub fn rk4(a: &DMatrix<f64>, x: &DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
    let h = t / steps as f64;
    let mut y = x.clone();
    for _ in 0..steps {
        let k1 = a * &y;
        let k2 = a * (&y + &k1 * (h / 2.0));
        let k3 = a * (&y + &k2 * (h / 2.0));
        let k4 = a * (&y + &k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
