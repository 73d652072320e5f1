//! Fixtures shared by the kernel benchmarks.

use hylevy::{JumpLaw, LevyMeasureSpec, NoiseSpec, ParametricFamily, SystemMatrices};
use nalgebra::DMatrix;

/// Deterministic stable `n × n` matrix: diagonal -2, couplings of size
/// at most 0.6, so Gershgorin discs stay in the left half-plane.
pub fn stable_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match (i as i64 - j as i64).abs() {
        0 => -2.0 - 0.1 * i as f64,
        1 if i < j => 0.4,
        1 => -0.2,
        _ => 0.0,
    })
}

/// `n`-dimensional system with one jump component per coordinate and a
/// single Wiener column.
pub fn system(n: usize) -> SystemMatrices {
    let c = DMatrix::from_fn(n, 1, |i, _| 0.1 * (i + 1) as f64);
    SystemMatrices::new(stable_matrix(n), DMatrix::identity(n, n), c).expect("fixture dimensions")
}

pub fn noise(n: usize, wiener: bool) -> NoiseSpec {
    let jumps = (0..n)
        .map(|i| {
            let law = if i % 2 == 0 { JumpLaw::Normal { variance: 1.0 } } else { JumpLaw::TwoPoint { magnitude: 0.5 } };
            LevyMeasureSpec::new(1.0, law).expect("fixture law")
        })
        .collect();
    NoiseSpec::new(jumps, wiener)
}

/// Companion family over a `[1, 2] × [2, 3]` box.
pub fn companion_family(grid_points: usize) -> ParametricFamily {
    ParametricFamily::companion(
        vec![1.0, 2.0],
        vec![2.0, 3.0],
        vec![1.5, 2.5],
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::zeros(2, 1),
    )
    .expect("fixture family")
    .with_grid_points(grid_points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_stable() {
        for n in 1..=8 {
            assert!(hylevy::linalg::is_hurwitz(&stable_matrix(n)));
        }
        assert!(hylevy::parametric_certificate(&companion_family(11), 1e-6).is_ok());
    }
}
