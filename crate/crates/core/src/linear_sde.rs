//! Exact event-driven simulation of `dX = A X dt + B dL + C dW`.
//!
//! Between events the state follows the exact Gaussian transition: mean
//! `e^{AΔ} x`, covariance `G(Δ) = ∫_0^Δ e^{As} C Cᵀ e^{Aᵀs} ds`. Both come
//! from one exponential of the block matrix `[[-A, CCᵀ], [0, Aᵀ]] Δ`.
//! Jumps are applied atomically as `x + B ΔL`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::levy_measure::LevyMeasureSpec;
use crate::linalg::{self, expm};
use crate::process_sim::{self, Event, EventKind, JumpPath, SeedSpec};

/// Stream label of the state Wiener noise.
pub const WIENER_STREAM: &str = "wiener";

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// Drift matrix, `n × n`.
    pub a: DMatrix<f64>,
    /// Jump loading, `n × l`.
    pub b: DMatrix<f64>,
    /// Wiener loading, `n × k`.
    pub c: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::DimensionMismatch {
                context: "A",
                expected: "non-empty square matrix".into(),
                got: format!("{:?}", a.shape()),
            });
        }
        for (name, m) in [("B", &b), ("C", &c)] {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch {
                    context: if name == "B" { "B rows" } else { "C rows" },
                    expected: n.to_string(),
                    got: m.nrows().to_string(),
                });
            }
        }
        if !(linalg::all_finite(&a) && linalg::all_finite(&b) && linalg::all_finite(&c)) {
            return Err(Error::NonFinite("system matrices"));
        }
        Ok(Self { a, b, c })
    }

    /// Scalar system `dX = a X dt + b dL + c dW`.
    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
            c: DMatrix::from_element(1, 1, c),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn l(&self) -> usize {
        self.b.ncols()
    }

    pub fn k(&self) -> usize {
        self.c.ncols()
    }
}

/// Driving noise: one Lévy measure per jump component, an on/off switch
/// for the Wiener term, and an optional deterministic drift `b` of `L`
/// (entering as the affine forcing `B b`).
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub jumps: Vec<LevyMeasureSpec>,
    pub wiener: bool,
    pub drift: Option<DVector<f64>>,
}

impl NoiseSpec {
    pub fn new(jumps: Vec<LevyMeasureSpec>, wiener: bool) -> Self {
        Self { jumps, wiener, drift: None }
    }

    /// No jumps on `l` components, no Wiener term.
    pub fn silent(l: usize) -> Self {
        Self::new(vec![LevyMeasureSpec::zero(); l], false)
    }

    pub fn check_against(&self, system: &SystemMatrices) -> Result<()> {
        if self.jumps.len() != system.l() {
            return Err(Error::DimensionMismatch {
                context: "jump components vs columns of B",
                expected: system.l().to_string(),
                got: self.jumps.len().to_string(),
            });
        }
        if let Some(d) = &self.drift {
            if d.len() != system.l() {
                return Err(Error::DimensionMismatch {
                    context: "Lévy drift",
                    expected: system.l().to_string(),
                    got: d.len().to_string(),
                });
            }
        }
        Ok(())
    }
}

/// `e^{AΔ}` and the Gramian `G(Δ)` by the augmented-matrix exponential.
pub fn transition_and_gramian(a: &DMatrix<f64>, c: &DMatrix<f64>, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(c * c.transpose() * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = expm(&m)?;
    let f22 = e.view((n, n), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let phi = f22.transpose();
    let gram = linalg::symmetrize(&(&phi * f12));
    Ok((phi, gram))
}

/// `∫_0^Δ e^{As} u ds` via `exp([[A, u], [0, 0]] Δ)`.
pub fn forcing_integral(a: &DMatrix<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    m.view_mut((0, n), (n, 1)).copy_from(&(u * dt));
    let e = expm(&m)?;
    Ok(e.view((0, n), (n, 1)).column(0).into_owned())
}

/// Precomputed exact transition over a fixed step.
#[derive(Debug, Clone)]
pub struct Transition {
    pub dt: f64,
    pub phi: DMatrix<f64>,
    pub offset: Option<DVector<f64>>,
    /// `L` with `L Lᵀ = G(Δ)`; `None` when there is no diffusion.
    pub noise_factor: Option<DMatrix<f64>>,
}

impl Transition {
    pub fn new(a: &DMatrix<f64>, c: Option<&DMatrix<f64>>, dt: f64, forcing: Option<&DVector<f64>>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("step must be positive, got {dt}")));
        }
        let diffusive = c.filter(|c| c.ncols() > 0 && c.iter().any(|v| *v != 0.0));
        let (phi, noise_factor) = match diffusive {
            Some(c) => {
                let (phi, g) = transition_and_gramian(a, c, dt)?;
                (phi, Some(linalg::psd_factor(&g)))
            }
            None => (expm(&(a * dt))?, None),
        };
        let offset = match forcing {
            Some(u) if u.iter().any(|v| *v != 0.0) => Some(forcing_integral(a, u, dt)?),
            _ => None,
        };
        Ok(Self { dt, phi, offset, noise_factor })
    }

    pub fn apply<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mut y = &self.phi * x;
        if let Some(o) = &self.offset {
            y += o;
        }
        if let Some(l) = &self.noise_factor {
            let z = DVector::from_fn(l.ncols(), |_, _| StandardNormal.sample(rng));
            y += l * z;
        }
        y
    }
}

/// Transitions of one system keyed by step length.
#[derive(Debug)]
pub struct TransitionCache<'a> {
    a: &'a DMatrix<f64>,
    c: Option<&'a DMatrix<f64>>,
    forcing: Option<DVector<f64>>,
    cache: HashMap<u64, Transition>,
}

const CACHE_LIMIT: usize = 256;

impl<'a> TransitionCache<'a> {
    pub fn new(a: &'a DMatrix<f64>, c: Option<&'a DMatrix<f64>>, forcing: Option<DVector<f64>>) -> Self {
        Self { a, c, forcing, cache: HashMap::new() }
    }

    pub fn get(&mut self, dt: f64) -> Result<&Transition> {
        let key = dt.to_bits();
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= CACHE_LIMIT {
                self.cache.clear();
            }
            let t = Transition::new(self.a, self.c, dt, self.forcing.as_ref())?;
            self.cache.insert(key, t);
        }
        Ok(&self.cache[&key])
    }
}

/// One draw from the exact transition over `dt` (deterministic when `C = 0`).
pub fn propagate_exact<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    x: &DVector<f64>,
    dt: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(Transition::new(a, Some(c), dt, None)?.apply(x, rng))
}

/// `x + B ΔL`.
pub fn apply_jump(x: &DVector<f64>, b: &DMatrix<f64>, dl: &DVector<f64>) -> DVector<f64> {
    x + b * dl
}

/// Adds `B e_i · size` in place (a single-component jump).
pub fn apply_component_jump(x: &mut DVector<f64>, b: &DMatrix<f64>, component: usize, size: f64) {
    x.axpy(size, &b.column(component), 1.0);
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Left limit `X_{t-}`.
    pub before: DVector<f64>,
    pub after: DVector<f64>,
}

/// Grid samples plus left/right states at every jump and reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub horizon: f64,
    pub x0: DVector<f64>,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().unwrap_or(&self.x0)
    }

    pub fn jump_events(&self) -> impl Iterator<Item = &TrajectoryEvent> {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Jump { .. }))
    }

    pub fn reset_events(&self) -> impl Iterator<Item = &TrajectoryEvent> {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Reset))
    }
}

pub(crate) fn check_state(x: &DVector<f64>, context: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

fn check_grid(grid: &[f64]) -> Result<f64> {
    process_sim::validate_grid(grid)?;
    if grid[0] < 0.0 {
        return Err(invalid("grid", "time points must be nonnegative"));
    }
    Ok(*grid.last().expect("validated non-empty"))
}

/// Integrates along a merged timeline. Grid samples are recorded, jumps
/// of component `i` add `B e_i ΔL`, and resets (when `reset_target` is
/// set) replace the state.
pub(crate) fn integrate_timeline(
    system: &SystemMatrices,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    horizon: f64,
    timeline: &[Event],
    reset_target: Option<&DVector<f64>>,
    seed: &SeedSpec,
) -> Result<Trajectory> {
    let forcing = noise.drift.as_ref().map(|b| &system.b * b);
    let c = noise.wiener.then_some(&system.c);
    let mut cache = TransitionCache::new(&system.a, c, forcing);
    let mut rng = seed.with_stream(WIENER_STREAM).rng();
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut traj = Trajectory {
        horizon,
        x0: x0.clone(),
        times: Vec::new(),
        states: Vec::new(),
        events: Vec::new(),
    };
    for ev in timeline {
        let dt = ev.time - t;
        if dt > 0.0 {
            x = cache.get(dt)?.apply(&x, &mut rng);
            check_state(&x, "state propagation")?;
            t = ev.time;
        }
        match ev.kind {
            EventKind::GridSample { .. } => {
                traj.times.push(ev.time);
                traj.states.push(x.clone());
            }
            EventKind::Jump { component, size } => {
                let before = x.clone();
                if component < system.l() {
                    apply_component_jump(&mut x, &system.b, component, size);
                }
                check_state(&x, "jump")?;
                traj.events.push(TrajectoryEvent { time: ev.time, kind: ev.kind.clone(), before, after: x.clone() });
            }
            EventKind::Reset => {
                if let Some(target) = reset_target {
                    let before = std::mem::replace(&mut x, target.clone());
                    traj.events.push(TrajectoryEvent { time: ev.time, kind: EventKind::Reset, before, after: x.clone() });
                }
            }
        }
    }
    Ok(traj)
}

/// Simulation along a given jump path (for injected or pre-sampled jumps).
pub fn simulate_with_jumps(
    system: &SystemMatrices,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    jumps: &JumpPath,
    seed: &SeedSpec,
) -> Result<Trajectory> {
    noise.check_against(system)?;
    if x0.len() != system.n() {
        return Err(Error::DimensionMismatch {
            context: "x0",
            expected: system.n().to_string(),
            got: x0.len().to_string(),
        });
    }
    let horizon = check_grid(grid)?;
    let timeline = process_sim::merge_events(jumps, &[], grid);
    integrate_timeline(system, noise, x0, horizon, &timeline, None, seed)
}

/// Samples the jump path of `noise` from `seed` (streams `jumps:<i>`) and
/// integrates exactly, Wiener draws from stream `wiener`.
pub fn simulate_ti(
    system: &SystemMatrices,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    seed: &SeedSpec,
) -> Result<Trajectory> {
    noise.check_against(system)?;
    let horizon = check_grid(grid)?;
    let jumps = process_sim::sample_jump_path(&noise.jumps, horizon, seed);
    simulate_with_jumps(system, noise, x0, grid, &jumps, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_measure::JumpLaw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn var_of(xs: &[f64]) -> (f64, f64) {
        // sample second moment about zero and its SE
        let n = xs.len() as f64;
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let m = sq.iter().sum::<f64>() / n;
        let v = sq.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn scalar_decay_halves() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let c = DMatrix::zeros(1, 1);
        let x = DVector::from_element(1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = propagate_exact(&a, &c, &x, 2f64.ln(), &mut rng).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_wiener_variance() {
        let a = DMatrix::zeros(1, 1);
        let c = DMatrix::from_element(1, 1, 1.0);
        let x = DVector::zeros(1);
        let t = Transition::new(&a, Some(&c), 2.0, None).unwrap();
        let mut rng = SeedSpec::new(1, 0, "wiener").rng();
        let xs: Vec<f64> = (0..100_000).map(|_| t.apply(&x, &mut rng)[0]).collect();
        let (m, se) = var_of(&xs);
        assert!((m - 2.0).abs() <= 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn ou_stationary_variance() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let c = DMatrix::from_element(1, 1, 1.0);
        let x = DVector::zeros(1);
        let t = Transition::new(&a, Some(&c), 20.0, None).unwrap();
        assert!((t.noise_factor.as_ref().unwrap()[(0, 0)].powi(2) - 0.5 * (1.0 - (-40f64).exp())).abs() < 1e-14);
        let mut rng = SeedSpec::new(2, 0, "wiener").rng();
        let xs: Vec<f64> = (0..100_000).map(|_| t.apply(&x, &mut rng)[0]).collect();
        let (m, se) = var_of(&xs);
        assert!((m - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn gramian_matches_quadrature() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let c = DMatrix::from_row_slice(2, 1, &[0.3, 1.0]);
        let dt = 0.7;
        let (phi, g) = transition_and_gramian(&a, &c, dt).unwrap();
        assert!((phi - (&a * dt).exp()).amax() < 1e-13);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let q = crate::quadrature::integrate(
                |s| {
                    let e = (&a * s).exp();
                    (&e * &c * c.transpose() * e.transpose())[(i, j)]
                },
                0.0,
                dt,
                1e-14,
                0.0,
            )
            .unwrap();
            assert!((g[(i, j)] - q.value).abs() < 1e-12);
        }
    }

    #[test]
    fn jumps() {
        let b = DMatrix::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(apply_jump(&x, &b, &DVector::from_vec(vec![0.0, 2.0])), DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(apply_jump(&x, &b, &DVector::zeros(2)), x);
    }

    #[test]
    fn deterministic_decay_on_grid() {
        let sys = SystemMatrices::scalar(-1.0, 1.0, 0.0);
        let grid = process_sim::uniform_grid(5.0, 50);
        let traj = simulate_ti(&sys, &NoiseSpec::silent(1), &DVector::from_element(1, 1.0), &grid, &SeedSpec::new(0, 0, "")).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert!((x[0] - (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn injected_jump() {
        let sys = SystemMatrices::scalar(-1.0, 1.0, 0.0);
        let jumps = JumpPath::from_jumps(2.0, 1, &[(0, 1.0, 1.0)]).unwrap();
        let traj = simulate_with_jumps(&sys, &NoiseSpec::silent(1), &DVector::zeros(1), &[0.0, 2.0], &jumps, &SeedSpec::new(0, 0, "")).unwrap();
        assert!((traj.final_state()[0] - (-1f64).exp()).abs() < 1e-15);
        let ev = &traj.events[0];
        assert_eq!(ev.before[0], 0.0);
        assert_eq!(ev.after[0], 1.0);
    }

    #[test]
    fn constant_lv_drift_forcing() {
        // dX = -X dt + dL with L_t = 2t: X_t = 2 (1 - e^{-t})
        let sys = SystemMatrices::scalar(-1.0, 1.0, 0.0);
        let mut noise = NoiseSpec::silent(1);
        noise.drift = Some(DVector::from_element(1, 2.0));
        let traj = simulate_ti(&sys, &noise, &DVector::zeros(1), &[0.0, 0.5, 3.0], &SeedSpec::new(0, 0, "")).unwrap();
        assert!((traj.final_state()[0] - 2.0 * (1.0 - (-3f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_dims() {
        let sys = SystemMatrices::scalar(-1.0, 1.0, 0.0);
        let noise = NoiseSpec::new(
            vec![LevyMeasureSpec::new(1.0, JumpLaw::Normal { variance: 1.0 }).unwrap(); 2],
            false,
        );
        assert!(simulate_ti(&sys, &noise, &DVector::zeros(1), &[0.0, 1.0], &SeedSpec::new(0, 0, "")).is_err());
    }
}
