//! Hybrid dynamics on top of the linear system: a slowly varying parameter
//! `θ`, resets of `θ` to `θ₀` and resets of the state to `X₀`.
//!
//! `θ` follows `dθ = β dt + σ dW^θ + ρ dL` by Euler–Maruyama over
//! substeps of length at most `h`; the state is propagated exactly over
//! each substep with `A` frozen at the substep's left endpoint.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::drift_monitor::{reset_jump_xi, ResetJumpRecord};
use crate::error::{invalid, Error, Result};
use crate::levy_measure::LevyMeasureSpec;
use crate::linear_sde::{
    self, apply_component_jump, check_state, NoiseSpec, SystemMatrices, Trajectory, TrajectoryEvent, Transition,
    WIENER_STREAM,
};
use crate::lyapunov_cert::{ParametricCertificate, ParametricFamily};
use crate::process_sim::{self, EventKind, JumpPath, ResetProcess, SeedSpec};

pub const THETA_WIENER_STREAM: &str = "theta_wiener";
pub const RESET_STREAM: &str = "resets";
pub const DEFAULT_STEP: f64 = 1e-3;

/// Post-clipping loads are kept at or below `δ (1 - CLIP_MARGIN)`.
const CLIP_MARGIN: f64 = 1e-9;

/// `(t, θ) ↦ β`.
pub type VectorField = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;
/// `(t, θ) ↦ σ` or `ρ`.
pub type MatrixField = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    /// Clamp to the box after every update.
    Project,
    /// Return [`Error::Containment`] when θ leaves the box.
    Fail,
}

/// Coefficients of the θ process.
///
/// `diffusion` is `d × k_θ` against an independent Wiener process;
/// `jump_loading` is `d × (l + m)`, where the first `l` columns load the
/// jumps shared with the state noise and the remaining `m` load θ-only
/// jumps from `jumps`. Unset coefficients are zero.
#[derive(Clone)]
pub struct ThetaProcessSpec {
    pub delta: f64,
    pub drift: Option<VectorField>,
    pub diffusion: Option<MatrixField>,
    pub jump_loading: Option<MatrixField>,
    pub jumps: Vec<LevyMeasureSpec>,
    /// Starting point; the family's `θ₀` when unset.
    pub initial: Option<Vec<f64>>,
    pub containment: Containment,
}

impl std::fmt::Debug for ThetaProcessSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThetaProcessSpec")
            .field("delta", &self.delta)
            .field("drift", &self.drift.is_some())
            .field("diffusion", &self.diffusion.is_some())
            .field("jump_loading", &self.jump_loading.is_some())
            .field("jumps", &self.jumps)
            .field("initial", &self.initial)
            .field("containment", &self.containment)
            .finish()
    }
}

impl ThetaProcessSpec {
    /// A frozen parameter with slow-variation bound `delta`.
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(invalid("delta", "must be finite and nonnegative"));
        }
        Ok(Self {
            delta,
            drift: None,
            diffusion: None,
            jump_loading: None,
            jumps: Vec::new(),
            initial: None,
            containment: Containment::Project,
        })
    }

    pub fn with_drift(mut self, f: VectorField) -> Self {
        self.drift = Some(f);
        self
    }

    /// `β = κ (target - θ)`.
    pub fn with_mean_reversion(self, kappa: f64, target: Vec<f64>) -> Self {
        self.with_drift(Arc::new(move |_, th: &[f64]| {
            DVector::from_iterator(th.len(), th.iter().zip(&target).map(|(t, c)| kappa * (c - t)))
        }))
    }

    pub fn with_constant_drift(self, beta: DVector<f64>) -> Self {
        self.with_drift(Arc::new(move |_, _: &[f64]| beta.clone()))
    }

    pub fn with_diffusion(mut self, f: MatrixField) -> Self {
        self.diffusion = Some(f);
        self
    }

    pub fn with_constant_diffusion(self, sigma: DMatrix<f64>) -> Self {
        self.with_diffusion(Arc::new(move |_, _: &[f64]| sigma.clone()))
    }

    pub fn with_jump_loading(mut self, f: MatrixField) -> Self {
        self.jump_loading = Some(f);
        self
    }

    pub fn with_constant_jump_loading(self, rho: DMatrix<f64>) -> Self {
        self.with_jump_loading(Arc::new(move |_, _: &[f64]| rho.clone()))
    }

    pub fn with_theta_jumps(mut self, jumps: Vec<LevyMeasureSpec>) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn with_initial(mut self, theta: Vec<f64>) -> Self {
        self.initial = Some(theta);
        self
    }

    pub fn with_containment(mut self, rule: Containment) -> Self {
        self.containment = rule;
        self
    }

    /// True when θ cannot move: `δ = 0` or no coefficient is set.
    pub fn is_frozen(&self) -> bool {
        self.delta == 0.0 || (self.drift.is_none() && self.diffusion.is_none() && self.jump_loading.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    None,
    Parameter,
    State,
}

/// Reset mode and its counting process; targets are `θ₀` of the family
/// (parameter mode) or the initial state (state mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ResetSpec {
    pub mode: ResetMode,
    pub process: ResetProcess,
    /// Order `q` of `V` used for the logged `ξ`.
    pub xi_order: f64,
}

impl ResetSpec {
    pub fn new(mode: ResetMode, process: ResetProcess) -> Result<Self> {
        process.validate()?;
        Ok(Self { mode, process, xi_order: 2.0 })
    }

    pub fn none() -> Self {
        Self { mode: ResetMode::None, process: ResetProcess::none(), xi_order: 2.0 }
    }

    pub fn with_xi_order(mut self, q: f64) -> Self {
        self.xi_order = q;
        self
    }
}

/// θ at the report grid and step statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Largest post-clipping `|β|² + ‖σ‖² + ‖ρ‖²` seen.
    pub max_load: f64,
    pub clipped_steps: usize,
    pub projections: usize,
}

#[derive(Debug, Clone)]
pub struct HybridOutput {
    pub trajectory: Trajectory,
    pub theta: ThetaPath,
    pub resets: Vec<ResetJumpRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateResetRecord {
    pub time: f64,
    pub state_before: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StateResetOutput {
    pub trajectory: Trajectory,
    pub resets: Vec<StateResetRecord>,
    /// Set when `A` is not Hurwitz; the run still proceeds.
    pub unstable: bool,
}

struct Loads {
    beta: Option<DVector<f64>>,
    sigma: Option<DMatrix<f64>>,
    rho: Option<DMatrix<f64>>,
}

struct ThetaStepper<'a> {
    spec: &'a ThetaProcessSpec,
    family: &'a ParametricFamily,
    columns: usize,
    max_load: f64,
    clipped_steps: usize,
    projections: usize,
}

impl<'a> ThetaStepper<'a> {
    /// Coefficients at `(t, θ)`, jointly scaled so the load stays below δ.
    fn loads(&mut self, t: f64, theta: &[f64]) -> Result<Loads> {
        let d = theta.len();
        let mut beta = self.spec.drift.as_ref().map(|f| f(t, theta));
        let mut sigma = self.spec.diffusion.as_ref().map(|f| f(t, theta));
        let mut rho = self.spec.jump_loading.as_ref().map(|f| f(t, theta));
        if beta.as_ref().is_some_and(|b| b.len() != d)
            || sigma.as_ref().is_some_and(|s| s.nrows() != d)
            || rho.as_ref().is_some_and(|r| r.nrows() != d || r.ncols() != self.columns)
        {
            return Err(Error::DimensionMismatch {
                context: "θ coefficients",
                expected: format!("β: {d}, σ: {d} rows, ρ: {d}x{}", self.columns),
                got: format!(
                    "β: {:?}, σ: {:?}, ρ: {:?}",
                    beta.as_ref().map(|b| b.len()),
                    sigma.as_ref().map(|s| s.shape()),
                    rho.as_ref().map(|r| r.shape())
                ),
            });
        }
        let load = beta.as_ref().map_or(0.0, |b| b.norm_squared())
            + sigma.as_ref().map_or(0.0, |s| s.norm_squared())
            + rho.as_ref().map_or(0.0, |r| r.norm_squared());
        if !load.is_finite() {
            return Err(Error::NonFinite("θ coefficients"));
        }
        let cap = self.spec.delta * (1.0 - CLIP_MARGIN);
        let mut effective = load;
        if load > cap {
            let s = if cap > 0.0 { (cap / load).sqrt() } else { 0.0 };
            beta.iter_mut().for_each(|b| *b *= s);
            sigma.iter_mut().for_each(|m| *m *= s);
            rho.iter_mut().for_each(|m| *m *= s);
            effective = load * s * s;
            self.clipped_steps += 1;
        }
        self.max_load = self.max_load.max(effective);
        Ok(Loads { beta, sigma, rho })
    }

    fn contain(&mut self, theta: &mut [f64], t: f64) -> Result<()> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("θ"));
        }
        if !self.family.contains(theta) {
            match self.spec.containment {
                Containment::Project => {
                    self.family.project(theta);
                    self.projections += 1;
                }
                Containment::Fail => return Err(Error::Containment { time: t }),
            }
        }
        Ok(())
    }
}

/// Frozen-θ transition, reused while θ and the substep length repeat.
struct FrozenTransition {
    key: Option<(Vec<u64>, u64)>,
    transition: Option<Transition>,
}

impl FrozenTransition {
    fn get(&mut self, family: &ParametricFamily, noise: &NoiseSpec, theta: &[f64], dt: f64) -> Result<&Transition> {
        let key = (theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), dt.to_bits());
        if self.key.as_ref() != Some(&key) {
            let sys = family.system_at(theta)?;
            let forcing = noise.drift.as_ref().map(|b| &sys.b * b);
            let c = noise.wiener.then_some(&sys.c);
            self.transition = Some(Transition::new(&sys.a, c, dt, forcing.as_ref())?);
            self.key = Some(key);
        }
        Ok(self.transition.as_ref().expect("set above"))
    }
}

fn validate_inputs(family: &ParametricFamily, spec: &ThetaProcessSpec, noise: &NoiseSpec, x0: &DVector<f64>, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid("step", "h must be positive"));
    }
    let sys0 = family.system_at(&family.theta0)?;
    noise.check_against(&sys0)?;
    if x0.len() != sys0.n() {
        return Err(Error::DimensionMismatch { context: "x0", expected: sys0.n().to_string(), got: x0.len().to_string() });
    }
    let start = spec.initial.clone().unwrap_or_else(|| family.theta0.clone());
    if !family.contains(&start) {
        return Err(invalid("initial θ", "must lie in the box"));
    }
    Ok(start)
}

fn constant_theta_path(grid: &[f64], theta: &[f64]) -> ThetaPath {
    ThetaPath {
        times: grid.to_vec(),
        values: vec![theta.to_vec(); grid.len()],
        max_load: 0.0,
        clipped_steps: 0,
        projections: 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_hybrid(
    family: &ParametricFamily,
    certificate: Option<&ParametricCertificate>,
    spec: &ThetaProcessSpec,
    reset: &ResetSpec,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    step: f64,
    seed: &SeedSpec,
) -> Result<HybridOutput> {
    let start = validate_inputs(family, spec, noise, x0, step)?;
    process_sim::validate_grid(grid)?;
    if grid[0] < 0.0 {
        return Err(invalid("grid", "time points must be nonnegative"));
    }
    let horizon = grid[grid.len() - 1];
    let resets = match reset.mode {
        ResetMode::Parameter => process_sim::sample_reset_times(&reset.process, horizon, &seed.with_stream(RESET_STREAM)),
        _ => Vec::new(),
    };
    let l = noise.jumps.len();

    if spec.is_frozen() && resets.is_empty() {
        let sys = family.system_at(&start)?;
        let trajectory = linear_sde::simulate_ti(&sys, noise, x0, grid, seed)?;
        return Ok(HybridOutput { trajectory, theta: constant_theta_path(grid, &start), resets: Vec::new() });
    }

    let mut all_jumps: Vec<LevyMeasureSpec> = noise.jumps.clone();
    all_jumps.extend(spec.jumps.iter().cloned());
    let jump_path: JumpPath = process_sim::sample_jump_path(&all_jumps, horizon, seed);
    let timeline = process_sim::merge_events(&jump_path, &resets, grid);

    let mut stepper = ThetaStepper { spec, family, columns: all_jumps.len(), max_load: 0.0, clipped_steps: 0, projections: 0 };
    let mut frozen = FrozenTransition { key: None, transition: None };
    let mut rng_x = seed.with_stream(WIENER_STREAM).rng();
    let mut rng_theta = seed.with_stream(THETA_WIENER_STREAM).rng();
    let p0 = certificate.map(|c| c.p0().clone());

    let mut x = x0.clone();
    let mut theta = start;
    let mut t = 0.0;
    let mut traj = Trajectory { horizon, x0: x0.clone(), times: Vec::new(), states: Vec::new(), events: Vec::new() };
    let mut theta_path = ThetaPath { times: Vec::new(), values: Vec::new(), max_load: 0.0, clipped_steps: 0, projections: 0 };
    let mut log = Vec::new();

    for ev in &timeline {
        let span = ev.time - t;
        if span > 0.0 {
            let n = (span / step).ceil().max(1.0) as usize;
            let sub = span / n as f64;
            for k in 0..n {
                let tk = t + sub * k as f64;
                x = frozen.get(family, noise, &theta, sub)?.apply(&x, &mut rng_x);
                check_state(&x, "state propagation")?;
                let loads = stepper.loads(tk, &theta)?;
                if let Some(b) = &loads.beta {
                    for (th, bi) in theta.iter_mut().zip(b.iter()) {
                        *th += bi * sub;
                    }
                }
                if let Some(s) = &loads.sigma {
                    let z = DVector::from_fn(s.ncols(), |_, _| StandardNormal.sample(&mut rng_theta));
                    let dw = s * z * sub.sqrt();
                    for (th, d) in theta.iter_mut().zip(dw.iter()) {
                        *th += d;
                    }
                }
                stepper.contain(&mut theta, tk + sub)?;
            }
            t = ev.time;
        }
        match ev.kind {
            EventKind::GridSample { .. } => {
                traj.times.push(ev.time);
                traj.states.push(x.clone());
                theta_path.times.push(ev.time);
                theta_path.values.push(theta.clone());
            }
            EventKind::Jump { component, size } => {
                let loads = stepper.loads(ev.time, &theta)?;
                if component < l {
                    let sys = family.system_at(&theta)?;
                    let before = x.clone();
                    apply_component_jump(&mut x, &sys.b, component, size);
                    check_state(&x, "jump")?;
                    traj.events.push(TrajectoryEvent { time: ev.time, kind: ev.kind.clone(), before, after: x.clone() });
                }
                if let Some(r) = &loads.rho {
                    for (th, ri) in theta.iter_mut().zip(r.column(component).iter()) {
                        *th += ri * size;
                    }
                    stepper.contain(&mut theta, ev.time)?;
                }
            }
            EventKind::Reset => {
                let theta_minus = std::mem::replace(&mut theta, family.theta0.clone());
                let xi = match (certificate, &p0) {
                    (Some(cert), Some(p0)) => reset_jump_xi(&x, &cert.p_at(&theta_minus)?, p0, reset.xi_order),
                    _ => f64::NAN,
                };
                log.push(ResetJumpRecord { time: ev.time, theta_minus, state: x.iter().copied().collect(), xi });
            }
        }
    }
    theta_path.max_load = stepper.max_load;
    theta_path.clipped_steps = stepper.clipped_steps;
    theta_path.projections = stepper.projections;
    Ok(HybridOutput { trajectory: traj, theta: theta_path, resets: log })
}

/// `dX = A(θ)X dt + B(θ)dL + C(θ)dW` with slowly varying `θ`. A frozen θ
/// process reproduces [`linear_sde::simulate_ti`] at `A(θ_start)` bit for bit.
pub fn simulate_parameter_varying(
    family: &ParametricFamily,
    spec: &ThetaProcessSpec,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    step: f64,
    seed: &SeedSpec,
) -> Result<HybridOutput> {
    simulate_hybrid(family, None, spec, &ResetSpec::none(), noise, x0, grid, step, seed)
}

/// As [`simulate_parameter_varying`], with θ set to `θ₀` at each reset
/// time and the jump `ξ` of `V` logged against `certificate`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_parameter_reset(
    certificate: &ParametricCertificate,
    spec: &ThetaProcessSpec,
    reset: &ResetSpec,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    step: f64,
    seed: &SeedSpec,
) -> Result<HybridOutput> {
    if reset.mode != ResetMode::Parameter {
        return Err(invalid("reset mode", "parameter resetting needs mode = parameter"));
    }
    simulate_hybrid(certificate.family(), Some(certificate), spec, reset, noise, x0, grid, step, seed)
}

/// Exact event-driven simulation with the state set to `x0` at each reset.
pub fn simulate_state_reset(
    system: &SystemMatrices,
    reset: &ResetSpec,
    noise: &NoiseSpec,
    x0: &DVector<f64>,
    grid: &[f64],
    seed: &SeedSpec,
) -> Result<StateResetOutput> {
    if reset.mode != ResetMode::State {
        return Err(invalid("reset mode", "state resetting needs mode = state"));
    }
    noise.check_against(system)?;
    if x0.len() != system.n() {
        return Err(Error::DimensionMismatch { context: "x0", expected: system.n().to_string(), got: x0.len().to_string() });
    }
    process_sim::validate_grid(grid)?;
    let horizon = grid[grid.len() - 1];
    let jumps = process_sim::sample_jump_path(&noise.jumps, horizon, seed);
    let times = process_sim::sample_reset_times(&reset.process, horizon, &seed.with_stream(RESET_STREAM));
    let timeline = process_sim::merge_events(&jumps, &times, grid);
    let trajectory = linear_sde::integrate_timeline(system, noise, x0, horizon, &timeline, Some(x0), seed)?;
    let resets = trajectory
        .reset_events()
        .map(|e| StateResetRecord { time: e.time, state_before: e.before.iter().copied().collect() })
        .collect();
    Ok(StateResetOutput { trajectory, resets, unstable: !crate::linalg::is_hurwitz(&system.a) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_measure::JumpLaw;
    use crate::lyapunov_cert::parametric_certificate;
    use crate::process_sim::uniform_grid;

    fn scalar_family() -> ParametricFamily {
        ParametricFamily::scalar_decay(1.0, 2.0, 1.5, DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.0))
            .unwrap()
    }

    fn cp_noise() -> NoiseSpec {
        NoiseSpec::new(vec![LevyMeasureSpec::new(1.0, JumpLaw::Normal { variance: 1.0 }).unwrap()], false)
    }

    #[test]
    fn frozen_theta_matches_time_invariant() {
        let fam = scalar_family();
        let grid = uniform_grid(5.0, 50);
        let x0 = DVector::from_element(1, 1.0);
        let seed = SeedSpec::new(3, 7, "");
        let out = simulate_parameter_varying(&fam, &ThetaProcessSpec::new(0.0).unwrap(), &cp_noise(), &x0, &grid, 0.01, &seed)
            .unwrap();
        let ti = linear_sde::simulate_ti(&fam.system_at(&fam.theta0).unwrap(), &cp_noise(), &x0, &grid, &seed).unwrap();
        assert_eq!(out.trajectory, ti);
    }

    #[test]
    fn theta_stays_in_box_and_loads_bounded() {
        let fam = scalar_family();
        let spec = ThetaProcessSpec::new(0.01)
            .unwrap()
            .with_constant_drift(DVector::from_element(1, -5.0))
            .with_constant_diffusion(DMatrix::from_element(1, 1, 1.0));
        let grid = uniform_grid(10.0, 100);
        let out = simulate_parameter_varying(
            &fam,
            &spec,
            &NoiseSpec::silent(1),
            &DVector::from_element(1, 1.0),
            &grid,
            0.01,
            &SeedSpec::new(1, 0, ""),
        )
        .unwrap();
        assert!(out.theta.values.iter().all(|th| fam.contains(th)));
        assert!(out.theta.max_load < 0.01);
        assert!(out.theta.clipped_steps > 0);
        for (t, x) in out.trajectory.times.iter().zip(&out.trajectory.states) {
            assert!(x[0].abs() <= (-t).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn containment_failure() {
        let fam = scalar_family();
        let spec = ThetaProcessSpec::new(1.0)
            .unwrap()
            .with_constant_drift(DVector::from_element(1, 0.9))
            .with_containment(Containment::Fail);
        let r = simulate_parameter_varying(
            &fam,
            &spec,
            &NoiseSpec::silent(1),
            &DVector::from_element(1, 1.0),
            &uniform_grid(2.0, 4),
            0.01,
            &SeedSpec::new(1, 0, ""),
        );
        assert!(matches!(r, Err(Error::Containment { .. })));
    }

    #[test]
    fn scheduled_reset_restores_theta0() {
        let fam = scalar_family();
        let cert = parametric_certificate(&fam, 0.1).unwrap();
        let spec = ThetaProcessSpec::new(0.01).unwrap().with_constant_drift(DVector::from_element(1, 0.09)).with_initial(vec![1.0]);
        let reset = ResetSpec::new(ResetMode::Parameter, ResetProcess::Schedule(vec![1.0])).unwrap();
        let grid = vec![0.0, 0.5, 1.0, 1.5];
        let out = simulate_parameter_reset(&cert, &spec, &reset, &cp_noise(), &DVector::from_element(1, 1.0), &grid, 0.01, &SeedSpec::new(2, 0, ""))
            .unwrap();
        assert_eq!(out.resets.len(), 1);
        assert_eq!(out.resets[0].time, 1.0);
        // grid sample at 1.0 precedes the reset; θ at 1.5 evolved from θ₀ for 0.5.
        assert!((out.theta.values[3][0] - (1.5 + 0.09 * 0.5)).abs() < 1e-9);
        assert!(out.resets[0].xi <= 1e-12);
    }

    #[test]
    fn zero_rate_reset_matches_varying() {
        let fam = scalar_family();
        let cert = parametric_certificate(&fam, 0.1).unwrap();
        let spec = ThetaProcessSpec::new(0.01)
            .unwrap()
            .with_mean_reversion(1.0, vec![1.5])
            .with_constant_diffusion(DMatrix::from_element(1, 1, 0.05));
        let grid = uniform_grid(3.0, 30);
        let x0 = DVector::from_element(1, 1.0);
        let seed = SeedSpec::new(9, 1, "");
        let reset = ResetSpec::new(ResetMode::Parameter, ResetProcess::Poisson { rate: 0.0 }).unwrap();
        let a = simulate_parameter_reset(&cert, &spec, &reset, &cp_noise(), &x0, &grid, 0.01, &seed).unwrap();
        let b = simulate_parameter_varying(&fam, &spec, &cp_noise(), &x0, &grid, 0.01, &seed).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn state_reset_noop_and_fast_resets() {
        let sys = SystemMatrices::scalar(-1.0, 1.0, 0.0);
        let x0 = DVector::from_element(1, 0.0);
        let reset = ResetSpec::new(ResetMode::State, ResetProcess::Schedule(vec![0.5])).unwrap();
        let out = simulate_state_reset(&sys, &reset, &NoiseSpec::silent(1), &x0, &uniform_grid(1.0, 10), &SeedSpec::new(0, 0, "")).unwrap();
        assert_eq!(out.resets.len(), 1);
        assert!(out.trajectory.states.iter().all(|x| x[0] == 0.0));

        let a = 0.7;
        let sys = SystemMatrices::scalar(a, 1.0, 0.0);
        let x0 = DVector::from_element(1, 1.0);
        let schedule: Vec<f64> = (1..=100).map(|k| k as f64 * 0.01).collect();
        let reset = ResetSpec::new(ResetMode::State, ResetProcess::Schedule(schedule)).unwrap();
        let out = simulate_state_reset(&sys, &reset, &NoiseSpec::silent(1), &x0, &uniform_grid(1.0, 1000), &SeedSpec::new(0, 0, "")).unwrap();
        assert!(out.unstable);
        let bound = (a * 0.01f64).exp() * (1.0 + 1e-12);
        assert!(out.trajectory.states.iter().all(|x| x[0] <= bound && x[0] >= 1.0));
    }
}
