//! Lyapunov processes `V = (1 + xᵀPx)^{q/2}` along trajectories: the
//! modified geometric drift check between jumps, the jump-term expansion,
//! reset jumps `ξ`, and Doléans-Dade exponentials of finite-variation
//! inputs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{self, expm};
use crate::linear_sde::Trajectory;
use crate::polynomial::Polynomial;

/// Parameters `(α, γ, ε, Q)` of the modified geometric drift condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftConditionParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub order: u32,
}

impl DriftConditionParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, order: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", "must be nonnegative"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1]"));
        }
        if order == 0 {
            return Err(invalid("order", "must be positive"));
        }
        Ok(Self { alpha, gamma, epsilon, order })
    }
}

/// `(1 + xᵀPx)^{q/2}`.
pub fn lyapunov_value(x: &DVector<f64>, p: &DMatrix<f64>, q: f64) -> f64 {
    (1.0 + x.dot(&(p * x))).powf(q / 2.0)
}

/// `ξ = V(x; P₀) - V(x; P₋)`, the jump of `V` when θ resets to θ₀.
pub fn reset_jump_xi(x: &DVector<f64>, p_minus: &DMatrix<f64>, p_zero: &DMatrix<f64>, q: f64) -> f64 {
    lyapunov_value(x, p_zero, q) - lyapunov_value(x, p_minus, q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetJumpRecord {
    pub time: f64,
    pub theta_minus: Vec<f64>,
    pub state: Vec<f64>,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoleansJump {
    pub time: f64,
    pub dz: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoleansPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jumps: Vec<DoleansJump>,
    /// Set when some `1 + ΔZ ≤ 0`; positivity of `V` is then lost.
    pub nonpositive_factor: bool,
}

impl DoleansPath {
    /// Largest `|ΔV - V₋ΔZ| / max(1, |V₋|)` over the jumps.
    pub fn max_jump_identity_error(&self) -> f64 {
        self.jumps
            .iter()
            .map(|j| ((j.after - j.before) - j.before * j.dz).abs() / j.before.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Stochastic exponential `V_t = e^{Z_c(t) - Z_c(t₀)} ∏_{s≤t}(1 + ΔZ_s)` with
/// `Z_c` piecewise linear through `continuous = [(t, Z_c(t))]` and jumps
/// `(time, ΔZ)`. Values are right-continuous on the grid.
pub fn doleans_exponential(continuous: &[(f64, f64)], jumps: &[(f64, f64)]) -> Result<DoleansPath> {
    if continuous.is_empty() {
        return Err(invalid("continuous", "need at least one grid point"));
    }
    if continuous.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid("continuous", "grid times must be strictly increasing"));
    }
    if continuous.iter().any(|(t, z)| !t.is_finite() || !z.is_finite()) {
        return Err(invalid("continuous", "non-finite input"));
    }
    let (t0, z0) = continuous[0];
    let t_end = continuous[continuous.len() - 1].0;
    let mut sorted: Vec<(f64, f64)> = jumps.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.iter().any(|(t, dz)| !(t.is_finite() && dz.is_finite()) || *t < t0 || *t > t_end) {
        return Err(invalid("jumps", "jump times must be finite and within the grid"));
    }
    let zc = |t: f64| -> f64 {
        let k = continuous.partition_point(|(s, _)| *s <= t).clamp(1, continuous.len());
        if k == continuous.len() {
            return continuous[k - 1].1;
        }
        let (ta, za) = continuous[k - 1];
        let (tb, zb) = continuous[k];
        za + (zb - za) * (t - ta) / (tb - ta)
    };
    let mut product = 1.0;
    let mut nonpositive_factor = false;
    let mut out_jumps = Vec::with_capacity(sorted.len());
    let mut next = 0;
    let mut values = Vec::with_capacity(continuous.len());
    for &(t, z) in continuous {
        while next < sorted.len() && sorted[next].0 <= t {
            let (s, dz) = sorted[next];
            let cont = (zc(s) - z0).exp();
            let before = cont * product;
            let factor = 1.0 + dz;
            if factor <= 0.0 {
                nonpositive_factor = true;
            }
            product *= factor;
            out_jumps.push(DoleansJump { time: s, dz, before, after: before * factor });
            next += 1;
        }
        values.push((z - z0).exp() * product);
    }
    Ok(DoleansPath {
        times: continuous.iter().map(|p| p.0).collect(),
        values,
        jumps: out_jumps,
        nonpositive_factor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalMargin {
    pub start: f64,
    pub end: f64,
    /// `min (bound - dV/dt) / V` over the sampled flow.
    pub min_margin: f64,
    pub worst_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticVariationCheck {
    /// Largest realized `d[M]/dt` over recorded states.
    pub max_rate: f64,
    /// `λ_max(CᵀPC)`, the a-priori bound on the rate.
    pub gamma: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub alpha: f64,
    pub q: f64,
    pub tol: f64,
    pub intervals: Vec<IntervalMargin>,
    /// Pointwise check at grid samples and event states.
    pub pointwise_min_margin: f64,
    pub worst_margin: f64,
    pub failed_intervals: usize,
    pub passed: bool,
    pub quadratic_variation: Option<QuadraticVariationCheck>,
}

/// Flow samples per inter-event interval (endpoints included).
pub const FLOW_SAMPLES: usize = 17;

/// `(bound - dV/dt) / V` at state `x`, where the bound is
/// `-(qα/2) W^{q/2-1} (W - 1)` for `W = 1 + xᵀPx`; for q = 2 this is
/// `dV/dt ≤ -α(V - 1)`.
fn normalized_margin(x: &DVector<f64>, p: &DMatrix<f64>, lyap: &DMatrix<f64>, alpha: f64, q: f64) -> f64 {
    let w = 1.0 + x.dot(&(p * x));
    let dw = x.dot(&(lyap * x));
    let v = w.powf(q / 2.0);
    let scale = 0.5 * q * w.powf(q / 2.0 - 1.0);
    let bound = -alpha * scale * (w - 1.0);
    (bound - scale * dw) / v
}

/// Checks the continuous-part decay of `V` between consecutive jump or
/// reset events along the exact deterministic flow `e^{As} x`. With a
/// Wiener term the flow check still applies to the drift; the martingale
/// part is monitored only through its quadratic-variation rate against
/// `γ = λ_max(CᵀPC)`.
pub fn verify_drift_inequality(
    trajectory: &Trajectory,
    a: &DMatrix<f64>,
    c: Option<&DMatrix<f64>>,
    p: &DMatrix<f64>,
    alpha: f64,
    q: f64,
    tol: f64,
) -> Result<DriftReport> {
    if q < 1.0 {
        return Err(invalid("q", "must be at least 1"));
    }
    let lyap = p * a + a.transpose() * p;
    let mut starts: Vec<(f64, DVector<f64>)> = vec![(0.0, trajectory.x0.clone())];
    starts.extend(trajectory.events.iter().map(|e| (e.time, e.after.clone())));
    let mut intervals = Vec::with_capacity(starts.len());
    for (k, (t_start, x_start)) in starts.iter().enumerate() {
        let t_end = starts.get(k + 1).map_or(trajectory.horizon, |s| s.0);
        let span = (t_end - t_start).max(0.0);
        let mut worst = (f64::INFINITY, *t_start);
        let mut x = x_start.clone();
        let steps = if span > 0.0 { FLOW_SAMPLES - 1 } else { 0 };
        let step = if steps > 0 { Some(expm(&(a * (span / steps as f64)))?) } else { None };
        for j in 0..=steps {
            if j > 0 {
                x = step.as_ref().expect("positive span") * &x;
            }
            let m = normalized_margin(&x, p, &lyap, alpha, q);
            if m < worst.0 {
                worst = (m, t_start + span * j as f64 / steps.max(1) as f64);
            }
        }
        intervals.push(IntervalMargin { start: *t_start, end: t_end, min_margin: worst.0, worst_time: worst.1 });
    }
    let recorded: Vec<&DVector<f64>> = trajectory
        .states
        .iter()
        .chain(trajectory.events.iter().flat_map(|e| [&e.before, &e.after]))
        .collect();
    let pointwise_min_margin = recorded
        .iter()
        .map(|x| normalized_margin(x, p, &lyap, alpha, q))
        .fold(f64::INFINITY, f64::min);
    let failed_intervals = intervals.iter().filter(|i| i.min_margin < -tol).count();
    let worst_margin = intervals.iter().map(|i| i.min_margin).fold(pointwise_min_margin, f64::min);
    let quadratic_variation = c.filter(|c| c.ncols() > 0 && c.iter().any(|v| *v != 0.0)).map(|c| {
        let gamma = linalg::sym_max_eigenvalue(&(c.transpose() * p * c));
        let pc = p * c;
        let max_rate = recorded
            .iter()
            .map(|x| {
                let w = 1.0 + x.dot(&(p * *x));
                let g = pc.transpose() * *x;
                4.0 * g.norm_squared() / (w * w)
            })
            .fold(0.0, f64::max);
        QuadraticVariationCheck { max_rate, gamma, within_bound: max_rate <= gamma * (1.0 + 1e-12) }
    });
    let passed = failed_intervals == 0 && pointwise_min_margin >= -tol;
    Ok(DriftReport {
        alpha,
        q,
        tol,
        intervals,
        pointwise_min_margin,
        worst_margin,
        failed_intervals,
        passed,
        quadratic_variation,
    })
}

/// `ΔV` at a jump computed directly and through its polynomial expansion
/// in `ΔL`, with the expansion's coefficients normalized by `V₋^{1-1/q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDecomposition {
    pub direct: f64,
    pub expanded: f64,
    pub difference: f64,
    /// Drift exponent `ε = 1/q` of the normalization `ΔV = V₋^{1-ε} f(ΔL)`.
    pub epsilon: f64,
    /// Coefficients of `f`.
    pub normalized: Polynomial,
    /// State-independent coefficient bounds for `f`.
    pub bound: Polynomial,
    pub max_bound_ratio: f64,
    pub within_bound: bool,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expands `V(x₋ + BΔL) - V(x₋)` for even `q` as
/// `Σ_{k=1}^{q/2} C(q/2, k) W₋^{q/2-k} (ψᵀΔL + ΔLᵀ BᵀPB ΔL)^k`, where
/// `W₋ = 1 + x₋ᵀPx₋` and `ψ = 2BᵀPx₋`.
pub fn jump_term_decomposition(
    x_minus: &DVector<f64>,
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dl: &DVector<f64>,
    q: u32,
) -> Result<JumpDecomposition> {
    if q == 0 || q % 2 == 1 {
        return Err(invalid("q", "the polynomial expansion needs an even positive order"));
    }
    if b.nrows() != x_minus.len() || b.ncols() != dl.len() || p.shape() != (x_minus.len(), x_minus.len()) {
        return Err(invalid("dims", "x, P, B and ΔL dimensions are inconsistent"));
    }
    let l = dl.len();
    let m = q / 2;
    let w = 1.0 + x_minus.dot(&(p * x_minus));
    let psi = b.transpose() * p * x_minus * 2.0;
    let quad = b.transpose() * p * b;

    let mut dw = Polynomial::zero(l);
    let mut dw_bound = Polynomial::zero(l);
    for i in 0..l {
        dw = dw.add(&Polynomial::monomial(l, i, 1, psi[i]));
        let gi = 2.0 * quad[(i, i)].max(0.0).sqrt();
        dw_bound = dw_bound.add(&Polynomial::monomial(l, i, 1, gi));
        for j in i..l {
            let c = if i == j { quad[(i, i)] } else { quad[(i, j)] + quad[(j, i)] };
            let mono = Polynomial::monomial(l, i, 1, 1.0).mul(&Polynomial::monomial(l, j, 1, 1.0));
            dw = dw.add(&mono.scale(c));
            dw_bound = dw_bound.add(&mono.scale(c.abs()));
        }
    }

    let mut expansion = Polynomial::zero(l);
    let mut bound = Polynomial::zero(l);
    for k in 1..=m {
        let ck = binomial(m, k);
        expansion = expansion.add(&dw.pow(k).scale(ck * w.powi((m - k) as i32)));
        bound = bound.add(&dw_bound.pow(k).scale(ck));
    }
    let x_plus = x_minus + b * dl;
    let qf = q as f64;
    let direct = lyapunov_value(&x_plus, p, qf) - lyapunov_value(x_minus, p, qf);
    let expanded = expansion.eval(dl.as_slice());
    let normalized = expansion.scale(1.0 / w.powf(m as f64 - 0.5));
    let mut max_bound_ratio: f64 = 0.0;
    let mut within_bound = true;
    for (idx, c) in normalized.terms() {
        let cap = bound.coefficient(idx);
        if c.abs() > cap * (1.0 + 1e-12) + 1e-15 {
            within_bound = false;
        }
        if cap > 0.0 {
            max_bound_ratio = max_bound_ratio.max(c.abs() / cap);
        } else if c != 0.0 {
            max_bound_ratio = f64::INFINITY;
        }
    }
    Ok(JumpDecomposition {
        direct,
        expanded,
        difference: direct - expanded,
        epsilon: 1.0 / qf,
        normalized,
        bound,
        max_bound_ratio,
        within_bound,
    })
}
