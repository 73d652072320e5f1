//! Mode pipelines: simulate replications, estimate moments, test
//! boundedness, compare against oracles and assemble the report.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::boundedness::{boundedness_test, Verdict};
use super::config::{HybridScenario, Mode, ScenarioConfig};
use super::report::*;
use super::ExperimentError;
use crate::drift_monitor::verify_drift_inequality;
use crate::error::Error;
use crate::hybrid_sys::{simulate_parameter_reset, simulate_parameter_varying, simulate_state_reset};
use crate::levy_measure::moment_condition_check;
use crate::linear_sde::{simulate_ti, Trajectory};
use crate::lyapunov_cert::{certify, parametric_certificate, ParametricCertificate};
use crate::oracles::{self, summarize, McEstimate};
use crate::process_sim::{jump_stream, sample_compound_poisson, EventKind, SeedSpec};

/// CLI-level overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub moments: MomentTable,
    pub oracle: Option<OracleTable>,
    pub sample: SampleTable,
}

impl RunOutcome {
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        write_outputs(dir, &self.report, &self.moments, self.oracle.as_ref(), &self.sample)
    }

    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

pub fn config_digest(text: &str) -> String {
    oracles::digest_of(text)
}

/// Reads, validates and builds a scenario.
pub fn load_scenario(path: &Path, opts: &RunOptions) -> Result<(HybridScenario, String), ExperimentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(p) = opts.paths {
        cfg.paths = p;
    }
    let scenario = cfg.build()?;
    Ok((scenario, config_digest(&text)))
}

/// Schema check plus the preconditions that gate a run, without simulating.
pub fn validate_scenario(scenario: &HybridScenario) -> Result<(), ExperimentError> {
    check_moments(scenario)?;
    prepare_certificate(scenario).map(|_| ())
}

pub fn run_config_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, ExperimentError> {
    let (scenario, digest) = load_scenario(path, opts)?;
    run_scenario(&scenario, &digest)
}

fn check_moments(s: &HybridScenario) -> Result<(), ExperimentError> {
    let order = match &s.oracle {
        Some(o) => o.f.degree(),
        None => 2 * s.max_order(),
    };
    let theta_jumps = s.theta.as_ref().map(|t| t.jumps.as_slice()).unwrap_or(&[]);
    for (i, spec) in s.noise.jumps.iter().chain(theta_jumps).enumerate() {
        let check = moment_condition_check(spec, order);
        if let Some(k) = check.failing_order {
            return Err(ExperimentError::Precondition(format!(
                "moment condition of order {order} fails at order {k} for jump component {i}"
            )));
        }
    }
    Ok(())
}

enum Lyapunov {
    Fixed { p: DMatrix<f64>, alpha: Option<f64>, residual: Option<f64>, kind: &'static str },
    Parametric(ParametricCertificate),
}

impl Lyapunov {
    fn p(&self) -> &DMatrix<f64> {
        match self {
            Lyapunov::Fixed { p, .. } => p,
            Lyapunov::Parametric(c) => c.p0(),
        }
    }

    fn summary(&self) -> CertificateSummary {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        match self {
            Lyapunov::Fixed { p, alpha, residual, kind } => CertificateSummary {
                kind: (*kind).into(),
                alpha: *alpha,
                residual: *residual,
                p: rows(p),
                parametric: None,
            },
            Lyapunov::Parametric(c) => {
                let g = c.summary();
                CertificateSummary {
                    kind: "parametric".into(),
                    alpha: Some(c.alpha()),
                    residual: Some(g.max_residual),
                    p: rows(c.p0()),
                    parametric: Some(ParametricSummary {
                        grid_points: g.points,
                        min_alpha: g.min_alpha,
                        min_ordering_gap: g.min_ordering_gap,
                        max_residual: g.max_residual,
                    }),
                }
            }
        }
    }
}

fn prepare_certificate(s: &HybridScenario) -> Result<Option<Lyapunov>, ExperimentError> {
    let pre = |e: Error| ExperimentError::Precondition(format!("certificate: {e}"));
    match s.mode {
        Mode::Ti => {
            let sys = s.system.as_ref().expect("ti has a system");
            let c = certify(&sys.a).map_err(pre)?;
            Ok(Some(Lyapunov::Fixed { p: c.p, alpha: Some(c.alpha), residual: Some(c.residual), kind: "lyapunov" }))
        }
        Mode::StateReset => {
            let sys = s.system.as_ref().expect("state_reset has a system");
            Ok(Some(match certify(&sys.a) {
                Ok(c) => Lyapunov::Fixed { p: c.p, alpha: Some(c.alpha), residual: Some(c.residual), kind: "lyapunov" },
                Err(Error::Unstable { .. }) => {
                    Lyapunov::Fixed { p: DMatrix::identity(sys.n(), sys.n()), alpha: None, residual: None, kind: "identity" }
                }
                Err(e) => return Err(pre(e)),
            }))
        }
        Mode::Desoer | Mode::ParamReset => {
            let fam = s.family.as_ref().expect("family modes have a family");
            Ok(Some(Lyapunov::Parametric(parametric_certificate(fam, s.alpha_floor).map_err(pre)?)))
        }
        Mode::OracleProdexp | Mode::OracleDiscounted => Ok(None),
    }
}

/// Per-replication output of the simulation modes.
struct PathOut {
    /// `[grid][order][v, x]`, flattened.
    moments: Vec<f64>,
    resets: usize,
    max_xi: f64,
    max_load: f64,
    clipped: usize,
    projections: usize,
}

struct Simulated {
    trajectory: Trajectory,
    /// `(time, ξ, X_t)`; ξ is NaN outside parameter resetting.
    resets: Vec<(f64, f64, Vec<f64>)>,
    max_load: f64,
    clipped: usize,
    projections: usize,
}

fn simulate_one(s: &HybridScenario, lyap: &Lyapunov, seed: &SeedSpec) -> Result<Simulated, Error> {
    let sys = s.system.as_ref().expect("simulation mode");
    match s.mode {
        Mode::Ti => Ok(Simulated {
            trajectory: simulate_ti(sys, &s.noise, &s.x0, &s.grid, seed)?,
            resets: Vec::new(),
            max_load: 0.0,
            clipped: 0,
            projections: 0,
        }),
        Mode::StateReset => {
            let out = simulate_state_reset(sys, &s.reset, &s.noise, &s.x0, &s.grid, seed)?;
            Ok(Simulated {
                resets: out.resets.iter().map(|r| (r.time, f64::NAN, r.state_before.clone())).collect(),
                trajectory: out.trajectory,
                max_load: 0.0,
                clipped: 0,
                projections: 0,
            })
        }
        Mode::Desoer | Mode::ParamReset => {
            let fam = s.family.as_ref().expect("family mode");
            let theta = s.theta.as_ref().expect("family mode");
            let out = match (s.mode, lyap) {
                (Mode::ParamReset, Lyapunov::Parametric(cert)) => {
                    simulate_parameter_reset(cert, theta, &s.reset, &s.noise, &s.x0, &s.grid, s.step, seed)?
                }
                _ => simulate_parameter_varying(fam, theta, &s.noise, &s.x0, &s.grid, s.step, seed)?,
            };
            Ok(Simulated {
                resets: out.resets.iter().map(|r| (r.time, r.xi, r.state.clone())).collect(),
                trajectory: out.trajectory,
                max_load: out.theta.max_load,
                clipped: out.theta.clipped_steps,
                projections: out.theta.projections,
            })
        }
        Mode::OracleProdexp | Mode::OracleDiscounted => unreachable!("oracle modes do not simulate the state"),
    }
}

fn moments_of(traj: &Trajectory, p: &DMatrix<f64>, orders: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.states.len() * orders.len() * 2);
    for x in &traj.states {
        let w = 1.0 + x.dot(&(p * x));
        let r = x.norm();
        for &q in orders {
            out.push(w.powf(q as f64 / 2.0));
            out.push(r.powi(q as i32));
        }
    }
    out
}

fn state_sample(traj: &Trajectory, resets: &[(f64, f64, Vec<f64>)], param_resets: bool) -> SampleTable {
    let n = traj.dim();
    let columns = (1..=n).map(|i| format!("x{i}")).collect();
    let vec = |x: &DVector<f64>| x.iter().copied().collect::<Vec<f64>>();
    let mut rows: Vec<(f64, u8, Vec<f64>, String)> = Vec::new();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        rows.push((*t, 0, vec(x), "grid".into()));
    }
    for e in &traj.events {
        let tag = match e.kind {
            EventKind::Jump { component, .. } => format!("jump:{component}"),
            EventKind::Reset => "reset".into(),
            EventKind::GridSample { .. } => continue,
        };
        let rank = if matches!(e.kind, EventKind::Reset) { 2 } else { 1 };
        rows.push((e.time, rank, vec(&e.before), format!("{tag}-")));
        rows.push((e.time, rank, vec(&e.after), tag));
    }
    if param_resets {
        // θ resets leave X unchanged; the row marks the time.
        for (t, _, x) in resets {
            rows.push((*t, 2, x.clone(), "reset:theta".into()));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    SampleTable { columns, rows: rows.into_iter().map(|(t, _, v, e)| (t, v, e)).collect() }
}

pub fn run_scenario(s: &HybridScenario, digest: &str) -> Result<RunOutcome, ExperimentError> {
    check_moments(s)?;
    let lyap = prepare_certificate(s)?;
    match lyap {
        None => run_oracle(s, digest),
        Some(l) => run_simulation(s, &l, digest),
    }
}

fn base_report(s: &HybridScenario, digest: &str) -> Report {
    Report {
        mode: s.mode.name().into(),
        description: s.mode.description().into(),
        master_seed: s.seed,
        paths: s.paths,
        horizon: s.horizon,
        config_digest: digest.into(),
        passed: false,
        assertions: Vec::new(),
        boundedness: Vec::new(),
        certificate: None,
        oracle: None,
        stationary: None,
        resets: None,
        theta: None,
        drift_check: None,
        notes: Vec::new(),
    }
}

const SURROGATE_NOTE: &str = "boundedness verdicts are a statistical surrogate for sup_t E[V_t] < inf: \
the mean of the last window is compared with the middle window at 3 pooled standard errors";

fn run_simulation(s: &HybridScenario, lyap: &Lyapunov, digest: &str) -> Result<RunOutcome, ExperimentError> {
    let p = lyap.p().clone();
    let sim_err = |e: Error| ExperimentError::Simulation(e.to_string());
    let outs: Vec<PathOut> = (0..s.paths as u64)
        .into_par_iter()
        .map(|i| {
            let seed = SeedSpec::new(s.seed, i, "");
            let sim = simulate_one(s, lyap, &seed)?;
            Ok(PathOut {
                moments: moments_of(&sim.trajectory, &p, &s.orders),
                resets: sim.resets.len(),
                max_xi: sim.resets.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
                max_load: sim.max_load,
                clipped: sim.clipped,
                projections: sim.projections,
            })
        })
        .collect::<Result<_, Error>>()
        .map_err(sim_err)?;

    let g = s.grid.len();
    let nq = s.orders.len();
    let column = |j: usize| summarize(&outs.iter().map(|o| o.moments[j]).collect::<Vec<_>>());
    let mut v = vec![Vec::with_capacity(nq); g];
    let mut x = vec![Vec::with_capacity(nq); g];
    for gi in 0..g {
        for qi in 0..nq {
            let base = (gi * nq + qi) * 2;
            v[gi].push(column(base));
            x[gi].push(column(base + 1));
        }
    }
    let moments = MomentTable { times: s.grid.clone(), orders: s.orders.clone(), v, x };

    let mut report = base_report(s, digest);
    report.certificate = Some(lyap.summary());
    report.notes.push(SURROGATE_NOTE.into());

    for (qi, &q) in s.orders.iter().enumerate() {
        let (est, se) = moments.v_series(qi);
        let result = boundedness_test(&est, &se, s.burn_in, s.window)
            .map_err(|e| ExperimentError::Schema(format!("report grid: {e}")))?;
        report.assertions.push(Assertion::new(
            format!("bounded_q{q}"),
            result.verdict == Verdict::BoundedConsistent,
            format!(
                "{}: last {} vs middle {} (pooled SE {})",
                result.verdict.as_str(),
                num(result.last_mean),
                num(result.middle_mean),
                num(result.pooled_se)
            ),
        ));
        report.boundedness.push(BoundednessEntry { q, quantity: "v_moment".into(), result });
    }

    let total_resets: usize = outs.iter().map(|o| o.resets).sum();
    match s.mode {
        Mode::ParamReset => {
            let max_xi = outs.iter().map(|o| o.max_xi).fold(f64::NEG_INFINITY, f64::max);
            let max_xi = (total_resets > 0).then_some(max_xi);
            report.assertions.push(Assertion::new(
                "xi_nonpositive",
                max_xi.is_none_or(|m| m <= s.tolerances.xi),
                format!(
                    "max xi over {total_resets} resets: {} (tolerance {})",
                    max_xi.map_or("none".into(), num),
                    num(s.tolerances.xi)
                ),
            ));
            report.resets =
                Some(ResetSummary { count: total_resets, max_xi, mean_per_path: total_resets as f64 / s.paths as f64 });
        }
        Mode::StateReset => {
            report.resets =
                Some(ResetSummary { count: total_resets, max_xi: None, mean_per_path: total_resets as f64 / s.paths as f64 });
            report.notes.push(
                "state resetting: these verdicts are empirical evidence for an open conjecture, not a verification".into(),
            );
            if matches!(lyap, Lyapunov::Fixed { kind: "identity", .. }) {
                report.notes.push("A is not Hurwitz: V uses P = I and the run is outside the studied regime".into());
            }
        }
        _ => {}
    }
    if let (Some(theta), Mode::Desoer | Mode::ParamReset) = (&s.theta, s.mode) {
        let max_load = outs.iter().map(|o| o.max_load).fold(0.0, f64::max);
        let frozen = theta.is_frozen();
        report.theta = Some(ThetaSummary {
            delta: theta.delta,
            step: s.step,
            max_load,
            clipped_steps: outs.iter().map(|o| o.clipped).sum(),
            projections: outs.iter().map(|o| o.projections).sum(),
            frozen,
        });
        if !frozen {
            report.assertions.push(Assertion::new(
                "slow_variation",
                max_load < theta.delta,
                format!("max |beta|^2 + |sigma|^2 + |rho|^2 = {} against delta = {}", num(max_load), num(theta.delta)),
            ));
        }
    }

    // Exemplar path, rerun alone so it matches replication 0 exactly.
    let seed0 = SeedSpec::new(s.seed, 0, "");
    let exemplar = simulate_one(s, lyap, &seed0).map_err(sim_err)?;
    let sample = state_sample(&exemplar.trajectory, &exemplar.resets, s.mode == Mode::ParamReset);

    if let (Mode::Ti, Lyapunov::Fixed { p, alpha: Some(alpha), .. }) = (s.mode, lyap) {
        let sys = s.system.as_ref().expect("ti system");
        if s.noise.drift.is_none() {
            let c = s.noise.wiener.then_some(&sys.c);
            let d = verify_drift_inequality(&exemplar.trajectory, &sys.a, c, p, *alpha, 2.0, s.tolerances.drift)
                .map_err(sim_err)?;
            if !s.noise.wiener {
                report.assertions.push(Assertion::new(
                    "drift_inequality",
                    d.passed,
                    format!("worst normalized margin {} on {} intervals of path 0", num(d.worst_margin), d.intervals.len()),
                ));
            }
            report.drift_check = Some(DriftSummary {
                path: 0,
                alpha: *alpha,
                q: 2.0,
                tol: s.tolerances.drift,
                passed: d.passed,
                worst_margin: d.worst_margin,
                intervals: d.intervals.len(),
                failed_intervals: d.failed_intervals,
                qv_max_rate: d.quadratic_variation.as_ref().map(|q| q.max_rate),
                qv_gamma: d.quadratic_variation.as_ref().map(|q| q.gamma),
            });
        }
        report.stationary = stationary_comparison(s, p, &moments);
    }

    report.passed = report.assertions.iter().all(|a| a.passed);
    Ok(RunOutcome { report, moments, oracle: None, sample })
}

fn stationary_comparison(s: &HybridScenario, p: &DMatrix<f64>, moments: &MomentTable) -> Option<StationaryComparison> {
    let qi = s.orders.iter().position(|&q| q == 2)?;
    if s.noise.drift.is_some() {
        return None;
    }
    let sys = s.system.as_ref()?;
    let c = if s.noise.wiener { sys.c.clone() } else { DMatrix::zeros(sys.n(), 0) };
    let sigma = oracles::stationary_covariance(&sys.a, &sys.b, &c, &s.noise.jumps).ok()?;
    let mean = oracles::stationary_mean(&sys.a, &sys.b, &s.noise.jumps).ok()?;
    let second = sigma + &mean * mean.transpose();
    let oracle_v2 = 1.0 + (p * second).trace();
    let last = moments.v.last()?[qi];
    Some(StationaryComparison {
        formula: oracles::STATIONARY_FORMULA.into(),
        digest: oracles::digest_of(&format!("stationary|{:?}|{:?}|{:?}", sys, s.noise.jumps, s.noise.wiener)),
        oracle_v2,
        t: *moments.times.last()?,
        estimate: last.mean,
        se: last.se,
        z: if last.se > 0.0 { (last.mean - oracle_v2) / last.se } else { 0.0 },
    })
}

fn run_oracle(s: &HybridScenario, digest: &str) -> Result<RunOutcome, ExperimentError> {
    let o = s.oracle.as_ref().expect("oracle mode");
    let spec = &o.jump;
    let grid = &s.grid;
    let rows: Vec<Vec<f64>> = (0..s.paths as u64)
        .into_par_iter()
        .map(|i| {
            let jumps = sample_compound_poisson(spec, o.t, &SeedSpec::new(s.seed, i, "").with_stream(jump_stream(0)));
            grid.iter()
                .map(|&t| match o.alpha {
                    None => oracles::product_functional(&jumps, &o.f, t),
                    Some(a) => oracles::discounted_functional(&jumps, &o.f, a, t),
                })
                .collect()
        })
        .collect();
    let estimates: Vec<McEstimate> =
        (0..grid.len()).map(|j| summarize(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
    let oracle_at = |t: f64| match o.alpha {
        None => oracles::prod_exp_expectation(spec, &o.f, t),
        Some(a) => oracles::discounted_jump_sum_expectation(spec, &o.f, a, t),
    };
    let oracle_values =
        grid.iter().map(|&t| oracle_at(t).map(|r| r.value)).collect::<Result<Vec<_>, _>>().map_err(|e| {
            ExperimentError::Precondition(format!("oracle: {e}"))
        })?;
    let final_oracle = oracle_at(o.t).map_err(|e| ExperimentError::Precondition(format!("oracle: {e}")))?;
    let last = *estimates.last().expect("non-empty grid");
    let z = if last.se > 0.0 { (last.mean - final_oracle.value) / last.se } else { 0.0 };
    let within = (last.mean - final_oracle.value).abs() <= s.tolerances.sigma * last.se;

    let mut report = base_report(s, digest);
    report.assertions.push(Assertion::new(
        "oracle_agreement",
        within,
        format!(
            "|MC - oracle| = {} against {} SE = {}",
            num((last.mean - final_oracle.value).abs()),
            num(s.tolerances.sigma),
            num(s.tolerances.sigma * last.se)
        ),
    ));
    report.oracle = Some(OracleComparison {
        formula: final_oracle.formula.clone(),
        digest: final_oracle.digest.clone(),
        t: o.t,
        oracle: final_oracle.value,
        estimate: last.mean,
        se: last.se,
        z,
        within_tolerance: within,
    });
    report.notes.push("oracle modes write oracle.csv; moments.csv carries only its header".into());
    report.passed = within;

    let path0 = sample_compound_poisson(spec, o.t, &SeedSpec::new(s.seed, 0, "").with_stream(jump_stream(0)));
    let mut sample_rows: Vec<(f64, u8, Vec<f64>, String)> =
        grid.iter().map(|&t| (t, 0, vec![path0.value_at(t)], "grid".to_string())).collect();
    for (t, _) in path0.times.iter().zip(&path0.sizes) {
        let after = path0.value_at(*t);
        let before = after - path0.sizes[path0.times.partition_point(|s| s < t)];
        sample_rows.push((*t, 1, vec![before], "jump:0-".into()));
        sample_rows.push((*t, 1, vec![after], "jump:0".into()));
    }
    sample_rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sample = SampleTable {
        columns: vec!["l1".into()],
        rows: sample_rows.into_iter().map(|(t, _, v, e)| (t, v, e)).collect(),
    };
    Ok(RunOutcome {
        report,
        moments: MomentTable { times: Vec::new(), orders: Vec::new(), v: Vec::new(), x: Vec::new() },
        oracle: Some(OracleTable { times: grid.clone(), estimates, oracle: oracle_values }),
        sample,
    })
}
