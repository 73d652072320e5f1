//! Scenario file schema (JSON) and its translation into library objects.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::hybrid_sys::{Containment, ResetMode, ResetSpec, ThetaProcessSpec};
use crate::levy_measure::{self, JumpLaw, LevyDensity, LevyMeasureSpec};
use crate::linalg::matrix_from_rows;
use crate::linear_sde::{NoiseSpec, SystemMatrices};
use crate::lyapunov_cert::ParametricFamily;
use crate::polynomial::Polynomial;
use crate::process_sim::{uniform_grid, ResetProcess};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ti,
    Desoer,
    ParamReset,
    StateReset,
    OracleProdexp,
    OracleDiscounted,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::Ti, Mode::Desoer, Mode::ParamReset, Mode::StateReset, Mode::OracleProdexp, Mode::OracleDiscounted];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ti => "ti",
            Mode::Desoer => "desoer",
            Mode::ParamReset => "param_reset",
            Mode::StateReset => "state_reset",
            Mode::OracleProdexp => "oracle_prodexp",
            Mode::OracleDiscounted => "oracle_discounted",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Mode::Ti => "time-invariant system, exact simulation, moment boundedness",
            Mode::Desoer => "slowly varying parameter on a certified family, moment boundedness",
            Mode::ParamReset => "parameter resets to theta0 at Poisson times, xi non-positivity and boundedness",
            Mode::StateReset => "state resets to x0 (empirical evidence for an open conjecture)",
            Mode::OracleProdexp => "Monte Carlo of E[prod(1 + f(dL))] against exp(t int f dnu)",
            Mode::OracleDiscounted => "Monte Carlo of E[sum exp(-alpha(t-s)) f(dL_s)] against its closed form",
        }
    }

    fn needs_orders(self) -> bool {
        !matches!(self, Mode::OracleProdexp | Mode::OracleDiscounted)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    pub paths: usize,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub orders: Vec<u32>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub theta: Option<ThetaConfig>,
    #[serde(default)]
    pub reset: Option<ResetConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTemplate {
    ScalarDecay,
    Companion,
    Affine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub template: FamilyTemplate,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub theta0: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub a0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub directions: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub alpha_floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform { height: f64, radius: f64 },
    PowerLaw { scale: f64, index: f64, radius: f64 },
    TemperedStable { scale: f64, index: f64, decay: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpConfig {
    Atoms { rate: f64, atoms: Vec<(f64, f64)> },
    Normal { rate: f64, variance: f64 },
    TwoPoint { rate: f64, magnitude: f64 },
    Cauchy { rate: f64, scale: f64 },
    Empirical { rate: f64, samples: Vec<f64> },
    Truncated { density: DensityConfig, epsilon: f64 },
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
    #[serde(default)]
    pub wiener: bool,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaDriftConfig {
    MeanReverting {
        kappa: f64,
        #[serde(default)]
        target: Option<Vec<f64>>,
    },
    Constant {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainmentConfig {
    Project,
    Fail,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    pub delta: f64,
    #[serde(default)]
    pub drift: Option<ThetaDriftConfig>,
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jump_loading: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub containment: Option<ContainmentConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetConfig {
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// `[[power, coefficient], ...]`.
    pub f: Vec<(u32, f64)>,
    pub t: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub jump: JumpConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Width, in standard errors, of statistical comparisons.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_drift")]
    pub drift: f64,
}

fn default_sigma() -> f64 {
    3.0
}

fn default_xi() -> f64 {
    1e-12
}

fn default_drift() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sigma: default_sigma(), xi: default_xi(), drift: default_drift() }
    }
}

pub const DEFAULT_BURN_IN: f64 = 0.2;
pub const DEFAULT_WINDOW: f64 = 0.2;
pub const DEFAULT_ALPHA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct OracleScenario {
    pub f: Polynomial,
    pub t: f64,
    pub alpha: Option<f64>,
    pub jump: LevyMeasureSpec,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct HybridScenario {
    pub mode: Mode,
    pub seed: u64,
    pub paths: usize,
    pub horizon: f64,
    pub grid: Vec<f64>,
    pub orders: Vec<u32>,
    pub step: f64,
    pub burn_in: f64,
    pub window: f64,
    pub x0: DVector<f64>,
    pub system: Option<SystemMatrices>,
    pub family: Option<ParametricFamily>,
    pub alpha_floor: f64,
    pub noise: NoiseSpec,
    pub theta: Option<ThetaProcessSpec>,
    pub reset: ResetSpec,
    pub oracle: Option<OracleScenario>,
    pub tolerances: Tolerances,
}

impl HybridScenario {
    pub fn max_order(&self) -> u32 {
        self.orders.iter().copied().max().unwrap_or(0)
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

fn schema(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Schema(msg.into())
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ExperimentError> {
    matrix_from_rows(rows).map_err(|e| schema(format!("{name}: {e}")))
}

fn require<T>(v: Option<T>, name: &str, mode: Mode) -> Result<T, ExperimentError> {
    v.ok_or_else(|| schema(format!("mode `{}` requires `{name}`", mode.name())))
}

fn density(cfg: &DensityConfig) -> LevyDensity {
    match *cfg {
        DensityConfig::Uniform { height, radius } => LevyDensity::Uniform { height, radius },
        DensityConfig::PowerLaw { scale, index, radius } => LevyDensity::PowerLaw { scale, index, radius },
        DensityConfig::TemperedStable { scale, index, decay } => LevyDensity::TemperedStable { scale, index, decay },
    }
}

pub fn jump_spec(cfg: &JumpConfig) -> Result<LevyMeasureSpec, ExperimentError> {
    let built = match cfg {
        JumpConfig::Atoms { rate, atoms } => LevyMeasureSpec::new(*rate, JumpLaw::Atoms(atoms.clone())),
        JumpConfig::Normal { rate, variance } => LevyMeasureSpec::new(*rate, JumpLaw::Normal { variance: *variance }),
        JumpConfig::TwoPoint { rate, magnitude } => LevyMeasureSpec::new(*rate, JumpLaw::TwoPoint { magnitude: *magnitude }),
        JumpConfig::Cauchy { rate, scale } => LevyMeasureSpec::new(*rate, JumpLaw::Cauchy { scale: *scale }),
        JumpConfig::Empirical { rate, samples } => LevyMeasureSpec::new(*rate, JumpLaw::Empirical(samples.clone())),
        JumpConfig::Truncated { density: d, epsilon } => levy_measure::truncate(&density(d), *epsilon),
        JumpConfig::None => Ok(LevyMeasureSpec::zero()),
    };
    built.map_err(|e| schema(format!("jump specification: {e}")))
}

fn build_grid(cfg: &ScenarioConfig, horizon: f64) -> Result<Vec<f64>, ExperimentError> {
    let grid = match &cfg.grid {
        None => uniform_grid(horizon, 50),
        Some(GridConfig { points: Some(p), step: None }) => p.clone(),
        Some(GridConfig { step: Some(s), points: None }) => {
            if !(s.is_finite() && *s > 0.0) {
                return Err(schema("grid.step must be positive"));
            }
            let n = (horizon / s).round();
            if (n * s - horizon).abs() > 1e-9 * horizon.max(1.0) || n < 1.0 {
                return Err(schema("grid.step must divide the horizon"));
            }
            uniform_grid(horizon, n as usize)
        }
        Some(_) => return Err(schema("grid needs exactly one of `step` or `points`")),
    };
    crate::process_sim::validate_grid(&grid).map_err(|e| schema(format!("grid: {e}")))?;
    if grid[0] != 0.0 {
        return Err(schema("grid must start at 0"));
    }
    if (grid[grid.len() - 1] - horizon).abs() > 0.0 {
        return Err(schema("grid must end at the horizon"));
    }
    Ok(grid)
}

fn build_family(cfg: &FamilyConfig) -> Result<(ParametricFamily, f64), ExperimentError> {
    let b = matrix("family.b", &cfg.b)?;
    let n = b.nrows();
    let c = match &cfg.c {
        Some(rows) => matrix("family.c", rows)?,
        None => DMatrix::zeros(n, 1),
    };
    let fam = match cfg.template {
        FamilyTemplate::ScalarDecay => {
            if cfg.lower.len() != 1 || cfg.upper.len() != 1 || cfg.theta0.len() != 1 {
                return Err(schema("scalar_decay takes a one-dimensional box"));
            }
            ParametricFamily::scalar_decay(cfg.lower[0], cfg.upper[0], cfg.theta0[0], b, c)
        }
        FamilyTemplate::Companion => {
            if cfg.lower.len() != n {
                return Err(schema("companion family: box dimension must equal the state dimension"));
            }
            ParametricFamily::companion(cfg.lower.clone(), cfg.upper.clone(), cfg.theta0.clone(), b, c)
        }
        FamilyTemplate::Affine => {
            let a0 = matrix("family.a0", cfg.a0.as_ref().ok_or_else(|| schema("affine family requires `a0`"))?)?;
            let dirs = cfg
                .directions
                .as_ref()
                .ok_or_else(|| schema("affine family requires `directions`"))?
                .iter()
                .map(|d| matrix("family.directions", d))
                .collect::<Result<Vec<_>, _>>()?;
            ParametricFamily::affine(a0, dirs, cfg.lower.clone(), cfg.upper.clone(), cfg.theta0.clone(), b, c)
        }
    }
    .map_err(|e| schema(format!("family: {e}")))?;
    let fam = match cfg.grid_points {
        Some(p) => fam.with_grid_points(p),
        None => fam,
    };
    Ok((fam, cfg.alpha_floor.unwrap_or(DEFAULT_ALPHA_FLOOR)))
}

fn build_theta(cfg: &ThetaConfig, family: &ParametricFamily, l: usize) -> Result<ThetaProcessSpec, ExperimentError> {
    let mut spec = ThetaProcessSpec::new(cfg.delta).map_err(|e| schema(format!("theta: {e}")))?;
    let d = family.dim();
    match &cfg.drift {
        Some(ThetaDriftConfig::MeanReverting { kappa, target }) => {
            let target = target.clone().unwrap_or_else(|| family.center());
            if target.len() != d {
                return Err(schema("theta.drift.target has the wrong dimension"));
            }
            spec = spec.with_mean_reversion(*kappa, target);
        }
        Some(ThetaDriftConfig::Constant { value }) => {
            if value.len() != d {
                return Err(schema("theta.drift.value has the wrong dimension"));
            }
            spec = spec.with_constant_drift(DVector::from_vec(value.clone()));
        }
        None => {}
    }
    if let Some(rows) = &cfg.diffusion {
        let s = matrix("theta.diffusion", rows)?;
        if s.nrows() != d {
            return Err(schema("theta.diffusion must have one row per parameter"));
        }
        spec = spec.with_constant_diffusion(s);
    }
    let jumps = cfg.jumps.iter().map(jump_spec).collect::<Result<Vec<_>, _>>()?;
    if let Some(rows) = &cfg.jump_loading {
        let r = matrix("theta.jump_loading", rows)?;
        if r.shape() != (d, l + jumps.len()) {
            return Err(schema(format!(
                "theta.jump_loading must be {d} x {} (shared jump components, then theta-only ones)",
                l + jumps.len()
            )));
        }
        spec = spec.with_constant_jump_loading(r);
    }
    spec = spec.with_theta_jumps(jumps);
    if let Some(init) = &cfg.initial {
        if !family.contains(init) {
            return Err(schema("theta.initial must lie in the box"));
        }
        spec = spec.with_initial(init.clone());
    }
    if let Some(ContainmentConfig::Fail) = cfg.containment {
        spec = spec.with_containment(Containment::Fail);
    }
    Ok(spec)
}

fn build_reset(cfg: Option<&ResetConfig>, mode: ResetMode) -> Result<ResetSpec, ExperimentError> {
    let process = match cfg {
        None => return Err(schema("this mode requires `reset`")),
        Some(ResetConfig { rate: Some(r), schedule: None }) => ResetProcess::Poisson { rate: *r },
        Some(ResetConfig { rate: None, schedule: Some(s) }) => ResetProcess::Schedule(s.clone()),
        Some(_) => return Err(schema("reset needs exactly one of `rate` or `schedule`")),
    };
    ResetSpec::new(mode, process).map_err(|e| schema(format!("reset: {e}")))
}

fn fraction(v: Option<f64>, default: f64, name: &str) -> Result<f64, ExperimentError> {
    let v = v.unwrap_or(default);
    if !(v.is_finite() && (0.0..1.0).contains(&v)) {
        return Err(schema(format!("{name} must lie in [0, 1)")));
    }
    Ok(v)
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| schema(format!("config does not parse: {e}")))
    }

    /// Checks the schema and builds every object the mode needs.
    pub fn build(&self) -> Result<HybridScenario, ExperimentError> {
        let mode = self.mode;
        if self.paths < 2 {
            return Err(schema("paths must be at least 2"));
        }
        let oracle = match (mode, &self.oracle) {
            (Mode::OracleProdexp | Mode::OracleDiscounted, Some(o)) => {
                let f = Polynomial::univariate(&o.f).map_err(|e| schema(format!("oracle.f: {e}")))?;
                f.ensure_jump_polynomial(u32::MAX).map_err(|e| schema(format!("oracle.f: {e}")))?;
                if !(o.t.is_finite() && o.t > 0.0) {
                    return Err(schema("oracle.t must be positive"));
                }
                let alpha = match mode {
                    Mode::OracleDiscounted => {
                        let a = require(o.alpha, "oracle.alpha", mode)?;
                        if !(a.is_finite() && a > 0.0) {
                            return Err(schema("oracle.alpha must be positive"));
                        }
                        Some(a)
                    }
                    _ => None,
                };
                Some(OracleScenario { f, t: o.t, alpha, jump: jump_spec(&o.jump)? })
            }
            (Mode::OracleProdexp | Mode::OracleDiscounted, None) => return Err(schema("oracle modes require `oracle`")),
            (_, Some(_)) => return Err(schema("`oracle` is only valid in oracle modes")),
            (_, None) => None,
        };
        let horizon = match (&oracle, self.horizon) {
            (Some(o), None) => o.t,
            (Some(o), Some(h)) if h != o.t => return Err(schema("horizon must equal oracle.t in oracle modes")),
            (_, Some(h)) => h,
            (None, None) => return Err(schema("`horizon` is required")),
        };
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(schema("horizon must be positive"));
        }
        let grid = build_grid(self, horizon)?;
        if mode.needs_orders() {
            if self.orders.is_empty() || self.orders.contains(&0) {
                return Err(schema("`orders` must be a non-empty list of positive integers"));
            }
        } else if !self.orders.is_empty() {
            return Err(schema("`orders` is not used by oracle modes"));
        }
        let step = self.step.unwrap_or(crate::hybrid_sys::DEFAULT_STEP);
        if !(step.is_finite() && step > 0.0) {
            return Err(schema("step must be positive"));
        }

        let (system, family, alpha_floor) = match mode {
            Mode::Ti | Mode::StateReset => {
                if self.family.is_some() {
                    return Err(schema(format!("mode `{}` takes `system`, not `family`", mode.name())));
                }
                let s = require(self.system.as_ref(), "system", mode)?;
                let a = matrix("system.a", &s.a)?;
                let b = matrix("system.b", &s.b)?;
                let c = match &s.c {
                    Some(rows) => matrix("system.c", rows)?,
                    None => DMatrix::zeros(a.nrows(), 1),
                };
                let sys = SystemMatrices::new(a, b, c).map_err(|e| schema(format!("system: {e}")))?;
                (Some(sys), None, DEFAULT_ALPHA_FLOOR)
            }
            Mode::Desoer | Mode::ParamReset => {
                if self.system.is_some() {
                    return Err(schema(format!("mode `{}` takes `family`, not `system`", mode.name())));
                }
                let (fam, floor) = build_family(require(self.family.as_ref(), "family", mode)?)?;
                let sys = fam.system_at(&fam.theta0).map_err(|e| schema(format!("family: {e}")))?;
                (Some(sys), Some(fam), floor)
            }
            Mode::OracleProdexp | Mode::OracleDiscounted => (None, None, DEFAULT_ALPHA_FLOOR),
        };

        let (noise, x0) = match &system {
            Some(sys) => {
                let nc = self.noise.clone().unwrap_or(NoiseConfig { jumps: Vec::new(), wiener: false, drift: None });
                let mut jumps = nc.jumps.iter().map(jump_spec).collect::<Result<Vec<_>, _>>()?;
                if nc.jumps.is_empty() {
                    jumps = vec![LevyMeasureSpec::zero(); sys.l()];
                }
                let mut noise = NoiseSpec::new(jumps, nc.wiener);
                noise.drift = nc.drift.map(DVector::from_vec);
                noise.check_against(sys).map_err(|e| schema(format!("noise: {e}")))?;
                let x0 = DVector::from_vec(require(self.x0.clone(), "x0", mode)?);
                if x0.len() != sys.n() {
                    return Err(schema(format!("x0 has length {}, the state has dimension {}", x0.len(), sys.n())));
                }
                (noise, x0)
            }
            None => {
                if self.noise.is_some() || self.x0.is_some() {
                    return Err(schema("oracle modes take their jump law from `oracle.jump`"));
                }
                (NoiseSpec::new(vec![oracle.as_ref().expect("oracle mode").jump.clone()], false), DVector::zeros(1))
            }
        };

        let theta = match (mode, &self.theta, &family) {
            (Mode::Desoer | Mode::ParamReset, Some(t), Some(fam)) => Some(build_theta(t, fam, noise.jumps.len())?),
            (Mode::Desoer | Mode::ParamReset, None, Some(_)) => Some(ThetaProcessSpec::new(0.0).expect("zero delta")),
            (_, Some(_), _) => return Err(schema("`theta` is only valid in desoer and param_reset modes")),
            _ => None,
        };
        let reset = match mode {
            Mode::ParamReset => build_reset(self.reset.as_ref(), ResetMode::Parameter)?,
            Mode::StateReset => build_reset(self.reset.as_ref(), ResetMode::State)?,
            _ => {
                if self.reset.is_some() {
                    return Err(schema("`reset` is only valid in param_reset and state_reset modes"));
                }
                ResetSpec::none()
            }
        };
        let t = &self.tolerances;
        if !(t.sigma > 0.0 && t.xi >= 0.0 && t.drift >= 0.0) {
            return Err(schema("tolerances must be nonnegative (sigma positive)"));
        }
        Ok(HybridScenario {
            mode,
            seed: self.seed,
            paths: self.paths,
            horizon,
            grid,
            orders: self.orders.clone(),
            step,
            burn_in: fraction(self.burn_in, DEFAULT_BURN_IN, "burn_in")?,
            window: fraction(self.window, DEFAULT_WINDOW, "window")?,
            x0,
            system,
            family,
            alpha_floor,
            noise,
            theta,
            reset,
            oracle,
            tolerances: t.clone(),
        })
    }
}
