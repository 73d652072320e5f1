//! Report structures and the CSV/JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::boundedness::BoundednessResult;
use super::ExperimentError;
use crate::oracles::McEstimate;

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessEntry {
    pub q: u32,
    /// `v_moment` = `E[(1 + XᵀPX)^{q/2}]`.
    pub quantity: String,
    #[serde(flatten)]
    pub result: BoundednessResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricSummary {
    pub grid_points: usize,
    pub min_alpha: f64,
    pub min_ordering_gap: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    /// `"lyapunov"`, `"parametric"` or `"identity"` (no certificate).
    pub kind: String,
    pub alpha: Option<f64>,
    pub residual: Option<f64>,
    pub p: Vec<Vec<f64>>,
    pub parametric: Option<ParametricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub formula: String,
    pub digest: String,
    pub t: f64,
    pub oracle: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryComparison {
    pub formula: String,
    pub digest: String,
    /// `1 + tr(P (Σ + m mᵀ))`, the stationary value of `E[V]` at q = 2.
    pub oracle_v2: f64,
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetSummary {
    pub count: usize,
    pub max_xi: Option<f64>,
    pub mean_per_path: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaSummary {
    pub delta: f64,
    pub step: f64,
    pub max_load: f64,
    pub clipped_steps: usize,
    pub projections: usize,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSummary {
    pub path: u64,
    pub alpha: f64,
    pub q: f64,
    pub tol: f64,
    pub passed: bool,
    pub worst_margin: f64,
    pub intervals: usize,
    pub failed_intervals: usize,
    pub qv_max_rate: Option<f64>,
    pub qv_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub mode: String,
    pub description: String,
    pub master_seed: u64,
    pub paths: usize,
    pub horizon: f64,
    pub config_digest: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub boundedness: Vec<BoundednessEntry>,
    pub certificate: Option<CertificateSummary>,
    pub oracle: Option<OracleComparison>,
    pub stationary: Option<StationaryComparison>,
    pub resets: Option<ResetSummary>,
    pub theta: Option<ThetaSummary>,
    pub drift_check: Option<DriftSummary>,
    pub notes: Vec<String>,
}

/// Moment estimates on the report grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub times: Vec<f64>,
    pub orders: Vec<u32>,
    /// `[grid index][order index]`.
    pub v: Vec<Vec<McEstimate>>,
    pub x: Vec<Vec<McEstimate>>,
}

impl MomentTable {
    pub fn v_series(&self, qi: usize) -> (Vec<f64>, Vec<f64>) {
        (self.v.iter().map(|r| r[qi].mean).collect(), self.v.iter().map(|r| r[qi].se).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,q,v_moment,v_se,x_moment,x_se\n");
        for (g, t) in self.times.iter().enumerate() {
            for (qi, q) in self.orders.iter().enumerate() {
                let (v, x) = (self.v[g][qi], self.x[g][qi]);
                let _ = writeln!(s, "{},{q},{},{},{},{}", num(*t), num(v.mean), num(v.se), num(x.mean), num(x.se));
            }
        }
        s
    }
}

/// Monte Carlo against oracle values on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub times: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    pub oracle: Vec<f64>,
}

impl OracleTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,estimate,se,oracle,z\n");
        for ((t, e), o) in self.times.iter().zip(&self.estimates).zip(&self.oracle) {
            let z = if e.se > 0.0 { (e.mean - o) / e.se } else { 0.0 };
            let _ = writeln!(s, "{},{},{},{},{}", num(*t), num(e.mean), num(e.se), num(*o), num(z));
        }
        s
    }
}

/// One exemplar path as `(t, values..., event)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>, String)>,
}

impl SampleTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push_str(",event\n");
        for (t, vals, ev) in &self.rows {
            s.push_str(&num(*t));
            for v in vals {
                let _ = write!(s, ",{}", num(*v));
            }
            let _ = writeln!(s, ",{ev}");
        }
        s
    }
}

pub const TRAJECTORY_FILE: &str = "trajectory_sample.csv";
pub const MOMENTS_FILE: &str = "moments.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const REPORT_FILE: &str = "report.json";

fn write(dir: &Path, name: &str, content: &str) -> Result<(), ExperimentError> {
    fs::write(dir.join(name), content).map_err(|e| ExperimentError::Io(format!("writing {name}: {e}")))
}

pub fn write_outputs(
    dir: &Path,
    report: &Report,
    moments: &MomentTable,
    oracle: Option<&OracleTable>,
    sample: &SampleTable,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("creating {}: {e}", dir.display())))?;
    write(dir, TRAJECTORY_FILE, &sample.to_csv())?;
    write(dir, MOMENTS_FILE, &moments.to_csv())?;
    if let Some(o) = oracle {
        write(dir, ORACLE_FILE, &o.to_csv())?;
    }
    let mut json = serde_json::to_string_pretty(report).map_err(|e| ExperimentError::Io(format!("serializing report: {e}")))?;
    json.push('\n');
    write(dir, REPORT_FILE, &json)
}
