//! Window-comparison trend test used as a statistical surrogate for
//! `sup_t E[V_t] < ∞`.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 10;
/// Growth is declared beyond this many pooled standard errors.
pub const GROWTH_SIGMAS: f64 = 3.0;
/// Inconclusive when the pooled SE exceeds this fraction of the middle mean.
pub const INCONCLUSIVE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundedConsistent,
    GrowthDetected,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::BoundedConsistent => "bounded-consistent",
            Verdict::GrowthDetected => "growth-detected",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessResult {
    pub verdict: Verdict,
    pub points: usize,
    pub window_points: usize,
    pub middle_mean: f64,
    pub last_mean: f64,
    pub pooled_se: f64,
}

/// Compares the mean of the last `window`-fraction of the post-burn-in
/// points against the mean of the centered middle window.
///
/// Each window's SE is the average of its per-point SEs, which does not
/// assume independence across times.
pub fn boundedness_test(estimates: &[f64], ses: &[f64], burn_in: f64, window: f64) -> Result<BoundednessResult> {
    if estimates.len() != ses.len() {
        return Err(crate::error::invalid("ses", "one SE per estimate"));
    }
    if !(0.0..1.0).contains(&burn_in) || !(window > 0.0 && window <= 0.5) {
        return Err(crate::error::invalid("window", "need burn_in in [0, 1) and window in (0, 0.5]"));
    }
    let skip = (burn_in * estimates.len() as f64).floor() as usize;
    boundedness_after(&estimates[skip..], &ses[skip..], window)
}

/// As [`boundedness_test`], with the burn-in already removed.
pub fn boundedness_after(estimates: &[f64], ses: &[f64], window: f64) -> Result<BoundednessResult> {
    let m = estimates.len();
    if m < MIN_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_POINTS, have: m });
    }
    let k = ((window * m as f64).round() as usize).clamp(1, m / 2);
    let mid_start = (m - k) / 2;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let middle_mean = mean(&estimates[mid_start..mid_start + k]);
    let last_mean = mean(&estimates[m - k..]);
    let se_mid = mean(&ses[mid_start..mid_start + k]);
    let se_last = mean(&ses[m - k..]);
    let pooled_se = (se_mid * se_mid + se_last * se_last).sqrt();
    let finite = estimates[mid_start..].iter().chain(&ses[mid_start..]).all(|v| v.is_finite());
    let verdict = if !finite {
        Verdict::GrowthDetected
    } else if pooled_se > INCONCLUSIVE_RATIO * middle_mean.abs() {
        Verdict::Inconclusive
    } else if last_mean > middle_mean + GROWTH_SIGMAS * pooled_se {
        Verdict::GrowthDetected
    } else {
        Verdict::BoundedConsistent
    };
    Ok(BoundednessResult { verdict, points: m, window_points: k, middle_mean, last_mean, pooled_se })
}
