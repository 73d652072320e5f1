//! Reproducible sampling of compound-Poisson jump paths, reset times and
//! Wiener increments, plus the merged event timeline that drives the
//! event-by-event integrators.

use std::cmp::Ordering;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::levy_measure::LevyMeasureSpec;

/// Identifies one random stream: `(master seed, replication index, label)`.
///
/// The stream key is hashed into a 256-bit ChaCha seed, so every triple
/// gets its own generator and no state is shared between replications.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master: u64,
    pub path: u64,
    pub stream: String,
}

impl SeedSpec {
    pub fn new(master: u64, path: u64, stream: impl Into<String>) -> Self {
        Self {
            master,
            path,
            stream: stream.into(),
        }
    }

    /// Same master and path, different stream label.
    pub fn with_stream(&self, stream: impl Into<String>) -> Self {
        Self {
            master: self.master,
            path: self.path,
            stream: stream.into(),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"hylevy-stream-v1");
        h.update(self.master.to_le_bytes());
        h.update(self.path.to_le_bytes());
        h.update((self.stream.len() as u64).to_le_bytes());
        h.update(self.stream.as_bytes());
        let seed: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(seed)
    }
}

/// Stream label for the jumps of driving component `i`.
pub fn jump_stream(i: usize) -> String {
    format!("jumps:{i}")
}

/// Jump times and sizes of one compound-Poisson component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentJumps {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
}

impl ComponentJumps {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ_{s ≤ t} ΔL_s`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.sizes)
            .take_while(|(s, _)| **s <= t)
            .map(|(_, x)| x)
            .sum()
    }
}

/// Jumps of all `l` driving components over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub horizon: f64,
    pub components: Vec<ComponentJumps>,
}

impl JumpPath {
    pub fn empty(horizon: f64, components: usize) -> Self {
        Self {
            horizon,
            components: vec![ComponentJumps::default(); components],
        }
    }

    /// A path with explicitly placed jumps `(component, time, size)`.
    pub fn from_jumps(horizon: f64, components: usize, jumps: &[(usize, f64, f64)]) -> Result<Self> {
        let mut path = Self::empty(horizon, components);
        let mut sorted = jumps.to_vec();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (c, t, x) in sorted {
            if c >= components {
                return Err(invalid("component", format!("{c} out of range 0..{components}")));
            }
            if !(t > 0.0 && t <= horizon) {
                return Err(invalid("time", format!("jump time {t} outside (0, {horizon}]")));
            }
            let comp = &mut path.components[c];
            if comp.times.last().is_some_and(|&last| last >= t) {
                return Err(invalid("time", format!("duplicate jump time {t} in component {c}")));
            }
            comp.times.push(t);
            comp.sizes.push(x);
        }
        Ok(path)
    }

    pub fn total_jumps(&self) -> usize {
        self.components.iter().map(ComponentJumps::len).sum()
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    let n: f64 = d.sample(rng);
    n as usize
}

/// Uniform on `(0, horizon]`.
fn uniform_time<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> f64 {
    horizon * (1.0 - rng.random::<f64>())
}

/// One compound-Poisson component on `(0, horizon]`: a `Poisson(rate·T)`
/// count, sorted uniform times, i.i.d. sizes from the jump law.
pub fn sample_compound_poisson(spec: &LevyMeasureSpec, horizon: f64, seed: &SeedSpec) -> ComponentJumps {
    let mut rng = seed.rng();
    let n = poisson_count(spec.rate() * horizon, &mut rng);
    let mut times: Vec<f64> = (0..n).map(|_| uniform_time(horizon, &mut rng)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let sizes = (0..times.len()).map(|_| spec.sample_jump(&mut rng)).collect();
    ComponentJumps { times, sizes }
}

/// All components, component `i` drawn from stream `jumps:<i>` at `base`'s
/// master and path index.
pub fn sample_jump_path(specs: &[LevyMeasureSpec], horizon: f64, base: &SeedSpec) -> JumpPath {
    JumpPath {
        horizon,
        components: specs
            .iter()
            .enumerate()
            .map(|(i, s)| sample_compound_poisson(s, horizon, &base.with_stream(jump_stream(i))))
            .collect(),
    }
}

/// Either a homogeneous Poisson process or an explicit schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum ResetProcess {
    Poisson { rate: f64 },
    Schedule(Vec<f64>),
}

impl ResetProcess {
    pub fn none() -> Self {
        Self::Poisson { rate: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Poisson { rate } if !(rate.is_finite() && *rate >= 0.0) => {
                Err(invalid("reset rate", format!("must be finite and nonnegative, got {rate}")))
            }
            Self::Schedule(s) if s.iter().any(|t| !t.is_finite()) => Err(invalid("schedule", "non-finite reset time")),
            _ => Ok(()),
        }
    }
}

/// Poisson reset times, or the schedule sorted, deduplicated and clipped to
/// `(0, horizon]`.
pub fn sample_reset_times(process: &ResetProcess, horizon: f64, seed: &SeedSpec) -> Vec<f64> {
    match process {
        ResetProcess::Poisson { rate } => {
            let mut rng = seed.rng();
            let n = poisson_count(rate * horizon, &mut rng);
            let mut times: Vec<f64> = (0..n).map(|_| uniform_time(horizon, &mut rng)).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            times
        }
        ResetProcess::Schedule(s) => {
            let mut times: Vec<f64> = s.iter().copied().filter(|&t| t > 0.0 && t <= horizon).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            times
        }
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(invalid("grid", "need at least two time points"));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(invalid("grid", "non-finite time point"));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(invalid("grid", format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// Independent `N(0, Δt · I_dim)` increments for each grid interval.
pub fn wiener_increments(grid: &[f64], dim: usize, seed: &SeedSpec) -> Result<Vec<DVector<f64>>> {
    validate_grid(grid)?;
    if dim == 0 {
        return Err(invalid("dim", "must be positive"));
    }
    let mut rng = seed.rng();
    Ok(grid
        .windows(2)
        .map(|w| {
            let s = (w[1] - w[0]).sqrt();
            DVector::from_fn(dim, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
        })
        .collect())
}

/// Tagged entry of the merged timeline.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    GridSample { index: usize },
    Jump { component: usize, size: f64 },
    Reset,
}

impl EventKind {
    fn rank(&self) -> (u8, usize) {
        match *self {
            Self::GridSample { index } => (0, index),
            Self::Jump { component, .. } => (1, component),
            Self::Reset => (2, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Merges jumps, resets and grid samples into one sorted timeline.
///
/// Ties at equal times resolve as grid sample, then jumps by component
/// index, then reset, so a reset coinciding with a jump acts on the
/// post-jump state.
pub fn merge_events(jumps: &JumpPath, resets: &[f64], grid: &[f64]) -> Vec<Event> {
    let mut events: Vec<Event> = Vec::with_capacity(grid.len() + resets.len() + jumps.total_jumps());
    events.extend(grid.iter().enumerate().map(|(index, &time)| Event {
        time,
        kind: EventKind::GridSample { index },
    }));
    for (component, c) in jumps.components.iter().enumerate() {
        events.extend(c.times.iter().zip(&c.sizes).map(|(&time, &size)| Event {
            time,
            kind: EventKind::Jump { component, size },
        }));
    }
    events.extend(resets.iter().map(|&time| Event { time, kind: EventKind::Reset }));
    events.sort_by(|a, b| match a.time.total_cmp(&b.time) {
        Ordering::Equal => a.kind.rank().cmp(&b.kind.rank()),
        o => o,
    });
    events
}

/// `[0, T]` with `n` equal intervals.
pub fn uniform_grid(horizon: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|k| {
            if k == intervals {
                horizon
            } else {
                horizon * k as f64 / intervals as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_measure::JumpLaw;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn zero_rate_is_empty() {
        let spec = LevyMeasureSpec::zero();
        assert!(sample_compound_poisson(&spec, 5.0, &SeedSpec::new(1, 0, "jumps:0")).is_empty());
    }

    #[test]
    fn degenerate_law_sizes() {
        let spec = LevyMeasureSpec::new(5.0, JumpLaw::Atoms(vec![(1.0, 1.0)])).unwrap();
        for p in 0..50 {
            let c = sample_compound_poisson(&spec, 1.0, &SeedSpec::new(3, p, "jumps:0"));
            assert!(c.sizes.iter().all(|&s| s == 1.0));
            assert!(c.times.windows(2).all(|w| w[0] < w[1]));
            assert!(c.times.iter().all(|&t| t > 0.0 && t <= 1.0));
        }
    }

    #[test]
    fn jump_count_mean() {
        let spec = LevyMeasureSpec::new(3.0, JumpLaw::Normal { variance: 1.0 }).unwrap();
        let counts: Vec<f64> = (0..100_000)
            .map(|p| sample_compound_poisson(&spec, 2.0, &SeedSpec::new(9, p, "jumps:0")).len() as f64)
            .collect();
        let (m, se) = mean_se(&counts);
        assert!((m - 6.0).abs() <= 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn reset_times() {
        let s = SeedSpec::new(1, 0, "resets");
        assert!(sample_reset_times(&ResetProcess::none(), 10.0, &s).is_empty());
        assert_eq!(sample_reset_times(&ResetProcess::Schedule(vec![0.5, 1.5]), 1.0, &s), vec![0.5]);
        assert_eq!(
            sample_reset_times(&ResetProcess::Schedule(vec![0.7, 0.2, 0.7, 0.0]), 1.0, &s),
            vec![0.2, 0.7]
        );
        let counts: Vec<f64> = (0..100_000)
            .map(|p| sample_reset_times(&ResetProcess::Poisson { rate: 2.0 }, 5.0, &SeedSpec::new(2, p, "resets")).len() as f64)
            .collect();
        let (m, se) = mean_se(&counts);
        assert!((m - 10.0).abs() <= 3.0 * se);
    }

    #[test]
    fn wiener_single_interval_variance() {
        let draws: Vec<f64> = (0..100_000)
            .map(|p| wiener_increments(&[0.0, 4.0], 1, &SeedSpec::new(4, p, "wiener")).unwrap()[0][0])
            .collect();
        let sq: Vec<f64> = draws.iter().map(|x| x * x).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 4.0).abs() <= 3.0 * se);
    }

    #[test]
    fn wiener_partition_sums_to_unit_variance() {
        let grid = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let sq: Vec<f64> = (0..100_000)
            .map(|p| {
                let inc = wiener_increments(&grid, 1, &SeedSpec::new(5, p, "wiener")).unwrap();
                inc.iter().map(|v| v[0]).sum::<f64>().powi(2)
            })
            .collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 1.0).abs() <= 3.0 * se);
    }

    #[test]
    fn wiener_rejects_degenerate_interval() {
        assert!(wiener_increments(&[0.0, 1.0, 1.0], 1, &SeedSpec::new(0, 0, "w")).is_err());
    }

    #[test]
    fn merge_grid_only() {
        let ev = merge_events(&JumpPath::empty(1.0, 2), &[], &[0.0, 0.5, 1.0]);
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|e| matches!(e.kind, EventKind::GridSample { .. })));
    }

    #[test]
    fn merge_jump_before_reset() {
        let jumps = JumpPath::from_jumps(2.0, 1, &[(0, 1.0, 0.3)]).unwrap();
        let ev = merge_events(&jumps, &[1.0], &[0.0, 1.0, 2.0]);
        let at_one: Vec<_> = ev.iter().filter(|e| e.time == 1.0).map(|e| e.kind.clone()).collect();
        assert_eq!(
            at_one,
            vec![
                EventKind::GridSample { index: 1 },
                EventKind::Jump { component: 0, size: 0.3 },
                EventKind::Reset
            ]
        );
    }

    #[test]
    fn reproducible_streams() {
        let spec = LevyMeasureSpec::new(4.0, JumpLaw::Normal { variance: 1.0 }).unwrap();
        let s = SeedSpec::new(77, 12, "jumps:1");
        assert_eq!(sample_compound_poisson(&spec, 3.0, &s), sample_compound_poisson(&spec, 3.0, &s));
        assert_ne!(
            sample_compound_poisson(&spec, 3.0, &s),
            sample_compound_poisson(&spec, 3.0, &s.with_stream("jumps:2"))
        );
    }
}
