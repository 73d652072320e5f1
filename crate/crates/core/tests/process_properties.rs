mod common;

use hylevy::levy_measure::{truncate, JumpLaw, LevyDensity, LevyMeasureSpec};
use hylevy::linear_sde::{simulate_ti, NoiseSpec, SystemMatrices, Transition};
use hylevy::process_sim::{
    merge_events, sample_compound_poisson, sample_jump_path, uniform_grid, wiener_increments, EventKind, JumpPath,
    SeedSpec,
};
use hylevy::{prod_exp_expectation, Polynomial};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Pearson statistic over bins with expected count ≥ 5, tails pooled.
fn poisson_chi_square(counts: &[usize], mean: f64) -> (f64, usize) {
    let n = counts.len() as f64;
    let pois = Poisson::new(mean).unwrap();
    let max = *counts.iter().max().unwrap();
    let mut observed = vec![0usize; max + 1];
    for &c in counts {
        observed[c] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    let mut k = 0usize;
    loop {
        obs_acc += *observed.get(k).unwrap_or(&0) as f64;
        exp_acc += n * pois.pmf(k as u64);
        if exp_acc >= 5.0 {
            bins.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
        k += 1;
        if k > max && (k as f64) > mean + 10.0 * mean.sqrt() + 10.0 {
            break;
        }
    }
    let rest = n - bins.iter().map(|b| b.1).sum::<f64>();
    let rest_obs = n - bins.iter().map(|b| b.0).sum::<f64>();
    if let Some(last) = bins.last_mut() {
        last.0 += rest_obs;
        last.1 += rest;
    }
    let stat = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, bins.len() - 1)
}

#[test]
fn jump_counts_pass_poisson_goodness_of_fit() {
    for (rate, horizon) in [(0.5, 1.0), (1.0, 5.0), (5.0, 10.0)] {
        let spec = LevyMeasureSpec::new(rate, JumpLaw::Normal { variance: 1.0 }).unwrap();
        let counts: Vec<usize> = (0..20_000)
            .map(|i| sample_compound_poisson(&spec, horizon, &SeedSpec::new(11, i, "jumps:0")).len())
            .collect();
        let (stat, dof) = poisson_chi_square(&counts, rate * horizon);
        let crit = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
        assert!(stat <= crit, "λT={}: χ²={stat} > {crit} (dof {dof})", rate * horizon);
    }
}

#[test]
fn jump_times_are_uniform_and_sorted() {
    let spec = LevyMeasureSpec::new(3.0, JumpLaw::TwoPoint { magnitude: 1.0 }).unwrap();
    let horizon = 4.0;
    let bins = 10;
    let mut hist = vec![0.0; bins];
    for i in 0..5_000 {
        let c = sample_compound_poisson(&spec, horizon, &SeedSpec::new(3, i, "jumps:0"));
        assert!(c.times.windows(2).all(|w| w[0] < w[1]));
        assert!(c.times.iter().all(|&t| t > 0.0 && t <= horizon));
        assert!(c.sizes.iter().all(|&x| x == 1.0 || x == -1.0));
        for t in c.times {
            hist[((t / horizon * bins as f64).ceil() as usize).clamp(1, bins) - 1] += 1.0;
        }
    }
    let total: f64 = hist.iter().sum();
    let e = total / bins as f64;
    let stat: f64 = hist.iter().map(|o| (o - e) * (o - e) / e).sum();
    let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat <= crit, "χ²={stat} > {crit}");
}

#[test]
fn distinct_streams_are_uncorrelated() {
    let spec = LevyMeasureSpec::new(2.0, JumpLaw::Normal { variance: 1.0 }).unwrap();
    let n = 10_000;
    let (mut jumps, mut wiener, mut other_path) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let base = SeedSpec::new(5, i, "");
        jumps.push(sample_compound_poisson(&spec, 1.0, &base.with_stream("jumps:0")).len() as f64);
        wiener.push(wiener_increments(&[0.0, 1.0], 1, &base.with_stream("wiener")).unwrap()[0][0]);
        let next = SeedSpec::new(5, i + n, "jumps:0");
        other_path.push(sample_compound_poisson(&spec, 1.0, &next).len() as f64);
    }
    let corr = |a: &[f64], b: &[f64]| {
        let (ma, _) = common::mean_se(a);
        let (mb, _) = common::mean_se(b);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    };
    // Under independence the sample correlation has SE about 1/√n.
    let limit = 3.0 / (n as f64).sqrt();
    assert!(corr(&jumps, &wiener).abs() <= limit);
    assert!(corr(&jumps, &other_path).abs() <= limit);
}

#[test]
fn same_seed_reproduces_bitwise() {
    let specs = vec![
        LevyMeasureSpec::new(1.5, JumpLaw::Normal { variance: 2.0 }).unwrap(),
        truncate(&LevyDensity::PowerLaw { scale: 1.0, index: 0.7, radius: 1.0 }, 0.05).unwrap(),
    ];
    let seed = SeedSpec::new(99, 7, "");
    let a = sample_jump_path(&specs, 10.0, &seed);
    let b = sample_jump_path(&specs, 10.0, &seed);
    let bits = |p: &JumpPath| -> Vec<u64> {
        p.components.iter().flat_map(|c| c.times.iter().chain(&c.sizes).map(|v| v.to_bits())).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&sample_jump_path(&specs, 10.0, &SeedSpec::new(99, 8, ""))));
}

#[test]
fn merged_timeline_matches_brute_force_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let comps = rng.random_range(1..4);
        let mut jumps = Vec::new();
        for c in 0..comps {
            let mut t = 0.0;
            for _ in 0..rng.random_range(0..6) {
                t += rng.random_range(0.01..1.5);
                if t <= 5.0 {
                    jumps.push((c, t, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let path = JumpPath::from_jumps(5.0, comps, &jumps).unwrap();
        let mut resets: Vec<f64> = (0..rng.random_range(0..4)).map(|_| rng.random_range(0.0..5.0)).collect();
        resets.sort_by(f64::total_cmp);
        let grid = uniform_grid(5.0, 5);
        let merged = merge_events(&path, &resets, &grid);
        assert_eq!(merged.len(), jumps.len() + resets.len() + grid.len());
        let mut brute: Vec<f64> = jumps.iter().map(|j| j.1).chain(resets.iter().copied()).chain(grid.clone()).collect();
        brute.sort_by(f64::total_cmp);
        let got: Vec<f64> = merged.iter().map(|e| e.time).collect();
        assert_eq!(got, brute);
    }
}

#[test]
fn ties_resolve_grid_then_component_then_reset() {
    let path = JumpPath::from_jumps(2.0, 2, &[(1, 1.0, 0.5), (0, 1.0, -0.5)]).unwrap();
    let merged = merge_events(&path, &[1.0], &[0.0, 1.0, 2.0]);
    let at_one: Vec<&EventKind> = merged.iter().filter(|e| e.time == 1.0).map(|e| &e.kind).collect();
    assert!(matches!(at_one[0], EventKind::GridSample { index: 1 }));
    assert!(matches!(at_one[1], EventKind::Jump { component: 0, .. }));
    assert!(matches!(at_one[2], EventKind::Jump { component: 1, .. }));
    assert!(matches!(at_one[3], EventKind::Reset));
}

#[test]
fn truncated_rate_grows_as_epsilon_shrinks() {
    let density = LevyDensity::PowerLaw { scale: 1.0, index: 0.8, radius: 2.0 };
    let mut last = 0.0;
    for eps in [1.0, 0.5, 0.1, 0.01, 1e-3] {
        let rate = truncate(&density, eps).unwrap().rate();
        // ∫_{ε<|x|≤R} |x|^{-1-a} dx = 2(ε^{-a} - R^{-a})/a
        let exact = 2.0 * (eps.powf(-0.8) - 2f64.powf(-0.8)) / 0.8;
        assert!((rate - exact).abs() <= 1e-8 * exact.max(1.0), "ε={eps}: {rate} vs {exact}");
        assert!(rate > last);
        last = rate;
    }
}

#[test]
fn epsilon_ladder_converges_to_untruncated_oracle() {
    // ∫ x² ν(dx) for scale·|x|^{-1-a} on |x| ≤ R is 2·scale·R^{2-a}/(2-a).
    let (scale, a, r) = (0.5, 1.2, 1.0);
    let density = LevyDensity::PowerLaw { scale, index: a, radius: r };
    let f = Polynomial::univariate(&[(2, 1.0)]).unwrap();
    let full = 2.0 * scale * r.powf(2.0 - a) / (2.0 - a);
    let t = 1.5;
    let target = (t * full).exp();
    let mut prev_err = f64::INFINITY;
    for eps in [0.5, 0.1, 0.02, 4e-3, 8e-4] {
        let spec = truncate(&density, eps).unwrap();
        let integral = spec.polynomial_jump_integral(&f).unwrap();
        let tail = 2.0 * scale * eps.powf(2.0 - a) / (2.0 - a);
        assert!((full - integral - tail).abs() <= 1e-9 * full, "ε={eps}");
        let err = (prod_exp_expectation(&spec, &f, t).unwrap().value - target).abs();
        assert!(err < prev_err);
        prev_err = err;
    }
    assert!(prev_err <= 1e-2 * target);
}

#[test]
fn grid_refinement_leaves_event_states_unchanged() {
    let system = SystemMatrices::new(
        DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.5]),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 1),
    )
    .unwrap();
    let jumps = vec![
        LevyMeasureSpec::new(1.0, JumpLaw::Normal { variance: 1.0 }).unwrap(),
        LevyMeasureSpec::new(0.5, JumpLaw::TwoPoint { magnitude: 2.0 }).unwrap(),
    ];
    let noise = NoiseSpec::new(jumps, false);
    let x0 = DVector::from_vec(vec![1.0, -1.0]);
    for path in 0..20 {
        let seed = SeedSpec::new(42, path, "");
        let coarse = simulate_ti(&system, &noise, &x0, &uniform_grid(10.0, 10), &seed).unwrap();
        let fine = simulate_ti(&system, &noise, &x0, &uniform_grid(10.0, 1000), &seed).unwrap();
        assert_eq!(coarse.events.len(), fine.events.len());
        for (c, f) in coarse.events.iter().zip(&fine.events) {
            assert_eq!(c.time, f.time);
            let scale = 1.0 + c.after.norm();
            assert!((&c.before - &f.before).norm() <= 1e-10 * scale);
            assert!((&c.after - &f.after).norm() <= 1e-10 * scale);
        }
        for (k, t) in coarse.times.iter().enumerate() {
            let j = fine.times.iter().position(|s| s == t).unwrap();
            assert!((&coarse.states[k] - &fine.states[j]).norm() <= 1e-10 * (1.0 + coarse.states[k].norm()));
        }
    }
}

#[test]
fn noiseless_transition_matches_dense_ode_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut dummy = ChaCha8Rng::seed_from_u64(0);
    for n in 1..=6 {
        for _ in 0..5 {
            let a = common::random_hurwitz(&mut rng, n, 0.1);
            let x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let dt = rng.random_range(0.1..1.0);
            let exact = Transition::new(&a, None, dt, None).unwrap().apply(&x, &mut dummy);
            let oracle = common::rk4(&a, &x, dt, 4000);
            let err = (&exact - &oracle).norm() / x.norm().max(1.0);
            assert!(err <= 1e-10, "n={n}: {err}");
        }
    }
}
