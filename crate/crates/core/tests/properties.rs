mod common;

use actdet::covariance::model_covariance;
use actdet::descent::{DetectOptions, ObjectiveTrace};
use actdet::harness::{decide, error_rate, optimize_threshold, run_trial, RhoPolicy, Scheme};
use actdet::linalg::rel_frobenius;
use actdet::polyroot::{real_roots_in_interval, RealPolynomial};
use actdet::signal::SystemConfig;
use actdet::virtual_dev::{self, column_blocks, penalty_value};
use actdet::{direct, rng};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn from_roots(lead: f64, real: &[f64], pairs: &[(f64, f64)]) -> RealPolynomial {
    let mut p = RealPolynomial::constant(lead);
    for r in real {
        p = p.multiply(&RealPolynomial::new(vec![-r, 1.0]));
    }
    for (re, im) in pairs {
        p = p.multiply(&RealPolynomial::new(vec![
            re * re + im * im,
            -2.0 * re,
            1.0,
        ]));
    }
    p
}

fn separated(xs: &[f64], gap: f64) -> bool {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[1] - w[0] >= gap)
}

fn assert_roots(p: &RealPolynomial, truth: &[f64], lo: f64, hi: f64, tol: f64) {
    let mut want: Vec<f64> = truth
        .iter()
        .copied()
        .filter(|r| *r >= lo && *r <= hi)
        .collect();
    want.sort_by(f64::total_cmp);
    let got = real_roots_in_interval(p, lo, hi).unwrap();
    assert_eq!(
        got.len(),
        want.len(),
        "p={:?} want={want:?} got={got:?}",
        p.coeffs()
    );
    for (g, w) in got.iter().zip(&want) {
        assert!(
            (g - w).abs() <= tol,
            "p={:?} want={want:?} got={got:?}",
            p.coeffs()
        );
    }
}

#[test]
fn cubic_roots_are_complete() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let mut done = 0;
    while done < 1000 {
        let roots: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..2.5)).collect();
        // keep roots away from the interval ends so membership is unambiguous
        if !separated(&roots, 1e-3)
            || roots
                .iter()
                .any(|r| r.abs() < 1e-6 || (r - 1.0).abs() < 1e-6)
        {
            continue;
        }
        let lead = rng.gen_range(0.1..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        assert_roots(&from_roots(lead, &roots, &[]), &roots, 0.0, 1.0, 1e-8);
        done += 1;
    }
}

#[test]
fn cubics_with_one_real_root() {
    let mut rng = ChaCha20Rng::seed_from_u64(18);
    for _ in 0..500 {
        let r = rng.gen_range(-1.0..2.0);
        let pair = (rng.gen_range(-2.0..2.0), rng.gen_range(0.05..2.0));
        assert_roots(
            &from_roots(rng.gen_range(0.5..3.0), &[r], &[pair]),
            &[r],
            0.0,
            1.0,
            1e-8,
        );
    }
}

#[test]
fn higher_degree_roots_are_complete() {
    let mut rng = ChaCha20Rng::seed_from_u64(19);
    for degree in [5usize, 7] {
        let mut done = 0;
        while done < 200 {
            let pairs_n = rng.gen_range(0..=(degree - 1) / 2);
            let reals: Vec<f64> = (0..degree - 2 * pairs_n)
                .map(|_| rng.gen_range(-1.0..2.0))
                .collect();
            if !separated(&reals, 1e-2) {
                continue;
            }
            let pairs: Vec<(f64, f64)> = (0..pairs_n)
                .map(|_| (rng.gen_range(-1.0..2.0), rng.gen_range(0.1..1.5)))
                .collect();
            let p = from_roots(rng.gen_range(0.5..4.0), &reals, &pairs);
            assert_roots(&p, &reals, -0.5, 1.5, 1e-7);
            done += 1;
        }
    }
}

#[test]
fn grouped_virtual_covariance_equals_device_covariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for taps in [1usize, 2, 4] {
        let f = fixture(
            SystemConfig::new(7, 2, 16, taps, 0.3, 0.5).unwrap(),
            taps as u64,
        );
        let alpha: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..1.0)).collect();
        let beta: Vec<f64> = alpha.iter().flat_map(|a| vec![*a; taps]).collect();
        let cols = column_blocks(&f.pilots);
        let dev = model_covariance(&alpha, &device_atoms(&f.pilots, &f.config), 0.3, 16).unwrap();
        let virt = model_covariance(&beta, &column_atoms(&cols, &f.config), 0.3, 16).unwrap();
        assert!(rel_frobenius(&dev, &virt) <= 1e-12);
    }
}

#[test]
fn group_sums_do_not_drift() {
    for seed in 0..4 {
        let f = fixture(SystemConfig::new(30, 16, 16, 3, 0.1, 0.2).unwrap(), seed);
        let out =
            virtual_dev::detect(&f.sample, &f.pilots, &f.config, 0.5, &fixed_sweeps(6)).unwrap();
        let drift = out
            .state
            .recomputed_group_sums()
            .iter()
            .zip(&out.state.group_sums)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-10, "drift {drift}");
    }
}

#[test]
fn penalized_objective_never_increases() {
    let f = fixture(SystemConfig::new(25, 16, 16, 2, 0.1, 0.2).unwrap(), 8);
    for rho in [0.0, 0.05, 1.0] {
        let opts = DetectOptions {
            trace: ObjectiveTrace::PerUpdate,
            ..fixed_sweeps(4)
        };
        let out = virtual_dev::detect(&f.sample, &f.pilots, &f.config, rho, &opts).unwrap();
        let obj = &out.diagnostics.objective;
        assert!(obj.len() > 1);
        for w in obj.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "rho={rho}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn trials_are_reproducible() {
    let cfg = SystemConfig::new(20, 8, 16, 2, 0.1, 0.2).unwrap();
    let opts = DetectOptions::default();
    let a = run_trial(&cfg, &Scheme::ALL, 99, &RhoPolicy::Default, &opts).unwrap();
    let b = run_trial(&cfg, &Scheme::ALL, 99, &RhoPolicy::Default, &opts).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
    let c = run_trial(
        &cfg,
        &Scheme::ALL,
        rng::trial_seed(99, 1),
        &RhoPolicy::Default,
        &opts,
    )
    .unwrap();
    assert_ne!(
        a.result(Scheme::MleDirect).unwrap().scores,
        c.result(Scheme::MleDirect).unwrap().scores
    );
}

fn mean_error(scores: &[Vec<f64>], truths: &[Vec<bool>], theta: f64) -> f64 {
    scores
        .iter()
        .zip(truths)
        .map(|(s, t)| error_rate(&decide(s, theta), t).unwrap())
        .sum::<f64>()
        / scores.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penalty_vanishes_exactly_on_binary_groups(
        groups in proptest::collection::vec((any::<bool>(), proptest::collection::vec(0.0f64..=1.0, 3)), 1..6),
        perturb in any::<bool>(),
    ) {
        let taps = 3;
        let mut beta = Vec::new();
        for (on, _) in &groups {
            beta.extend([if *on { 1.0 } else { 0.0 }; 3]);
        }
        prop_assert_eq!(penalty_value(&beta, groups.len(), taps), 0.0);
        if perturb {
            let (_, vals) = &groups[0];
            let mean = vals.iter().sum::<f64>() / 3.0;
            beta[..3].copy_from_slice(vals);
            let eta = penalty_value(&beta, groups.len(), taps);
            prop_assert!((eta - mean * (1.0 - mean)).abs() <= 1e-15);
            prop_assert_eq!(eta == 0.0, mean == 0.0 || mean == 1.0);
        }
    }

    #[test]
    fn threshold_matches_fine_scan(
        trials in proptest::collection::vec(
            proptest::collection::vec((0u32..=1000, any::<bool>()), 1..30), 1..5),
    ) {
        // scores on a 1e-3 lattice so a 1e-4 scan visits every gap
        let scores: Vec<Vec<f64>> = trials.iter().map(|t| t.iter().map(|(s, _)| *s as f64 / 1000.0).collect()).collect();
        let truths: Vec<Vec<bool>> = trials.iter().map(|t| t.iter().map(|(_, a)| *a).collect()).collect();
        let (theta, err) = optimize_threshold(&scores, &truths);
        prop_assert!((mean_error(&scores, &truths, theta) - err).abs() <= 1e-12);
        let scan = (0..=10_001)
            .map(|k| -5e-5 + k as f64 * 1e-4)
            .map(|t| mean_error(&scores, &truths, t))
            .fold(f64::INFINITY, f64::min);
        prop_assert!((err - scan).abs() <= 1e-12, "err {} scan {}", err, scan);
    }

    #[test]
    fn direct_steps_stay_in_box(seed in 0u64..500) {
        let f = fixture(SystemConfig::new(8, 4, 8, 2, 0.2, 0.4).unwrap(), seed);
        let out = direct::detect(&f.sample, &f.pilots, &f.config, &fixed_sweeps(2)).unwrap();
        for n in 0..8 {
            let d = direct::coordinate_step(n, &out.state, &f.sample, &f.pilots, &f.config).unwrap();
            let a = out.state.alpha[n];
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a + d >= -1e-15 && a + d <= 1.0 + 1e-15);
        }
    }
}
