use fdnoise::bench::{log_ratio_profile, RunRecord, TracePoint};
use fdnoise::fdiff::{mse_bound, noise_optimal_interval, DifferenceScheme};
use fdnoise::lbfgs::{two_loop_direction, LbfgsMemory};
use fdnoise::lipschitz::{mean_abs, mw_search, root_mean_square, MwOutcome, MwParams, FLOOR};
use fdnoise::noise::{NoiseModel, NoisyOracle};
use fdnoise::problem::{diagonal_quadratic, SmoothProblem};
use fdnoise::Termination;
use proptest::prelude::*;

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    // Works on log h so that widely scaled brackets converge evenly.
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut la, mut lb) = (a.ln(), b.ln());
    for _ in 0..200 {
        let c = lb - r * (lb - la);
        let d = la + r * (lb - la);
        if f(c.exp()) < f(d.exp()) {
            lb = d;
        } else {
            la = c;
        }
    }
    a = la.exp();
    b = lb.exp();
    (a * b).sqrt()
}

fn record(problem: &str, evals: &[u32], hit: Option<usize>) -> RunRecord {
    let mut total = 0.0;
    RunRecord {
        solver_id: "s".into(),
        problem_id: problem.into(),
        sigma_f: 0.0,
        seed: 0,
        trace: evals
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                total += e as f64;
                let phi = if Some(k) >= hit && hit.is_some() { 0.0 } else { 1.0 };
                TracePoint {
                    evals: total,
                    noisy_f: phi,
                    true_phi: phi,
                }
            })
            .collect(),
        reason: Termination::Budget,
    }
}

fn records() -> impl Strategy<Value = Vec<(Vec<u32>, Option<usize>)>> {
    prop::collection::vec(
        (prop::collection::vec(1u32..1000, 1..8), prop::option::of(0usize..8)),
        1..12,
    )
}

fn build(spec: &[(Vec<u32>, Option<usize>)]) -> Vec<RunRecord> {
    spec.iter()
        .enumerate()
        .map(|(i, (e, h))| record(&format!("P{i:02}"), e, *h))
        .collect()
}

fn hit(_: &RunRecord, t: &TracePoint) -> bool {
    t.true_phi <= 0.0
}

proptest! {
    #[test]
    fn profile_is_antisymmetric(a in records(), b in records()) {
        let k = a.len().min(b.len());
        let (ra, rb) = (build(&a[..k]), build(&b[..k]));
        let ab = log_ratio_profile(&ra, &rb, hit).unwrap();
        let ba = log_ratio_profile(&rb, &ra, hit).unwrap();
        let mut neg: Vec<f64> = ba.ratios().iter().rev().map(|r| -r).collect();
        neg.iter_mut().for_each(|r| if *r == 0.0 { *r = 0.0 });
        let mut fwd = ab.ratios();
        fwd.iter_mut().for_each(|r| if *r == 0.0 { *r = 0.0 });
        prop_assert_eq!(fwd, neg);
        let mut fa = ab.failure_mask();
        let mut fb = ba.failure_mask();
        fa.sort();
        fb.sort();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn profile_is_invariant_under_rescaling(a in records(), b in records(), c in 1u32..1000) {
        let k = a.len().min(b.len());
        let (ra, rb) = (build(&a[..k]), build(&b[..k]));
        let scale = |rs: &[RunRecord]| -> Vec<RunRecord> {
            rs.iter().map(|r| {
                let mut r = r.clone();
                r.trace.iter_mut().for_each(|t| t.evals *= c as f64);
                r
            }).collect()
        };
        let p = log_ratio_profile(&ra, &rb, hit).unwrap();
        let q = log_ratio_profile(&scale(&ra), &scale(&rb), hit).unwrap();
        // Failed runs sit at the fixed sentinel, which is not rescaled.
        let ok = |e: &fdnoise::bench::ProfileEntry| !(e.failed_a || e.failed_b);
        let mut pr: Vec<_> = p.entries.iter().filter(|e| ok(e)).map(|e| (e.problem_id.clone(), e.ratio)).collect();
        let mut qr: Vec<_> = q.entries.iter().filter(|e| ok(e)).map(|e| (e.problem_id.clone(), e.ratio)).collect();
        pr.sort_by(|x, y| x.0.cmp(&y.0));
        qr.sort_by(|x, y| x.0.cmp(&y.0));
        prop_assert_eq!(pr, qr);
    }

    #[test]
    fn profile_ratios_are_sorted_and_bounded(a in records(), b in records()) {
        let k = a.len().min(b.len());
        let p = log_ratio_profile(&build(&a[..k]), &build(&b[..k]), hit).unwrap();
        let r = p.ratios();
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.iter().all(|v| v.abs() <= p.sentinel.log2()));
    }

    #[test]
    fn scheme_aggregates_are_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let max = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mean = mean_abs(&v);
        let rms = root_mean_square(&v);
        prop_assert!(mean <= rms * (1.0 + 1e-12));
        prop_assert!(rms <= max * (1.0 + 1e-12));
    }

    #[test]
    fn two_loop_direction_is_descent(
        pairs in prop::collection::vec(
            (prop::collection::vec(-1.0f64..1.0, 4), prop::collection::vec(0.1f64..10.0, 4)),
            0..6,
        ),
        g in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        prop_assume!(g.iter().any(|v| v.abs() > 1e-3));
        let mut mem = LbfgsMemory::new(5);
        for (s, d) in pairs {
            // y = Ds with D positive diagonal keeps every pair curved.
            let y: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a * b).collect();
            mem.push(s, y);
        }
        let p = two_loop_direction(&mem, &g).unwrap();
        let gtp: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        prop_assert!(gtp < 0.0, "gᵀp = {}", gtp);
    }

    #[test]
    fn mw_success_satisfies_both_tests(
        a in 0.01f64..100.0,
        x in -10.0f64..10.0,
        sigma in prop_oneof![Just(0.0), 1e-8f64..1e-2],
        seed in 0u64..1000,
    ) {
        let problem = SmoothProblem::new("q", vec![x], Some(0.0), diagonal_quadratic(vec![a]));
        let oracle = NoisyOracle::new(problem, NoiseModel::uniform(sigma, seed));
        let params = MwParams::default();
        let f0 = oracle.noisy_value(&[x]).unwrap();
        let (outcome, probes) = mw_search(
            |pts| Ok([oracle.noisy_value(&pts[0])?, oracle.noisy_value(&pts[1])?]),
            &[x],
            &[1.0],
            f0,
            sigma,
            &params,
        ).unwrap();
        prop_assert!(probes.len() <= params.max_iters);
        if let MwOutcome::Success { estimate, probe } = outcome {
            let eps_f = fdnoise::lipschitz::error_scale(sigma, f0);
            prop_assert!(probe.large_enough(eps_f, params.tau1));
            prop_assert!(probe.small_enough(params.tau2));
            prop_assert_eq!(estimate, (probe.delta().abs() / (probe.t * probe.t)).max(FLOOR));
        }
    }

    #[test]
    fn noise_stays_in_support(sigma in 1e-12f64..10.0, seed in any::<u64>()) {
        let problem = SmoothProblem::new("z", vec![0.0], Some(0.0), diagonal_quadratic(vec![0.0]));
        let oracle = NoisyOracle::new(problem, NoiseModel::uniform(sigma, seed));
        for _ in 0..16 {
            prop_assert!(oracle.noisy_value(&[0.0]).unwrap().abs() <= sigma * 3f64.sqrt());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_intervals_minimize_the_error_bound(
        log_sigma in -12.0f64..0.0,
        log_curv in -4.0f64..4.0,
    ) {
        let (sigma, curv) = (10f64.powf(log_sigma), 10f64.powf(log_curv));
        for scheme in [DifferenceScheme::Forward, DifferenceScheme::Central] {
            let h = noise_optimal_interval(sigma, curv, scheme).unwrap();
            let g = golden_section(|t| mse_bound(t, curv, sigma, scheme).unwrap(), h * 1e-3, h * 1e3);
            prop_assert!((g - h).abs() <= 1e-6 * h, "{:?}: golden {} vs {}", scheme, g, h);
        }
    }
}
