use iadof_core::algebra::{
    build_block_graph, complete_matching, construct_certificate, eval_polymap, jacobian,
    numeric_rank, random_instance, variable_coords, MatchingOutcome, RankTolerance, ReducedVars,
};
use iadof_core::benchmark::{sample_rayleigh, sum_rate, wmmse_maximize, WmmseOptions};
use iadof_core::feasibility::{
    check_pairwise, check_per_user, check_subsets, deficiency, feasibility_verdict, is_proper,
    matching_applicable, max_dof_bound, symmetric_proper, SubsetStrategy,
};
use iadof_core::linalg::{complex_gaussian, orthonormalize, CMat};
use iadof_core::model::{leakage, signal_rank_margin};
use iadof_core::{
    min_leakage, verify_alignment, BeamformerSet, ChannelRealization, SolveOptions, SystemConfig,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(tx: Vec<usize>, rx: Vec<usize>, d: Vec<usize>) -> SystemConfig {
    SystemConfig::new(tx.len(), tx, rx, d).unwrap()
}

/// Arbitrary configuration with `users` users, antennas in `1..=max_ant`, streams in `1..=max_d`.
fn arb_config(
    users: std::ops::RangeInclusive<usize>,
    max_ant: usize,
    max_d: usize,
) -> impl Strategy<Value = SystemConfig> {
    users.prop_flat_map(move |k| {
        (
            prop::collection::vec(1..=max_ant, k),
            prop::collection::vec(1..=max_ant, k),
            prop::collection::vec(1..=max_d, k),
        )
            .prop_map(|(tx, rx, d)| config(tx, rx, d))
    })
}

/// Equal-stream configuration whose antennas are multiples of `d`.
fn arb_divisible(
    users: std::ops::RangeInclusive<usize>,
    max_ant: usize,
    max_d: usize,
) -> impl Strategy<Value = SystemConfig> {
    (users, 1..=max_d).prop_flat_map(move |(k, d)| {
        let mult = 1..=(max_ant / d).max(1);
        (
            prop::collection::vec(mult.clone(), k),
            prop::collection::vec(mult, k),
        )
            .prop_map(move |(a, b)| {
                config(
                    a.iter().map(|x| x * d).collect(),
                    b.iter().map(|x| x * d).collect(),
                    vec![d; k],
                )
            })
    })
}

/// Configuration whose streams fit the antennas, so the reduced system exists.
fn arb_fitting(
    users: std::ops::RangeInclusive<usize>,
    max_ant: usize,
) -> impl Strategy<Value = SystemConfig> {
    users.prop_flat_map(move |k| {
        prop::collection::vec((1..=max_ant, 1..=max_ant, 0.0..1.0f64), k).prop_map(|draws| {
            let tx: Vec<usize> = draws.iter().map(|s| s.0).collect();
            let rx: Vec<usize> = draws.iter().map(|s| s.1).collect();
            let d = draws
                .iter()
                .map(|&(m, n, f)| 1 + ((m.min(n) as f64) * f) as usize % m.min(n))
                .collect();
            config(tx, rx, d)
        })
    })
}

fn all_conditions_pass(cfg: &SystemConfig) -> [bool; 3] {
    [
        check_per_user(cfg).iter().all(|&b| b),
        check_pairwise(cfg).iter().all(|c| c.ok),
        check_subsets(cfg, SubsetStrategy::Brute).unwrap().holds,
    ]
}

fn random_channel(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
    sample_rayleigh(cfg.tx(), cfg.rx(), seed).unwrap()
}

fn random_beamformers(cfg: &SystemConfig, seed: u64) -> BeamformerSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.users();
    let v = (0..k)
        .map(|i| orthonormalize(&complex_gaussian(cfg.tx()[i], cfg.streams()[i], &mut rng)))
        .collect();
    let u = (0..k)
        .map(|i| orthonormalize(&complex_gaussian(cfg.rx()[i], cfg.streams()[i], &mut rng)))
        .collect();
    BeamformerSet::new(v, u).unwrap()
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    orthonormalize(&complex_gaussian(d, d, rng))
}

fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn subset_strategies_agree(cfg in arb_config(1..=4, 5, 3)) {
        let brute = check_subsets(&cfg, SubsetStrategy::Brute).unwrap();
        let tr = check_subsets(&cfg, SubsetStrategy::MaximalTr).unwrap();
        prop_assert_eq!(brute.holds, tr.holds);
        for w in [&brute.witness, &tr.witness].into_iter().flatten() {
            prop_assert!(deficiency(&cfg, w) > 0);
        }
    }

    #[test]
    fn matching_agrees_with_brute(cfg in arb_divisible(1..=4, 4, 2)) {
        let brute = check_subsets(&cfg, SubsetStrategy::Brute).unwrap();
        let matching = check_subsets(&cfg, SubsetStrategy::Matching).unwrap();
        prop_assert_eq!(brute.holds, matching.holds);
        let graph = build_block_graph(&cfg).unwrap();
        match complete_matching(&graph) {
            MatchingOutcome::Complete(m) => {
                prop_assert!(brute.holds);
                let cert = construct_certificate(&cfg, &m).unwrap();
                prop_assert_eq!(cert.jacobian_det().map(i64::abs), Some(1));
            }
            MatchingOutcome::Deficient(v) => {
                prop_assert!(!brute.holds);
                prop_assert!(v.neighbours.len() < v.equations.len());
                prop_assert!(deficiency(&cfg, &v.pairs) > 0);
            }
        }
    }

    #[test]
    fn symmetric_shortcut(k in 1usize..=5, m in 1usize..=6, n in 1usize..=6, d in 1usize..=3) {
        prop_assume!(d <= m.min(n));
        let cfg = SystemConfig::symmetric(k, m, n, d).unwrap();
        prop_assert_eq!(
            check_subsets(&cfg, SubsetStrategy::Brute).unwrap().holds,
            symmetric_proper(k, m, n, d)
        );
    }

    #[test]
    fn adding_an_antenna_never_breaks_a_condition(cfg in arb_config(1..=4, 4, 3), user in 0usize..4, side in 0usize..2) {
        let user = user % cfg.users();
        let (mut tx, mut rx) = (cfg.tx().to_vec(), cfg.rx().to_vec());
        if side == 0 { tx[user] += 1 } else { rx[user] += 1 }
        let grown = config(tx, rx, cfg.streams().to_vec());
        for (before, after) in all_conditions_pass(&cfg).into_iter().zip(all_conditions_pass(&grown)) {
            prop_assert!(!before || after);
        }
    }

    #[test]
    fn adding_a_stream_never_repairs_a_condition(cfg in arb_config(1..=4, 5, 3), user in 0usize..4) {
        let user = user % cfg.users();
        let mut d = cfg.streams().to_vec();
        d[user] += 1;
        let grown = config(cfg.tx().to_vec(), cfg.rx().to_vec(), d);
        let before = all_conditions_pass(&cfg);
        let after = all_conditions_pass(&grown);
        prop_assert!(before.iter().all(|&b| b) || !after.iter().all(|&b| b));
    }

    #[test]
    fn verdict_never_feasible_when_a_condition_fails(cfg in arb_config(1..=4, 5, 3)) {
        let report = feasibility_verdict(&cfg);
        let all_ok = all_conditions_pass(&cfg).iter().all(|&b| b);
        prop_assert_eq!(report.verdict.is_infeasible(), !all_ok);
        if report.verdict.is_feasible() {
            prop_assert!(all_ok);
            prop_assert!(cfg.equal_streams().is_some());
        }
        prop_assert_eq!(report.proper, is_proper(&cfg));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_dof_bound_respects_closed_form(k in 1usize..=4, m in 1usize..=5, n in 1usize..=5) {
        let res = max_dof_bound(&vec![m; k], &vec![n; k]).unwrap();
        prop_assert!((res.max_total * (k + 1)) as f64 <= (k * (m + n)) as f64 + 1e-12);
        prop_assert_eq!(res.argmax_tuple.iter().sum::<usize>(), res.max_total);
    }

    #[test]
    fn jacobian_matches_central_differences(cfg in arb_fitting(1..=3, 4), seed in any::<u64>()) {
        let (rs, rv) = random_instance(&cfg, seed).unwrap();
        let jac = jacobian(&rs, &rv).unwrap();
        let coords = variable_coords(&cfg);
        prop_assert_eq!(jac.ncols(), coords.len());
        let h = 1e-4;
        let scale = max_abs(&jac).max(1.0);
        for (col, &c) in coords.iter().enumerate() {
            for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
                let mut plus = rv.clone();
                plus.set(c, rv.get(c) + dir);
                let mut minus = rv.clone();
                minus.set(c, rv.get(c) - dir);
                let fp = eval_polymap(&rs, &plus).unwrap();
                let fm = eval_polymap(&rs, &minus).unwrap();
                for row in 0..jac.nrows() {
                    let fd = (fp[row] - fm[row]) / (dir * 2.0);
                    prop_assert!((fd - jac[(row, col)]).norm() <= 1e-6 * scale,
                        "entry ({}, {}): {} vs {}", row, col, fd, jac[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn improper_systems_are_rank_deficient(cfg in arb_fitting(2..=4, 3), seed in any::<u64>()) {
        prop_assume!(!check_subsets(&cfg, SubsetStrategy::Brute).unwrap().holds);
        let (rs, rv) = random_instance(&cfg, seed).unwrap();
        let rank = numeric_rank(&jacobian(&rs, &rv).unwrap(), RankTolerance::default());
        prop_assert!(rank < cfg.equation_count());
    }

    #[test]
    fn polymap_is_affine_in_each_side(cfg in arb_fitting(2..=3, 4), seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let (rs, rv) = random_instance(&cfg, seed).unwrap();
        let (_, other) = random_instance(&cfg, seed ^ 0x5555).unwrap();
        let alpha = Complex64::new(a, b);
        let k = cfg.users();
        let f = |ubar: Vec<CMat>, vbar: Vec<CMat>| {
            eval_polymap(&rs, &ReducedVars::new(&cfg, ubar, vbar).unwrap()).unwrap()
        };
        let us: Vec<CMat> = (0..k).map(|i| rv.ubar(i).clone()).collect();
        let vs: Vec<CMat> = (0..k).map(|i| rv.vbar(i).clone()).collect();
        let vs2: Vec<CMat> = (0..k).map(|i| other.vbar(i).clone()).collect();
        let us2: Vec<CMat> = (0..k).map(|i| other.ubar(i).clone()).collect();
        let zero_v: Vec<CMat> = vs.iter().map(|m| m * Complex64::new(0.0, 0.0)).collect();
        let zero_u: Vec<CMat> = us.iter().map(|m| m * Complex64::new(0.0, 0.0)).collect();

        // In Vbar: F(U, V1 + alpha V2) - F(U, 0) = (F(U, V1) - F(U, 0)) + alpha (F(U, V2) - F(U, 0)).
        let mixed: Vec<CMat> = vs.iter().zip(&vs2).map(|(x, y)| x + y * alpha).collect();
        let lhs = f(us.clone(), mixed);
        let (f1, f2, f0) = (f(us.clone(), vs.clone()), f(us.clone(), vs2), f(us.clone(), zero_v));
        for i in 0..lhs.len() {
            let rhs = f1[i] + (f2[i] - f0[i]) * alpha;
            prop_assert!((lhs[i] - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
        }
        // In Ubar the map is conjugate-affine, so the coefficient enters conjugated.
        let mixed: Vec<CMat> = us.iter().zip(&us2).map(|(x, y)| x + y * alpha).collect();
        let lhs = f(mixed, vs.clone());
        let (g1, g2, g0) = (f(us, vs.clone()), f(us2, vs.clone()), f(zero_u, vs));
        for i in 0..lhs.len() {
            let rhs = g1[i] + (g2[i] - g0[i]) * alpha.conj();
            prop_assert!((lhs[i] - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn leakage_scales_with_cross_gain(cfg in arb_fitting(1..=3, 4), seed in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let ch = random_channel(&cfg, seed);
        let bf = random_beamformers(&cfg, seed.wrapping_add(1));
        let c = Complex64::new(re, im);
        let base = leakage(&ch, &bf).unwrap();
        let scaled = leakage(&ch.scale_cross(c), &bf).unwrap();
        prop_assert!((scaled - c.norm_sqr() * base).abs() <= 1e-10 * (1.0 + scaled.abs()));
    }

    #[test]
    fn leakage_and_rank_are_unitarily_invariant(cfg in arb_fitting(1..=3, 4), seed in any::<u64>()) {
        let ch = random_channel(&cfg, seed);
        let bf = random_beamformers(&cfg, seed.wrapping_add(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        let p: Vec<CMat> = cfg.streams().iter().map(|&d| random_unitary(d, &mut rng)).collect();
        let q: Vec<CMat> = cfg.streams().iter().map(|&d| random_unitary(d, &mut rng)).collect();
        let rotated = bf.rotate(&p, &q);
        let (a, b) = (leakage(&ch, &bf).unwrap(), leakage(&ch, &rotated).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        let before = signal_rank_margin(&ch, &bf).unwrap();
        let after = signal_rank_margin(&ch, &rotated).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x));
            prop_assert_eq!(*x > 1e-8, *y > 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_trace_never_increases(cfg in arb_fitting(2..=3, 3), seed in any::<u64>()) {
        let ch = random_channel(&cfg, seed);
        let opts = SolveOptions { seed, max_iters: 400, ..SolveOptions::default() };
        let res = min_leakage(&ch, &cfg, &opts).unwrap();
        for w in res.leakage_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-24);
        }
        if res.converged {
            prop_assert!(verify_alignment(&ch, &res.beamformers, 10.0 * opts.leakage_tol).unwrap().max_zf_residual
                <= 10.0 * opts.leakage_tol);
        }
    }

    #[test]
    fn wmmse_iterates_never_decrease(k in 1usize..=3, m in 1usize..=3, n in 1usize..=3, seed in any::<u64>(), snr_db in 0.0..40.0f64) {
        let ch = sample_rayleigh(&vec![m; k], &vec![n; k], seed).unwrap();
        let opts = WmmseOptions { seed, max_iters: 300, ..WmmseOptions::default() };
        let res = wmmse_maximize(&ch, 10f64.powf(snr_db / 10.0), &opts).unwrap();
        for w in res.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].max(1.0));
        }
        prop_assert!(res.sum_rate >= 0.0);
    }
}

#[test]
fn aligned_rate_gains_total_dof_per_decade() {
    let cfg = SystemConfig::symmetric(3, 2, 2, 1).unwrap();
    let ch = random_channel(&cfg, 17);
    let res = min_leakage(&ch, &cfg, &SolveOptions::default()).unwrap();
    assert!(res.converged);
    let r4 = sum_rate(&ch, &res.beamformers, 1e4, 1.0).unwrap();
    let r5 = sum_rate(&ch, &res.beamformers, 1e5, 1.0).unwrap();
    let r6 = sum_rate(&ch, &res.beamformers, 1e6, 1.0).unwrap();
    let per_decade = 3.0 * std::f64::consts::LOG2_10;
    assert!(
        ((r5 - r4) - per_decade).abs() < 0.05 * per_decade,
        "{}",
        r5 - r4
    );
    assert!(
        ((r6 - r5) - per_decade).abs() < 0.05 * per_decade,
        "{}",
        r6 - r5
    );
    assert!(r4 < r5 && r5 < r6);
}

#[test]
fn aligned_rate_is_nondecreasing_in_snr() {
    let cfg = SystemConfig::symmetric(3, 2, 2, 1).unwrap();
    let ch = random_channel(&cfg, 18);
    let res = min_leakage(&ch, &cfg, &SolveOptions::default()).unwrap();
    let mut last = 0.0;
    for db in (0..=70).step_by(5) {
        let r = sum_rate(&ch, &res.beamformers, 10f64.powf(db as f64 / 10.0), 1.0).unwrap();
        assert!(r >= last);
        last = r;
    }
}

#[test]
fn siso_pair_slope_is_at_most_one() {
    let grid = [30.0, 40.0, 50.0];
    let mut means = vec![0.0; grid.len()];
    let trials = 10;
    for t in 0..trials {
        let ch = sample_rayleigh(&[1, 1], &[1, 1], 100 + t).unwrap();
        for (i, db) in grid.iter().enumerate() {
            let r = wmmse_maximize(
                &ch,
                10f64.powf(db / 10.0),
                &WmmseOptions {
                    seed: t,
                    ..Default::default()
                },
            )
            .unwrap();
            means[i] += r.sum_rate / trials as f64;
        }
    }
    let slope = iadof_core::benchmark::estimate_dof_slope(&grid, &means, 3).unwrap();
    assert!(slope <= 1.0 + 0.05, "slope {slope}");
}

#[test]
fn synthetic_noisy_slope_is_recovered() {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let grid = [30.0, 40.0, 50.0, 60.0];
    let rates: Vec<f64> = grid
        .iter()
        .map(|db| 3.0 * db / 10.0 * std::f64::consts::LOG2_10 + noise.sample(&mut rng))
        .collect();
    let slope = iadof_core::benchmark::estimate_dof_slope(&grid, &rates, 4).unwrap();
    assert!((2.8..=3.2).contains(&slope), "slope {slope}");
}

#[test]
fn matching_precondition_is_enforced() {
    let cfg = SystemConfig::symmetric(3, 3, 2, 2).unwrap();
    assert!(!matching_applicable(&cfg));
    assert!(check_subsets(&cfg, SubsetStrategy::Matching).is_err());
}
