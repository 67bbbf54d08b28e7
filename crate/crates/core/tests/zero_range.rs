use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zrp::environment::{DisorderLaw, DriftField};
use zrp::invariant_measure::{canonical_from_profile, full_generator, solve_fugacities, stationary_vector};
use zrp::stats::{binomial_pvalue, chi_square_pvalue, total_variation};
use zrp::zero_range::*;
use zrp::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rough_q(n: usize, seed: u64, amp: f64) -> DriftField {
    let law = DisorderLaw::UniformPm(1.0);
    DriftField::from_q((0..n).map(|k| amp * law.value_at(seed, k as i64)).collect())
}

#[test]
fn linear_rate_constants() {
    let g = certify_rate_function(&(0..20).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
    assert_eq!((g.g_star_upper, g.g_star_lower, g.c1, g.k0), (1.0, 1.0, 1.0, 1));
}

#[test]
fn kink_rate_constants() {
    let g = certify_rate_function(&(0..30).map(|k| (k + k.min(5)) as f64).collect::<Vec<_>>()).unwrap();
    assert_eq!(g.g_star_upper, 2.0);
    assert_eq!(g.c1, 1.0);
    assert_eq!(g.k0, 1);
    assert_eq!(g.g_star_lower, 1.0);
    // Independent scan of the defining inequalities over the table.
    let t = g.table();
    for k in 1..t.len() {
        assert!(t[k] >= g.g_star_lower * k as f64 && t[k] <= g.g_star_upper * k as f64);
        for j in 0..k {
            assert!(t[k] - t[j] >= g.c1);
        }
    }
}

#[test]
fn constant_tail_rejected() {
    let mut t = vec![1.0; 10];
    t[0] = 0.0;
    match certify_rate_function(&t) {
        Err(Error::RateFunction { k, j, .. }) => assert!(k > j && j >= 1, "pair ({k},{j})"),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert!(certify_rate_function(&[1.0, 2.0]).is_err());
    assert!(certify_rate_function(&[0.0]).is_err());
}

#[test]
fn rate_table_extends_linearly() {
    let g = RateFunction::kink5(10).unwrap();
    assert_eq!(g.g(10), 15.0);
    assert_eq!(g.g(25), 30.0);
    let parsed = RateFunction::parse_table("0, 1, 2 3 4").unwrap();
    assert_eq!(parsed.g(7), 7.0);
}

#[test]
fn single_particle_step() {
    let env = DriftField::zero(4);
    let g = RateFunction::linear(1.0, 16).unwrap();
    let c = Configuration::new(vec![1, 0, 0, 0]).unwrap();
    let mut right = 0u32;
    let trials = 20_000;
    for s in 0..trials {
        let mut st = EventState::new(&c, &env, &g).unwrap();
        assert_eq!(st.root_rate(), 1.0);
        let ev = st.step(&mut rng(s)).unwrap();
        assert_eq!(ev.site, 0);
        if ev.direction == 1 {
            assert_eq!(ev.dest, 1);
            right += 1;
        } else {
            assert_eq!(ev.dest, 3);
        }
    }
    assert!(binomial_pvalue(right as u64, trials, 0.5) > 0.01);
}

#[test]
fn two_particles_root_rate() {
    let env = DriftField::zero(5);
    let g = RateFunction::linear(1.0, 16).unwrap();
    let st = EventState::new(&Configuration::new(vec![2, 0, 0, 0, 0]).unwrap(), &env, &g).unwrap();
    assert_eq!(st.root_rate(), 2.0);
}

#[test]
fn waiting_times_are_exponential_with_speedup() {
    let n = 8;
    let env = DriftField::zero(n);
    let g = RateFunction::linear(1.0, 16).unwrap();
    let st = EventState::new(&Configuration::new(vec![3, 0, 0, 0, 0, 0, 0, 0]).unwrap(), &env, &g).unwrap();
    let mut r = rng(5);
    let m = 100_000;
    let xs: Vec<f64> = (0..m).map(|_| st.waiting_time(&mut r)).collect();
    let mean = xs.iter().sum::<f64>() / m as f64;
    let expect = 1.0 / (3.0 * (n * n) as f64);
    assert!((mean - expect).abs() < 4.0 * expect / (m as f64).sqrt(), "{mean} vs {expect}");
}

#[test]
fn direction_frequencies_match_bias() {
    let n = 16;
    let sq = (n as f64).sqrt();
    let mut q = vec![0.0; n];
    q[3] = 0.1 * sq;
    let env = DriftField::from_q(q);
    let g = RateFunction::linear(1.0, 16).unwrap();
    let mut eta = vec![0u32; n];
    eta[3] = 1;
    let c = Configuration::new(eta).unwrap();
    let mut r = rng(11);
    let trials = 100_000;
    let mut right = 0.0;
    for _ in 0..trials {
        let mut st = EventState::new(&c, &env, &g).unwrap();
        let (k, _, dir) = st.fire(&mut r);
        assert_eq!(k, 3);
        if dir == 1 {
            right += 1.0;
        }
    }
    let p = chi_square_pvalue(&[right, trials as f64 - right], &[0.6 * trials as f64, 0.4 * trials as f64]);
    assert!(p > 0.01, "p = {p}, right = {right}");
}

#[test]
fn zero_time_returns_initial() {
    let env = rough_q(10, 3, 0.5);
    let g = RateFunction::kink5(16).unwrap();
    let c = Configuration::new(vec![1, 2, 0, 0, 3, 1, 0, 0, 0, 1]).unwrap();
    for engine in [Engine::Tree, Engine::Walkers] {
        let out = simulate_with(engine, &c, &env, &g, 0.0, &[], &mut rng(1)).unwrap();
        assert_eq!(out, vec![c.clone()]);
    }
}

#[test]
fn snapshots_conserve_particles() {
    let env = rough_q(32, 9, 1.0);
    let c = Configuration::new((0..32).map(|k| (k % 4) as u32).collect()).unwrap();
    for (g, engine) in [
        (RateFunction::linear(1.0, 16).unwrap(), Engine::Walkers),
        (RateFunction::kink5(16).unwrap(), Engine::Walkers),
        (RateFunction::kink5(16).unwrap(), Engine::Tree),
    ] {
        let snaps = [0.0, 0.01, 0.02, 0.05];
        let out = simulate_with(engine, &c, &env, &g, 0.05, &snaps, &mut rng(2)).unwrap();
        assert_eq!(out.len(), 4);
        for s in &out {
            assert_eq!(s.eta.iter().map(|&e| e as u64).sum::<u64>(), c.total);
            assert_eq!(s.total, c.total);
        }
    }
    assert!(simulate(&c, &env, &RateFunction::kink5(16).unwrap(), 0.1, &[0.2], &mut rng(0)).is_err());
}

#[test]
fn oversized_drift_rejected() {
    let env = DriftField::from_q(vec![1.0, 0.0, 0.0, 0.0]);
    let g = RateFunction::linear(1.0, 8).unwrap();
    let c = Configuration::new(vec![1, 0, 0, 0]).unwrap();
    assert!(matches!(EventState::new(&c, &env, &g), Err(Error::DriftTooLarge { .. })));
}

/// Time-weighted occupation law of the tiny system.
struct Occupation {
    states: Vec<Vec<u32>>,
    time: Vec<f64>,
}

impl Observer for Occupation {
    fn elapse(&mut self, dt: f64, eta: &[u32]) {
        let i = self.states.iter().position(|s| s == eta).unwrap();
        self.time[i] += dt;
    }
}

#[test]
fn small_system_matches_exact_stationary_law() {
    let env = rough_q(3, 7, 0.6);
    let g = RateFunction::linear(1.0, 8).unwrap();
    let fg = full_generator(&env, &g, 2).unwrap();
    let exact = stationary_vector(&fg.q).unwrap();
    let profile = solve_fugacities(&env).unwrap();
    let canon = canonical_from_profile(&fg.states, &profile.phi, &g);
    assert!(total_variation(&exact, &canon) < 1e-12);

    for engine in [Engine::Tree, Engine::Walkers] {
        let c = Configuration::new(vec![2, 0, 0]).unwrap();
        let mut sim = Sim::new(&c, &env, &g, engine).unwrap();
        let mut occ = Occupation { states: fg.states.clone(), time: vec![0.0; fg.states.len()] };
        let mut r = rng(3);
        // 18 jumps per unit time: about 10^6 jumps after burn-in.
        sim.run_until(10.0, &mut r, &mut NoObserver);
        sim.run_until(10.0 + 1e6 / 18.0, &mut r, &mut occ);
        let tot: f64 = occ.time.iter().sum();
        let emp: Vec<f64> = occ.time.iter().map(|t| t / tot).collect();
        let tv = total_variation(&emp, &exact);
        assert!(tv < 0.01, "{engine:?}: tv {tv}");
    }
}

#[test]
fn small_nonlinear_system_matches_exact_stationary_law() {
    let env = rough_q(4, 13, 0.8);
    let g = RateFunction::kink5(8).unwrap();
    let fg = full_generator(&env, &g, 3).unwrap();
    let exact = stationary_vector(&fg.q).unwrap();
    let c = Configuration::new(vec![3, 0, 0, 0]).unwrap();
    let mut sim = Sim::new(&c, &env, &g, Engine::Walkers).unwrap();
    let mut occ = Occupation { states: fg.states.clone(), time: vec![0.0; fg.states.len()] };
    let mut r = rng(4);
    sim.run_until(5.0, &mut r, &mut NoObserver);
    sim.run_until(5e4, &mut r, &mut occ);
    let tot: f64 = occ.time.iter().sum();
    let emp: Vec<f64> = occ.time.iter().map(|t| t / tot).collect();
    assert!(total_variation(&emp, &exact) < 0.01);
}

#[test]
fn engines_agree_in_law_on_a_small_torus() {
    // Mean of the pairing with sin after a short time, both engines.
    let n = 16;
    let env = rough_q(n, 21, 1.0);
    let g = RateFunction::kink5(16).unwrap();
    let c = Configuration::new((0..n).map(|k| if k < 4 { 3 } else { 0 }).collect()).unwrap();
    let obs = |e: &Configuration| e.pair(|x| (2.0 * std::f64::consts::PI * x).sin());
    let reps = 4000;
    let run = |engine: Engine, seed: u64| -> (f64, f64) {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..reps)
            .map(|_| obs(&simulate_with(engine, &c, &env, &g, 0.002, &[], &mut r).unwrap()[0]))
            .collect();
        let m = v.iter().sum::<f64>() / reps as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        (m, var / reps as f64)
    };
    let (a, va) = run(Engine::Tree, 1);
    let (b, vb) = run(Engine::Walkers, 2);
    assert!((a - b).abs() < 4.0 * (va + vb).sqrt(), "{a} vs {b}");
}

#[test]
fn block_average_examples() {
    let c = Configuration::new(vec![3; 11]).unwrap();
    for l in 0..=5 {
        for k in 0..11 {
            assert_eq!(block_average(&c, k, l).unwrap(), 3.0);
        }
    }
    let mut r = rng(8);
    let c = Configuration::new((0..21).map(|_| r.random_range(0..6)).collect()).unwrap();
    for k in 0..21 {
        assert!((block_average(&c, k, 10).unwrap() - c.total as f64 / 21.0).abs() < 1e-14);
    }
    for _ in 0..20 {
        let k = r.random_range(0..21usize);
        let l = r.random_range(0..=10usize);
        let direct: u32 = (k as i64 - l as i64..=k as i64 + l as i64).map(|y| c.eta[y.rem_euclid(21) as usize]).sum();
        assert!((block_average(&c, k, l).unwrap() - direct as f64 / (2 * l + 1) as f64).abs() < 1e-14);
        assert!((block_averages(&c.eta, l)[k] - direct as f64 / (2 * l + 1) as f64).abs() < 1e-12);
    }
    assert!(block_average(&c, 0, 11).is_err());
}

#[test]
fn smoothing_single_particle_and_constant() {
    let n = 100;
    let mut eta = vec![0; n];
    eta[50] = 1;
    let c = Configuration::new(eta).unwrap();
    let f = smooth_empirical(&c, 0.25, 64).unwrap();
    for i in 0..64 {
        let x = f.x(i);
        let d = (x - 0.5).abs();
        let expect = if d <= 0.25 { 2.0 / n as f64 } else { 0.0 };
        assert!((f.values[i] - expect).abs() < 1e-14, "x={x}");
    }
    let c = Configuration::new(vec![2; n]).unwrap();
    let f = smooth_empirical(&c, 0.1, 50).unwrap();
    let window = 2.0 * 0.1 * n as f64;
    for v in &f.values {
        // Box of 2 theta N (+/- 1) sites, each weighted 1/(2 theta N).
        assert!((v - 2.0).abs() <= 2.0 * 1.0 / window + 1e-12, "{v}");
    }
    assert!(smooth_empirical(&c, 0.001, 50).is_err());
}

#[test]
fn smoothed_mass_close_to_total() {
    let mut r = rng(12);
    for &(n, theta) in &[(100usize, 0.05), (1000, 0.02), (257, 0.1)] {
        let c = Configuration::new((0..n).map(|_| r.random_range(0..5)).collect()).unwrap();
        let f = smooth_empirical(&c, theta, 512).unwrap();
        let target = c.total as f64 / n as f64;
        let rel = (f.mass() - target).abs() / target;
        assert!(rel <= 1.0 / (theta * n as f64), "N={n}: {rel}");
    }
}

#[test]
fn tagged_single_particle_follows_site() {
    let n = 12;
    let env = rough_q(n, 1, 0.5);
    let g = RateFunction::linear(1.0, 8).unwrap();
    let mut eta = vec![0; n];
    eta[5] = 1;
    let c = Configuration::new(eta).unwrap();
    let mut st = EventState::new(&c, &env, &g).unwrap();
    let path = track_tagged(&mut st, 0, 0.5, &mut rng(2)).unwrap();
    let last = *path.positions.last().unwrap();
    assert_eq!(st.eta()[last.rem_euclid(n as i64) as usize], 1);
    assert!(path.departures.iter().all(|&(m, moved)| m == 1 && moved));
    assert!(path.increments().iter().all(|d| d.abs() == 1));
    assert!(track_tagged(&mut st, 1, 1.0, &mut rng(0)).is_err());
}

#[test]
fn tagged_increments_symmetric_in_flat_environment() {
    let n = 50;
    let env = DriftField::zero(n);
    let g = RateFunction::linear(1.0, 8).unwrap();
    let c = Configuration::new(vec![1; n]).unwrap();
    let mut st = EventState::new(&c, &env, &g).unwrap();
    let path = track_tagged(&mut st, 7, 5.0, &mut rng(9)).unwrap();
    let inc = path.increments();
    assert!(inc.len() > 10_000, "{}", inc.len());
    let up = inc.iter().filter(|&&d| d > 0).count() as u64;
    assert!(binomial_pvalue(up, inc.len() as u64, 0.5) > 0.01);
}

#[test]
fn tagged_selected_half_the_time_with_two_residents() {
    let n = 10;
    let env = DriftField::zero(n);
    let g = RateFunction::linear(1.0, 8).unwrap();
    let c = Configuration::new(vec![2; n]).unwrap();
    let mut st = EventState::new(&c, &env, &g).unwrap();
    let path = track_tagged(&mut st, 0, 40.0, &mut rng(10)).unwrap();
    let twos: Vec<bool> = path.departures.iter().filter(|d| d.0 == 2).map(|d| d.1).collect();
    assert!(twos.len() > 2000);
    let hits = twos.iter().filter(|&&b| b).count() as u64;
    assert!(binomial_pvalue(hits, twos.len() as u64, 0.5) > 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sum_tree_stays_coherent(seed in any::<u64>(), n in 3usize..40, steps in 1usize..400) {
        let env = rough_q(n, seed, 0.4 * (n as f64).sqrt().min(1.0));
        let g = RateFunction::kink5(8).unwrap();
        let mut r = rng(seed);
        let c = Configuration::new((0..n).map(|_| r.random_range(0..4)).collect()).unwrap();
        prop_assume!(c.total > 0);
        let mut st = EventState::new(&c, &env, &g).unwrap();
        for _ in 0..steps {
            let before = st.eta().to_vec();
            let ev = st.step(&mut r).unwrap();
            // Locality: only the source and one neighbour change.
            let changed: Vec<usize> = (0..n).filter(|&k| before[k] != st.eta()[k]).collect();
            prop_assert!(changed.iter().all(|&k| k == ev.site || k == ev.dest));
            prop_assert!(ev.dest == (ev.site + 1) % n || ev.dest == (ev.site + n - 1) % n);
            prop_assert!(st.tree_coherence_error() < 1e-12);
            prop_assert_eq!(st.eta().iter().map(|&e| e as u64).sum::<u64>(), c.total);
        }
    }

    #[test]
    fn sum_tree_find_matches_linear_scan(leaves in prop::collection::vec(0.0f64..5.0, 1..64), u in 0.0f64..1.0) {
        let t = SumTree::new(&leaves);
        let total: f64 = leaves.iter().sum();
        prop_assume!(total > 0.0);
        let target = u * t.total();
        let i = t.find(target);
        prop_assert!(leaves[i] > 0.0);
        let before: f64 = leaves[..i].iter().sum();
        prop_assert!(before <= target + 1e-9 && target <= before + leaves[i] + 1e-9);
    }

    #[test]
    fn walker_engine_conserves(seed in any::<u64>(), n in 3usize..30) {
        let env = rough_q(n, seed, 0.3);
        let g = RateFunction::kink5(8).unwrap();
        let mut r = rng(seed);
        let c = Configuration::new((0..n).map(|_| r.random_range(0..4)).collect()).unwrap();
        let mut sim = Sim::new(&c, &env, &g, Engine::Walkers).unwrap();
        sim.advance_to(0.01, &mut r);
        prop_assert_eq!(sim.eta().iter().map(|&e| e as u64).sum::<u64>(), c.total);
    }
}
