use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zrp::environment::{DisorderLaw, DriftField, QuenchedEnvironment};
use zrp::invariant_measure::*;
use zrp::stats::chi_square_pvalue;
use zrp::zero_range::RateFunction;

fn linear() -> RateFunction {
    RateFunction::linear(1.0, 64).unwrap()
}

fn kink() -> RateFunction {
    RateFunction::kink5(64).unwrap()
}

/// Direct series sum_{n<nmax} phi^n / g(n)!.
fn series_z(g: impl Fn(usize) -> f64, phi: f64, nmax: usize) -> (f64, f64, f64) {
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut w = 1.0;
    for n in 0..nmax {
        if n > 0 {
            w *= phi / g(n);
        }
        z += w;
        m1 += w * n as f64;
        m2 += w * (n * n) as f64;
    }
    (z, m1 / z, m2 / z - (m1 / z).powi(2))
}

fn env7(n: usize) -> DriftField {
    QuenchedEnvironment::new(7, DisorderLaw::Rademacher, 1 << 16).unwrap().drift(n, 0.1).unwrap()
}

fn rough_q(n: usize, seed: u64, amp: f64) -> DriftField {
    let law = DisorderLaw::UniformPm(1.0);
    DriftField::from_q((0..n).map(|k| amp * law.value_at(seed, k as i64)).collect())
}

fn residual_oracle(env: &DriftField, phi: &[f64]) -> f64 {
    let n = env.n;
    let sq = (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let (a, b) = ((k + n - 1) % n, (k + 1) % n);
            ((0.5 + env.q[a] / sq) * phi[a] + (0.5 - env.q[b] / sq) * phi[b] - phi[k]).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn partition_function_closed_forms() {
    let (z, _) = partition_z(&linear(), 1.0).unwrap();
    assert!((z - 1f64.exp()).abs() < 1e-12);
    assert_eq!(partition_z(&kink(), 0.0).unwrap().0, 1.0);
    assert_eq!(partition_z(&linear(), 0.0).unwrap().0, 1.0);
    let g2 = RateFunction::linear(2.0, 64).unwrap();
    let (z, _) = partition_z(&g2, 1.0).unwrap();
    assert!((z - 0.5f64.exp()).abs() < 1e-12);
    assert!(partition_z(&linear(), -1.0).is_err());
}

#[test]
fn partition_function_matches_series_for_kink() {
    for phi in [0.3, 1.0, 4.0, 12.0] {
        let (z, _) = partition_z(&kink(), phi).unwrap();
        let (s, _, _) = series_z(|n| (n + n.min(5)) as f64, phi, 400);
        assert!((z - s).abs() < 1e-12 * s, "phi {phi}: {z} vs {s}");
    }
}

#[test]
fn single_site_law_is_normalised_with_small_tail() {
    for phi in [0.1, 1.0, 5.0, 30.0] {
        let law = single_site_law(&kink(), phi).unwrap();
        let s: f64 = law.probs.iter().sum();
        assert!(s <= 1.0 + 1e-15 && s >= 1.0 - 1e-12);
        assert!(law.probs.iter().all(|&p| p >= 0.0));
        let (_, m, v) = series_z(|n| (n + n.min(5)) as f64, phi, 800);
        assert!((law.mean() - m).abs() < 1e-10 * (1.0 + m));
        assert!((law.variance() - v).abs() < 1e-9 * (1.0 + v));
    }
}

#[test]
fn moments_closed_forms() {
    for phi in [0.5, 1.0, 2.5] {
        let (r, v) = moments(&linear(), phi).unwrap();
        assert!((r - phi).abs() < 1e-12 && (v - phi).abs() < 1e-12);
    }
    let (r, v) = moments(&RateFunction::linear(2.0, 64).unwrap(), 2.0).unwrap();
    assert!((r - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    assert_eq!(moments(&kink(), 0.0).unwrap().0, 0.0);
}

#[test]
fn mean_rate_equals_fugacity() {
    let g = kink();
    for phi in [0.5, 1.0, 3.0] {
        let law = single_site_law(&g, phi).unwrap();
        let eg: f64 = law.probs.iter().enumerate().map(|(n, p)| p * g.g(n)).sum();
        assert!((eg - phi).abs() < 1e-10, "phi {phi}: {eg}");
    }
}

#[test]
fn mean_is_strictly_increasing() {
    let g = kink();
    let rs: Vec<f64> = (0..200).map(|i| moments(&g, i as f64 * 0.05).unwrap().0).collect();
    assert!(rs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn phi_inversion_closed_forms() {
    let (p, d) = phi_of_rho(&linear(), 2.0).unwrap();
    assert!((p - 2.0).abs() < 1e-12 && (d - 1.0).abs() < 1e-12);
    let g2 = RateFunction::linear(2.0, 64).unwrap();
    for rho in [0.1, 0.7, 3.0] {
        assert!((phi_of_rho(&g2, rho).unwrap().0 - 2.0 * rho).abs() < 1e-11);
    }
    assert!(phi_of_rho(&linear(), -0.1).is_err());
}

#[test]
fn phi_inversion_kink_bounds_and_monotone() {
    let g = kink();
    let (p, d) = phi_of_rho(&g, 1.7).unwrap();
    assert!(p >= g.g_star_lower * 1.7 && p <= g.g_star_upper * 1.7);
    assert!((moments(&g, p).unwrap().0 - 1.7).abs() <= 1e-12 * 2.7);
    assert!(d > 0.0);
    let grid: Vec<(f64, f64)> = (1..100).map(|i| phi_of_rho(&g, i as f64 * 0.05).unwrap()).collect();
    assert!(grid.windows(2).all(|w| w[1].0 > w[0].0));
    // Phi' bounded above and away from zero on the compact grid.
    let dmin = grid.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let dmax = grid.iter().map(|v| v.1).fold(0.0, f64::max);
    assert!(dmin >= 1.0 - 1e-9 && dmax <= 2.0 + 1e-9, "{dmin} {dmax}");
}

#[test]
fn phi_table_matches_direct_inversion() {
    let g = kink();
    let mut t = PhiTable::new(&g, 4.0, 1.0 / 256.0).unwrap();
    for i in 0..50 {
        let rho = 0.013 + i as f64 * 0.17;
        let (a, da) = t.get(rho).unwrap();
        let (b, db) = phi_of_rho(&g, rho).unwrap();
        assert!((a - b).abs() < 1e-7, "rho {rho}");
        assert!((da - db).abs() < 1e-3);
    }
}

#[test]
fn homogeneous_fugacities_are_flat() {
    let f = solve_fugacities(&DriftField::zero(50)).unwrap();
    assert!(f.phi.iter().all(|&p| (p - 1.0).abs() < 1e-12));
    assert!(f.gamma.abs() < 1e-12);
}

#[test]
fn rough_fugacities_solve_the_recursion() {
    let env = env7(64);
    let f = solve_fugacities(&env).unwrap();
    assert!(residual_oracle(&env, &f.phi) < 1e-10);
    assert!((f.phi.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
    assert!(f.phi.iter().all(|&p| p > 0.0));
    // gamma is the common flux r_k phi_k - l_{k+1} phi_{k+1}.
    for k in 0..64 {
        let flux = env.right_prob(k) * f.phi[k] - env.left_prob((k + 1) % 64) * f.phi[(k + 1) % 64];
        assert!((flux - f.gamma).abs() < 1e-10);
    }
}

#[test]
fn fugacity_increments_scale_like_one_over_n() {
    let vals: Vec<(f64, f64)> = [64usize, 512, 4096]
        .iter()
        .map(|&n| {
            let f = solve_fugacities(&env7(n)).unwrap();
            (f.max_increment_times_n(), f.max_min_ratio())
        })
        .collect();
    let inc_max = vals.iter().map(|v| v.0).fold(0.0, f64::max);
    let inc_min = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    assert!(inc_max / inc_min < 3.0, "{vals:?}");
    let ratio_max = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    let ratio_min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    assert!(ratio_max / ratio_min < 2.0, "{vals:?}");
}

#[test]
fn fugacity_solver_rejects_bad_input() {
    assert!(solve_fugacities(&DriftField::zero(2)).is_err());
    assert!(solve_fugacities(&DriftField::from_q(vec![2.0, 0.0, 0.0, 0.0])).is_err());
}

#[test]
fn product_sampler_poisson_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10;
    let s = ProductSampler::new(&vec![1.0; n], &linear()).unwrap();
    let draws = 100_000;
    let mut sums = vec![0.0; n];
    for _ in 0..draws {
        let c = s.sample(&mut rng);
        for (a, &e) in sums.iter_mut().zip(&c.eta) {
            *a += e as f64;
        }
    }
    for v in sums {
        let mean = v / draws as f64;
        assert!((mean - 1.0).abs() < 3.0 * (1.0 / draws as f64).sqrt() * 1.5, "{mean}");
    }
}

#[test]
fn local_equilibrium_flat_profile() {
    let (rho, phi) = le_fugacities(|_| 2.0, 32, &linear()).unwrap();
    assert!(rho.iter().all(|&r| (r - 2.0).abs() < 1e-13));
    assert!(phi.iter().all(|&p| (p - 2.0).abs() < 1e-11));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = ProductSampler::new(&phi, &linear()).unwrap();
    let draws = 20_000;
    let total: u64 = (0..draws).map(|_| s.sample(&mut rng).total).sum();
    let mean = total as f64 / (draws * 32) as f64;
    assert!((mean - 2.0).abs() < 0.01, "{mean}");
}

#[test]
fn local_equilibrium_cell_averages() {
    // Cell k averages rho0 over ((k-1)/N, k/N]; site 0 is cell N.
    let n = 16;
    let (rho, _) = le_fugacities(|x| 1.0 + x * x, n, &linear()).unwrap();
    for k in 0..n {
        let site = if k == 0 { n } else { k };
        let (a, b) = ((site - 1) as f64 / n as f64, site as f64 / n as f64);
        let exact = n as f64 * ((b - a) + (b.powi(3) - a.powi(3)) / 3.0);
        assert!((rho[k] - exact).abs() < 1e-13);
    }
}

#[test]
fn product_sampler_chi_square_per_site() {
    let g = kink();
    let phis = [0.4, 1.3, 2.2];
    let s = ProductSampler::new(&phis, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 50_000;
    let mut counts = vec![vec![0.0; 12]; 3];
    for _ in 0..draws {
        let c = s.sample(&mut rng);
        for (k, &e) in c.eta.iter().enumerate() {
            counts[k][(e as usize).min(11)] += 1.0;
        }
    }
    for (k, &phi) in phis.iter().enumerate() {
        let law = single_site_law(&g, phi).unwrap();
        let mut expected: Vec<f64> = (0..12).map(|i| law.probs.get(i).copied().unwrap_or(0.0) * draws as f64).collect();
        expected[11] = (law.probs.iter().skip(11).sum::<f64>()) * draws as f64;
        // Merge sparse cells into their left neighbour.
        let (mut obs, mut exp) = (Vec::new(), Vec::new());
        for i in 0..12 {
            if exp.is_empty() || expected[i] >= 5.0 {
                obs.push(counts[k][i]);
                exp.push(expected[i]);
            } else {
                *obs.last_mut().unwrap() += counts[k][i];
                *exp.last_mut().unwrap() += expected[i];
            }
        }
        assert!(chi_square_pvalue(&obs, &exp) > 0.01, "site {k}");
    }
}

#[test]
fn relative_entropy_cases() {
    let g = linear();
    let phi = vec![0.3, 0.8, 1.0, 0.5];
    let rho: Vec<f64> = phi.iter().map(|&p| moments(&g, p).unwrap().0).collect();
    assert!(relative_entropy_le(&g, &phi, &phi, &rho).unwrap().abs() < 1e-12);

    // Poisson(1) against Poisson(e^-1) site by site.
    let n = 5;
    let le = vec![1.0; n];
    let prof = vec![(-1f64).exp(); n];
    let rho = vec![1.0; n];
    let h = relative_entropy_le(&g, &le, &prof, &rho).unwrap();
    let kl_site = 1.0 * (1.0 / prof[0]).ln() + prof[0] - 1.0;
    assert!((h - n as f64 * kl_site).abs() < 1e-12);
}

#[test]
fn relative_entropy_is_order_n() {
    let g = linear();
    let per_site: Vec<f64> = [64usize, 512]
        .iter()
        .map(|&n| {
            let f = solve_fugacities(&env7(n)).unwrap();
            let (rho, le) = le_fugacities(|_| 2.0, n, &g).unwrap();
            relative_entropy_le(&g, &le, &f.phi, &rho).unwrap() / n as f64
        })
        .collect();
    assert!(per_site.iter().all(|&h| h >= 0.0 && h < 5.0), "{per_site:?}");
    assert!(per_site[1] < 2.0 * per_site[0] && per_site[0] < 2.0 * per_site[1]);
}

fn enumerate_expectation(phi: &[f64], g: &RateFunction, j: usize, site: usize, obs: Observable) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for s in compositions(phi.len(), j) {
        let w: f64 = s
            .iter()
            .zip(phi)
            .map(|(&e, &p)| p.powi(e as i32) / (1..=e as usize).map(|i| g.g(i)).product::<f64>())
            .product();
        let f = match obs {
            Observable::G => g.g(s[site] as usize),
            Observable::Occupancy => s[site] as f64,
        };
        num += w * f;
        den += w;
    }
    num / den
}

#[test]
fn canonical_homogeneous_three_sites() {
    let b = CanonicalBlock { phi: vec![0.7; 3], j: 2, g: linear() };
    for site in 0..3 {
        assert!((canonical_expectation(&b, site, Observable::Occupancy).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((canonical_expectation(&b, site, Observable::G).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(compositions(3, 2).len(), 6);
}

#[test]
fn canonical_matches_enumeration() {
    let g = kink();
    let phi = [0.4, 1.0, 2.3];
    for j in 0..=4 {
        for site in 0..3 {
            for obs in [Observable::G, Observable::Occupancy] {
                let dp = canonical_expectation(&CanonicalBlock { phi: phi.to_vec(), j, g: g.clone() }, site, obs).unwrap();
                let en = enumerate_expectation(&phi, &g, j, site, obs);
                assert!((dp - en).abs() < 1e-12, "j={j} site={site} {obs:?}: {dp} vs {en}");
            }
        }
    }
}

#[test]
fn canonical_budget_enforced() {
    let b = CanonicalBlock { phi: vec![1.0; 65], j: 3, g: linear() };
    assert!(canonical_expectation(&b, 0, Observable::G).is_err());
    assert!(canonical_expectation(&CanonicalBlock { phi: vec![1.0; 3], j: 1, g: linear() }, 3, Observable::G).is_err());
}

#[test]
fn equivalence_of_ensembles_improves_with_block_size() {
    let g = kink();
    let (target, _) = phi_of_rho(&g, 1.0).unwrap();
    let gaps: Vec<f64> = [2usize, 4, 8, 16]
        .iter()
        .map(|&l| {
            let b = CanonicalBlock { phi: vec![1.0; 2 * l + 1], j: 2 * l + 1, g: g.clone() };
            (canonical_expectation(&b, 0, Observable::G).unwrap() - target).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn full_generator_stationary_law_is_canonical() {
    for (n, total, seed) in [(3usize, 2usize, 7u64), (4, 3, 1), (4, 2, 5)] {
        let env = rough_q(n, seed, 0.7);
        for g in [linear(), kink()] {
            let fg = full_generator(&env, &g, total).unwrap();
            let pi = stationary_vector(&fg.q).unwrap();
            let prof = solve_fugacities(&env).unwrap();
            let canon = canonical_from_profile(&fg.states, &prof.phi, &g);
            let tv: f64 = pi.iter().zip(&canon).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-12, "n={n} total={total}: {tv}");
        }
    }
}

#[test]
fn three_site_path_gap_closed_form() {
    // One particle on a 3-site path, each bond crossed at rate 1/2 both ways:
    // generator eigenvalues 0, 1/2, 3/2.
    let env = DriftField::zero(9);
    let prof = solve_fugacities(&env).unwrap();
    let gen = build_block_generator(BlockSpec::One { k: 4, l: 1 }, &env, &prof, &linear(), 1).unwrap();
    assert_eq!(gen.dim(), 3);
    let gap = spectral_gap(&gen).unwrap();
    assert!((gap - 0.5).abs() < 1e-12, "{gap}");
    let q = gen.dense();
    for i in 0..3 {
        assert!(q.row(i).sum().abs() < 1e-14);
    }
}

#[test]
fn two_block_chain_is_irreducible() {
    let env = rough_q(20, 4, 0.5);
    let prof = solve_fugacities(&env).unwrap();
    for j in 1..=3 {
        let gen = build_block_generator(BlockSpec::Two { k: 3, k2: 12, l: 1 }, &env, &prof, &kink(), j).unwrap();
        assert!(gen.is_irreducible());
        assert!(gen.detailed_balance_residual() < 1e-10);
    }
    assert!(build_block_generator(BlockSpec::Two { k: 3, k2: 4, l: 1 }, &env, &prof, &kink(), 2).is_err());
}

#[test]
fn gap_inverse_grows_at_most_like_block_area() {
    let env = DriftField::zero(32);
    let prof = solve_fugacities(&env).unwrap();
    let inv: Vec<f64> = (1..=3)
        .map(|l| {
            let gen = build_block_generator(BlockSpec::One { k: 10, l }, &env, &prof, &kink(), 2).unwrap();
            1.0 / spectral_gap(&gen).unwrap() / ((2 * l + 1) as f64).powi(2)
        })
        .collect();
    let max = inv.iter().cloned().fold(0.0, f64::max);
    let min = inv.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min < 3.0, "{inv:?}");
}

#[test]
fn lanczos_agrees_with_dense() {
    let env = rough_q(24, 8, 1.0);
    let prof = solve_fugacities(&env).unwrap();
    let gen = build_block_generator(BlockSpec::One { k: 7, l: 3 }, &env, &prof, &kink(), 4).unwrap();
    let a = spectral_gap_with(&gen, GapMethod::Dense).unwrap();
    let b = spectral_gap_with(&gen, GapMethod::Lanczos).unwrap();
    assert!((a - b).abs() < 1e-6 * a.max(1.0), "{a} vs {b}");
}

#[test]
fn inhomogeneous_gap_approaches_homogeneous() {
    let g = linear();
    let hom = {
        let env = DriftField::zero(64);
        let prof = solve_fugacities(&env).unwrap();
        spectral_gap(&build_block_generator(BlockSpec::One { k: 10, l: 2 }, &env, &prof, &g, 2).unwrap()).unwrap()
    };
    let ratios: Vec<f64> = [64usize, 1024, 16384]
        .iter()
        .map(|&n| {
            let env = env7(n);
            let prof = solve_fugacities(&env).unwrap();
            let gen = build_block_generator(BlockSpec::One { k: n / 3, l: 2 }, &env, &prof, &g, 2).unwrap();
            spectral_gap(&gen).unwrap() / hom
        })
        .collect();
    let dev: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    assert!(dev[2] < dev[0], "{ratios:?}");
    assert!(dev[2] < 0.05, "{ratios:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fugacity_profile_is_anchor_invariant(seed in any::<u64>(), n in 3usize..80, anchor in 0usize..80) {
        let env = rough_q(n, seed, 0.4 * (n as f64).sqrt().min(1.5));
        let a = solve_fugacities(&env).unwrap();
        let b = solve_fugacities_anchored(&env, anchor % n).unwrap();
        for k in 0..n {
            prop_assert!((a.phi[k] - b.phi[k]).abs() < 1e-10);
        }
        prop_assert!(residual_oracle(&env, &a.phi) < 1e-10);
    }

    #[test]
    fn mean_rate_identity_on_grid(phi in 0.01f64..8.0) {
        let g = kink();
        let law = single_site_law(&g, phi).unwrap();
        let eg: f64 = law.probs.iter().enumerate().map(|(n, p)| p * g.g(n)).sum();
        prop_assert!((eg - phi).abs() < 1e-10);
    }

    #[test]
    fn phi_inverts_mean(rho in 0.0f64..6.0) {
        let g = kink();
        let (p, _) = phi_of_rho(&g, rho).unwrap();
        prop_assert!((moments(&g, p).unwrap().0 - rho).abs() <= 1e-12 * (1.0 + rho));
        prop_assert!(p >= g.g_star_lower * rho * (1.0 - 1e-12) && p <= g.g_star_upper * rho * (1.0 + 1e-12));
    }

    #[test]
    fn block_detailed_balance(seed in any::<u64>(), l in 1usize..3, j in 1usize..4, k in 0usize..16) {
        let env = rough_q(16, seed, 1.0);
        let prof = solve_fugacities(&env).unwrap();
        let gen = build_block_generator(BlockSpec::One { k, l }, &env, &prof, &kink(), j).unwrap();
        prop_assert!(gen.detailed_balance_residual() < 1e-10);
        prop_assert!(gen.is_irreducible());
        let q = gen.dense();
        for i in 0..gen.dim() {
            prop_assert!(q.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_dp_equals_enumeration(p0 in 0.1f64..3.0, p1 in 0.1f64..3.0, p2 in 0.1f64..3.0, j in 0usize..5) {
        let g = kink();
        let phi = [p0, p1, p2];
        let b = CanonicalBlock { phi: phi.to_vec(), j, g: g.clone() };
        for site in 0..3 {
            let dp = canonical_expectation(&b, site, Observable::G).unwrap();
            let en = enumerate_expectation(&phi, &g, j, site, Observable::G);
            prop_assert!((dp - en).abs() < 1e-12 * (1.0 + en));
        }
    }
}
