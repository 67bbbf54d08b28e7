use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use zrp::environment::{DisorderLaw, QuenchedEnvironment, DEFAULT_N_REF};
use zrp::invariant_measure::{moments, phi_of_rho, solve_fugacities};
use zrp::pde::*;
use zrp::zero_range::RateFunction;
use zrp::DensityField;

fn linear() -> RateFunction {
    RateFunction::linear(1.0, 64).unwrap()
}

fn heat_exact(t: f64, x: f64) -> f64 {
    1.0 + (-2.0 * PI * PI * t).exp() * (TAU * x).cos()
}

fn zero(_: f64) -> f64 {
    0.0
}

fn heat_error(m: usize) -> f64 {
    let rho0 = DensityField::from_fn(m, |x| heat_exact(0.0, x));
    let tr = solve_pde(&rho0, &zero, &linear(), 0.1, &[0.1], PdeConfig::default()).unwrap();
    let exact = DensityField::from_fn(m, |x| heat_exact(0.1, x));
    tr.fields[0].sup_distance(&exact)
}

fn rough_env() -> QuenchedEnvironment {
    QuenchedEnvironment::new(7, DisorderLaw::Rademacher, DEFAULT_N_REF).unwrap()
}

fn tests_family(t_final: f64) -> Vec<TrigTest> {
    let mut v = Vec::new();
    for n in 1..=3 {
        v.push(TrigTest { n, sine: true, t_final });
        v.push(TrigTest { n, sine: false, t_final });
    }
    v
}

#[test]
fn heat_kernel_case() {
    let err = heat_error(512);
    assert!(err <= 1e-3, "{err}");
    let rho0 = DensityField::from_fn(512, |x| heat_exact(0.0, x));
    let tr = solve_pde(&rho0, &zero, &linear(), 0.1, &[0.05, 0.1], PdeConfig::default()).unwrap();
    assert!(tr.mass_drift <= 1e-12);
    assert_eq!(tr.clipped, 0);
    assert_eq!(tr.times, vec![0.05, 0.1]);
}

#[test]
fn heat_kernel_self_convergence() {
    let errs: Vec<f64> = [128, 256, 512].iter().map(|&m| heat_error(m)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.8, "{errs:?}");
    }
}

#[test]
fn constant_state_is_fixed() {
    for g in [linear(), RateFunction::kink5(64).unwrap()] {
        let rho0 = DensityField::new(vec![1.3; 256]);
        let tr = solve_pde(&rho0, &zero, &g, 0.05, &[], PdeConfig::default()).unwrap();
        assert!(tr.fields[0].values.iter().all(|&v| (v - 1.3).abs() < 1e-12));
    }
}

#[test]
fn rejects_bad_grids_and_data() {
    let g = linear();
    assert!(solve_pde(&DensityField::new(vec![1.0; 100]), &zero, &g, 0.1, &[], PdeConfig::default()).is_err());
    assert!(solve_pde(&DensityField::new(vec![1.0; 64]), &zero, &g, 0.1, &[], PdeConfig::default()).is_err());
    let mut neg = vec![1.0; 128];
    neg[3] = -0.5;
    assert!(solve_pde(&DensityField::new(neg), &zero, &g, 0.1, &[], PdeConfig::default()).is_err());
    let cfg = PdeConfig { cfl: 0.5, ..Default::default() };
    assert!(solve_pde(&DensityField::new(vec![1.0; 128]), &zero, &g, 0.1, &[], cfg).is_err());
}

#[test]
fn rough_drift_run_conserves_mass_and_positivity() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    for flux in [FluxType::Upwind, FluxType::Central] {
        let rho0 = DensityField::from_fn(512, |x| 1.0 + 0.5 * (TAU * x).cos());
        let cfg = PdeConfig { flux, ..Default::default() };
        let snaps: Vec<f64> = (1..=10).map(|i| i as f64 * 0.01).collect();
        let tr = solve_pde(&rho0, &drift, &RateFunction::kink5(64).unwrap(), 0.1, &snaps, cfg).unwrap();
        assert!(tr.mass_drift <= 1e-12, "{}", tr.mass_drift);
        for f in &tr.fields {
            assert!(f.values.iter().all(|&v| v >= 0.0));
            assert!((f.mass() - rho0.mass()).abs() <= 1e-12 * rho0.mass());
        }
    }
}

#[test]
fn analytic_heat_solution_has_small_weak_residual() {
    let m = 512;
    let t_final = 0.1;
    let k = 2000;
    let times: Vec<f64> = (0..=k).map(|i| t_final * i as f64 / k as f64).collect();
    let fields: Vec<DensityField> = times.iter().map(|&t| DensityField::from_fn(m, |x| heat_exact(t, x))).collect();
    let fam = tests_family(t_final);
    let refs: Vec<&dyn TestFunction> = fam.iter().map(|t| t as &dyn TestFunction).collect();
    let res = weak_residual_fields(&times, &fields, vec![0.0; m], &refs, &linear()).unwrap();
    for (t, r) in fam.iter().zip(&res) {
        assert!(r.abs() <= 1e-4, "{t:?}: {r}");
    }
}

#[test]
fn constant_solution_has_zero_residual() {
    let m = 256;
    let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.002).collect();
    let fields = vec![DensityField::new(vec![0.8; m]); times.len()];
    let fam = tests_family(0.1);
    let refs: Vec<&dyn TestFunction> = fam.iter().map(|t| t as &dyn TestFunction).collect();
    let res = weak_residual_fields(&times, &fields, vec![0.0; m], &refs, &linear()).unwrap();
    assert!(res.iter().all(|r| r.abs() <= 1e-12), "{res:?}");
}

#[test]
fn residual_requires_vanishing_test() {
    let m = 128;
    let times = vec![0.0, 0.05];
    let fields = vec![DensityField::new(vec![1.0; m]); 2];
    let t = TrigTest { n: 1, sine: false, t_final: 0.1 };
    let refs: Vec<&dyn TestFunction> = vec![&t];
    assert!(weak_residual_fields(&times, &fields, vec![0.0; m], &refs, &linear()).is_err());
}

#[test]
fn rough_drift_residual_shrinks_under_refinement() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    let g = RateFunction::kink5(64).unwrap();
    let t_final = 0.02;
    let fam = tests_family(t_final);
    let refs: Vec<&dyn TestFunction> = fam.iter().map(|t| t as &dyn TestFunction).collect();
    let worst = |m: usize, flux: FluxType| -> f64 {
        let rho0 = DensityField::from_fn(m, |x| 1.0 + 0.5 * (TAU * x).cos());
        let mut acc = None;
        let mut err = None;
        let tr = solve_pde_observed(&rho0, &drift, &g, t_final, &[t_final], PdeConfig { flux, ..Default::default() }, &mut |t, rho| {
            let a = acc.get_or_insert_with(|| {
                let faces: Vec<f64> = (0..m).map(|i| drift((i + 1) as f64 / m as f64)).collect();
                WeakAccumulator::new(&refs, faces, &g).unwrap()
            });
            if let Err(e) = a.push(t, rho) {
                err = Some(e);
            }
        })
        .unwrap();
        assert!(err.is_none());
        assert!(tr.mass_drift < 1e-12);
        acc.unwrap().finish().unwrap().iter().fold(0.0, |a, r| a.max(r.abs()))
    };
    // Central faces are second order in space.
    let (c128, c512) = (worst(128, FluxType::Central), worst(512, FluxType::Central));
    assert!(c128 >= 4.0 * c512, "{c128} vs {c512}");
    // Upwinding the advective flux is first order, so the residual drops by
    // about 4x per 4x refinement and no more.
    let (u128, u512) = (worst(128, FluxType::Upwind), worst(512, FluxType::Upwind));
    assert!(u128 > 3.0 * u512, "{u128} vs {u512}");
}

#[test]
fn pairing_is_lipschitz_in_time() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    let g = RateFunction::kink5(64).unwrap();
    let rho0 = DensityField::from_fn(256, |x| 1.0 + 0.5 * (TAU * x).cos());
    let snaps: Vec<f64> = (0..=40).map(|i| i as f64 * 0.0025).collect();
    let tr = solve_pde(&rho0, &drift, &g, 0.1, &snaps, PdeConfig::default()).unwrap();
    let pair = |f: &DensityField| (0..f.len()).map(|i| (TAU * f.x(i)).sin() * f.values[i]).sum::<f64>() * f.dx();
    // |d/dt <G, rho>| <= (|G''|/2 + 2 |G'| sup|W'|) sup Phi(rho).
    let wmax = (0..1000).map(|i| drift(i as f64 / 1000.0).abs()).fold(0.0, f64::max);
    let phimax = tr.fields.iter().flat_map(|f| f.values.iter()).map(|&r| phi_of_rho(&g, r).unwrap().0).fold(0.0, f64::max);
    let lip = (TAU * TAU / 2.0 + 2.0 * TAU * wmax) * phimax;
    for w in tr.fields.windows(2).zip(tr.times.windows(2)) {
        let (f, t) = w;
        assert!((pair(&f[1]) - pair(&f[0])).abs() <= lip * (t[1] - t[0]) * 1.01);
    }
}

#[test]
fn energy_proxy_is_stable_under_refinement() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    let g = linear();
    let energy = |m: usize| -> f64 {
        let rho0 = DensityField::from_fn(m, |x| 1.0 + 0.5 * (TAU * x).cos());
        let mut e = 0.0;
        let mut last = 0.0;
        solve_pde_observed(&rho0, &drift, &g, 0.05, &[0.05], PdeConfig::default(), &mut |t, rho| {
            let dx = 1.0 / rho.len() as f64;
            let s: f64 = (0..rho.len()).map(|i| ((rho[(i + 1) % rho.len()] - rho[i]) / dx).powi(2)).sum::<f64>() * dx;
            e += s * (t - last);
            last = t;
        })
        .unwrap();
        e
    };
    let (a, b) = (energy(128), energy(256));
    assert!(a.is_finite() && b.is_finite());
    assert!((a - b).abs() / b < 0.1, "{a} vs {b}");
}

#[test]
fn stationary_profile_flat_without_drift() {
    let f = stationary_profile(&zero, 1.7, &RateFunction::kink5(64).unwrap(), 256).unwrap();
    assert!(f.values.iter().all(|&v| (v - 1.7).abs() < 1e-10));
}

#[test]
fn stationary_profile_matches_discrete_fugacities() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    let g = linear();
    let m = 4096;
    let cont = stationary_profile(&drift, 1.0, &g, m).unwrap();
    let cont_phi: Vec<f64> = cont.values.iter().map(|&r| phi_of_rho(&g, r).unwrap().0).collect();
    let gaps: Vec<f64> = [512usize, 4096]
        .iter()
        .map(|&n| {
            let prof = solve_fugacities(&env.drift(n, 0.1).unwrap()).unwrap();
            // Scale the discrete profile so its mean density is 1.
            let mass = |c: f64| prof.phi.iter().map(|&p| moments(&g, c * p).unwrap().0).sum::<f64>() / n as f64;
            let (mut lo, mut hi) = (0.0, 10.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mass(mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let c = 0.5 * (lo + hi);
            (0..m)
                .map(|i| {
                    let x = (i as f64 + 0.5) / m as f64;
                    (c * prof.phi[(x * n as f64).floor() as usize] - cont_phi[i]).abs()
                })
                .sum::<f64>()
                / m as f64
        })
        .collect();
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn long_run_approaches_stationary_profile() {
    let env = rough_env();
    let drift = |x: f64| env.w_prime_eps(0.1, x);
    let g = linear();
    let m = 256;
    let st = stationary_profile(&drift, 1.0, &g, m).unwrap();
    let tr = solve_pde(&DensityField::new(vec![1.0; m]), &drift, &g, 2.0, &[2.0], PdeConfig::default()).unwrap();
    let d = tr.fields[0].l1_distance(&st);
    assert!(d < 1e-2, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_and_positivity_for_random_data(
        a in 0.0f64..2.0, b in 0.0f64..1.0, c in 0.0f64..1.0, n in 1u32..5, seed in 0u64..50
    ) {
        let env = QuenchedEnvironment::new(seed, DisorderLaw::Rademacher, 1 << 14).unwrap();
        let drift = |x: f64| env.w_prime_eps(0.1, x);
        let amp = (b + c).min(a + 0.01);
        let rho0 = DensityField::from_fn(128, |x| a + 0.01 + amp * (TAU * n as f64 * x).sin().max(-1.0));
        let tr = solve_pde(&rho0, &drift, &RateFunction::kink5(64).unwrap(), 0.01, &[], PdeConfig::default()).unwrap();
        prop_assert!(tr.mass_drift <= 1e-12);
        prop_assert!(tr.fields[0].values.iter().all(|&v| v >= 0.0));
    }
}
