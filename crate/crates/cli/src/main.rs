use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use zrp::brox::{
    brox_sample, seignourel_environment, sinai_endpoint, BroxConfig, BroxEnvironment, LazySinaiEnvironment,
};
use zrp::environment::{DisorderLaw, DriftField, QuenchedEnvironment, DEFAULT_N_REF};
use zrp::harness::{
    hdl_experiment, martingale_diag, replacement_diag, ExperimentConfig, InitProfile, TestFn,
};
use zrp::invariant_measure::{
    build_block_generator, canonical_expectation, le_fugacities, phi_of_rho, sample_product, solve_fugacities,
    spectral_gap, BlockSpec, CanonicalBlock, Observable,
};
use zrp::pde::{solve_pde_observed, FluxType, PdeConfig, TestFunction, TrigTest, WeakAccumulator};
use zrp::zero_range::{simulate_with, smooth_empirical, Engine, RateFunction};
use zrp::{stats, DensityField};

#[derive(Parser)]
#[command(name = "zrp", about = "Zero-range process in a quenched Sinai-type environment")]
struct Cli {
    /// Directory for CSV and JSON output.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlockMode {
    Gap,
    Ensembles,
}

#[derive(Clone, Copy, ValueEnum)]
enum Flux {
    Upwind,
    Central,
}

#[derive(Clone, Copy, ValueEnum)]
enum BroxMode {
    Sinai,
    Seignourel,
    Brox,
    Compare,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Auto,
    Tree,
    Walkers,
}

#[derive(Subcommand)]
enum Cmd {
    /// Drift field q_k of one quenched environment.
    Env {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_N_REF)]
        n_ref: usize,
    },
    /// Run the particle system and write snapshots.
    Simulate {
        #[arg(long, default_value_t = 512)]
        n: usize,
        /// Preset (linear, linear:C, kink5) or a file with the table g(0), g(1), ...
        #[arg(long, default_value = "linear")]
        g: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        #[arg(long, default_value_t = 7)]
        seed_env: u64,
        #[arg(long, default_value_t = 1)]
        seed_dyn: u64,
        #[arg(long, default_value_t = 0.05)]
        t_end: f64,
        /// Comma-separated snapshot times; defaults to t_end.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        /// Local-equilibrium profile: const:C or cos:A:B.
        #[arg(long, default_value = "cos:1:0.5")]
        init: String,
        #[arg(long, default_value_t = 0.05)]
        theta: f64,
        #[arg(long, default_value_t = 512)]
        m: usize,
        #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
        engine: EngineArg,
        #[arg(long)]
        zero_drift: bool,
    },
    /// Stationary fugacity profile.
    Fugacity {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        #[arg(long, default_value = "linear")]
        g: String,
    },
    /// Block generators: spectral gaps or canonical expectations.
    Blocks {
        /// Largest block half-width in the sweep.
        #[arg(long, default_value_t = 3)]
        l: usize,
        /// Largest particle number in the gap sweep.
        #[arg(long, default_value_t = 3)]
        j: usize,
        #[arg(long, value_enum, default_value_t = BlockMode::Gap)]
        mode: BlockMode,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        #[arg(long, default_value = "linear")]
        g: String,
    },
    /// Solve the limiting equation.
    Pde {
        #[arg(long, default_value_t = 512)]
        m: usize,
        #[arg(long, default_value_t = 0.05)]
        t_end: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        #[arg(long, default_value = "linear")]
        g: String,
        #[arg(long, value_enum, default_value_t = Flux::Upwind)]
        flux: Flux,
        #[arg(long, default_value = "cos:1:0.5")]
        init: String,
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        #[arg(long)]
        zero_drift: bool,
    },
    /// Sinai walk, Seignourel scaling and Brox diffusion samples.
    Brox {
        #[arg(long, value_enum, default_value_t = BroxMode::Compare)]
        mode: BroxMode,
        /// Scaling parameter N (steps for the unscaled Sinai walk).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "rademacher")]
        law: String,
        /// u = 1/2 + scale r for the unscaled Sinai walk.
        #[arg(long, default_value_t = 0.25)]
        scale: f64,
        #[arg(long, default_value_t = 0.01)]
        h_x: f64,
    },
    /// Hydrodynamic comparison from a config file.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Martingale diagnostics.
    MgDiag {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sin:1")]
        test_fn: String,
    },
    /// Replacement statistic over sizes and block widths.
    ReplaceDiag {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sin:1")]
        test_fn: String,
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        thetas: Vec<f64>,
    },
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn rate(spec: &str) -> AnyResult<RateFunction> {
    if Path::new(spec).is_file() {
        return Ok(RateFunction::parse_table(&fs::read_to_string(spec)?)?);
    }
    Ok(RateFunction::preset(spec)?)
}

fn csv_out(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> AnyResult<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn json_out(dir: &Path, name: &str, v: &Value) -> AnyResult<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(dir.join(name), &text)?;
    println!("{text}");
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> AnyResult<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn run(cli: Cli) -> AnyResult<bool> {
    let out = cli.out.as_path();
    fs::create_dir_all(out)?;
    match cli.cmd {
        Cmd::Env { seed, law, n, eps, n_ref } => {
            let law: DisorderLaw = law.parse()?;
            let env = QuenchedEnvironment::new(seed, law, n_ref)?;
            let d = env.drift(n, eps)?;
            let sq = (n as f64).sqrt();
            csv_out(
                out,
                "env.csv",
                &["k", "q_k", "sqrtN_q_k"],
                d.q.iter().enumerate().map(|(k, q)| vec![k.to_string(), q.to_string(), (sq * q).to_string()]),
            )?;
            json_out(
                out,
                "env.json",
                &json!({"seed": seed, "law": law.to_string(), "sigma": env.sigma, "n": n, "eps": eps,
                        "window": d.window, "sup_scaled": d.sup_scaled}),
            )?;
        }
        Cmd::Simulate {
            n,
            g,
            eps,
            law,
            seed_env,
            seed_dyn,
            t_end,
            snapshots,
            init,
            theta,
            m,
            engine,
            zero_drift,
        } => {
            let g = rate(&g)?;
            let init: InitProfile = init.parse()?;
            let law: DisorderLaw = law.parse()?;
            let drift = if zero_drift {
                DriftField::zero(n)
            } else {
                QuenchedEnvironment::new(seed_env, law, DEFAULT_N_REF.max(n))?.drift(n, eps)?
            };
            let engine = match engine {
                EngineArg::Auto => Engine::Auto,
                EngineArg::Tree => Engine::Tree,
                EngineArg::Walkers => Engine::Walkers,
            };
            let mut rng = zrp::rng::fast_stream(seed_dyn, 0);
            let (_, phi) = le_fugacities(|x| init.eval(x), n, &g)?;
            let c0 = sample_product(&phi, &g, &mut rng)?;
            let times = if snapshots.is_empty() { vec![t_end] } else { snapshots };
            let configs = simulate_with(engine, &c0, &drift, &g, t_end, &times, &mut rng)?;
            let mut occ = Vec::new();
            let mut smooth = Vec::new();
            for (i, (c, &t)) in configs.iter().zip(&times).enumerate() {
                for (k, e) in c.eta.iter().enumerate() {
                    occ.push(vec![i.to_string(), t.to_string(), k.to_string(), e.to_string()]);
                }
                let f = smooth_empirical(c, theta, m)?;
                for (j, v) in f.values.iter().enumerate() {
                    smooth.push(vec![i.to_string(), t.to_string(), f.x(j).to_string(), v.to_string()]);
                }
            }
            csv_out(out, "occupancy.csv", &["snapshot", "t", "k", "eta"], occ)?;
            csv_out(out, "smoothed.csv", &["snapshot", "t", "x", "rho"], smooth)?;
            json_out(
                out,
                "simulate.json",
                &json!({"n": n, "particles": c0.total, "t_end": t_end, "snapshots": times,
                        "seed_env": seed_env, "seed_dyn": seed_dyn, "theta": theta}),
            )?;
        }
        Cmd::Fugacity { n, eps, seed, law, g } => {
            let _ = rate(&g)?;
            let env = QuenchedEnvironment::new(seed, law.parse()?, DEFAULT_N_REF.max(n))?;
            let p = solve_fugacities(&env.drift(n, eps)?)?;
            csv_out(
                out,
                "fugacity.csv",
                &["k", "phi_k"],
                p.phi.iter().enumerate().map(|(k, f)| vec![k.to_string(), f.to_string()]),
            )?;
            json_out(
                out,
                "fugacity.json",
                &json!({"gamma": p.gamma, "max_min_ratio": p.max_min_ratio(),
                        "max_increment_times_N": p.max_increment_times_n(), "residual": p.residual}),
            )?;
        }
        Cmd::Blocks { l, j, mode, n, eps, seed, law, g } => {
            let g = rate(&g)?;
            match mode {
                BlockMode::Gap => {
                    let env = QuenchedEnvironment::new(seed, law.parse()?, DEFAULT_N_REF.max(n))?;
                    let drift = env.drift(n, eps)?;
                    let profile = solve_fugacities(&drift)?;
                    let flat = DriftField::zero(n);
                    let flat_profile = solve_fugacities(&flat)?;
                    let mut rows = Vec::new();
                    for li in 1..=l {
                        for ji in 1..=j {
                            let spec = BlockSpec::One { k: n / 2, l: li };
                            let gen = build_block_generator(spec, &drift, &profile, &g, ji)?;
                            let hom = build_block_generator(spec, &flat, &flat_profile, &g, ji)?;
                            let (gap, gap_h) = (spectral_gap(&gen)?, spectral_gap(&hom)?);
                            rows.push(vec![
                                li.to_string(),
                                ji.to_string(),
                                gen.dim().to_string(),
                                gap.to_string(),
                                gap_h.to_string(),
                                (gap / gap_h).to_string(),
                                gen.r().to_string(),
                                gen.phi_max_over_min.to_string(),
                            ]);
                        }
                    }
                    csv_out(
                        out,
                        "gaps.csv",
                        &["l", "j", "dim", "gap", "gap_homogeneous", "ratio", "r", "phi_max_over_min"],
                        rows,
                    )?;
                }
                BlockMode::Ensembles => {
                    let (phi1, _) = phi_of_rho(&g, 1.0)?;
                    let mut rows = Vec::new();
                    for li in 1..=l {
                        let sites = 2 * li + 1;
                        let block = CanonicalBlock { phi: vec![1.0; sites], j: sites, g: g.clone() };
                        let e = canonical_expectation(&block, li, Observable::G)?;
                        rows.push(vec![
                            li.to_string(),
                            sites.to_string(),
                            e.to_string(),
                            phi1.to_string(),
                            (e - phi1).abs().to_string(),
                        ]);
                    }
                    csv_out(out, "ensembles.csv", &["l", "j", "canonical_g", "Phi", "abs_diff"], rows)?;
                }
            }
        }
        Cmd::Pde { m, t_end, eps, seed, law, g, flux, init, snapshots, zero_drift } => {
            let g = rate(&g)?;
            let init: InitProfile = init.parse()?;
            let env = QuenchedEnvironment::new(seed, law.parse()?, DEFAULT_N_REF)?;
            let drift = |x: f64| if zero_drift { 0.0 } else { env.w_prime_eps(eps, x) };
            let rho0 = DensityField::from_fn(m, |x| init.eval(x));
            let cfg = PdeConfig {
                flux: match flux {
                    Flux::Upwind => FluxType::Upwind,
                    Flux::Central => FluxType::Central,
                },
                ..Default::default()
            };
            let tests =
                [TrigTest { n: 1, sine: true, t_final: t_end }, TrigTest { n: 1, sine: false, t_final: t_end }];
            let refs: Vec<&dyn TestFunction> = tests.iter().map(|t| t as &dyn TestFunction).collect();
            let faces: Vec<f64> = (0..m).map(|i| drift((i + 1) as f64 / m as f64)).collect();
            let mut acc = WeakAccumulator::new(&refs, faces, &g)?;
            let mut failure = None;
            let traj = solve_pde_observed(&rho0, &drift, &g, t_end, &snapshots, cfg, &mut |t, rho| {
                if failure.is_none() {
                    if let Err(e) = acc.push(t, rho) {
                        failure = Some(e);
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            let residuals = acc.finish()?;
            for (i, f) in traj.fields.iter().enumerate() {
                csv_out(
                    out,
                    &format!("pde_{i}.csv"),
                    &["x", "rho"],
                    f.values.iter().enumerate().map(|(j, v)| vec![f.x(j).to_string(), v.to_string()]),
                )?;
            }
            json_out(
                out,
                "pde.json",
                &json!({"m": m, "t_end": t_end, "times": traj.times, "steps": traj.steps, "dt_max": traj.dt_max,
                        "cfl": cfg.cfl, "mass_drift": traj.mass_drift, "clipped": traj.clipped,
                        "weak_residuals": residuals}),
            )?;
        }
        Cmd::Brox { mode, n, t, samples, seed, law, scale, h_x } => {
            let law: DisorderLaw = law.parse()?;
            let mut rng = zrp::rng::fast_stream(seed, 1);
            let mut rows = Vec::new();
            let mut report = json!({"mode": format!("{}", mode_name(mode)), "n": n, "t": t, "samples": samples, "seed": seed});
            let env = QuenchedEnvironment::new(seed, law, DEFAULT_N_REF)?;
            let seign = |rng: &mut zrp::rng::FastRng| -> AnyResult<Vec<f64>> {
                let pe = seignourel_environment(&env.disorder(n), n)?;
                Ok(pe.samples(t, samples, rng))
            };
            let brox = |rng: &mut zrp::rng::FastRng| -> AnyResult<Vec<f64>> {
                let mut be = BroxEnvironment::from_walk(env.walk(env.n_ref()), env.sigma);
                let cfg = BroxConfig { h_x, estimate_tolerance: false, ..Default::default() };
                (0..samples).map(|_| Ok(brox_sample(&mut be, t, rng, &cfg)?.x)).collect()
            };
            match mode {
                BroxMode::Sinai => {
                    let mut se = LazySinaiEnvironment::new(seed, law, scale)?;
                    for i in 0..samples {
                        rows.push(vec!["sinai".into(), i.to_string(), sinai_endpoint(&mut se, n, &mut rng).to_string()]);
                    }
                }
                BroxMode::Seignourel => {
                    for (i, x) in seign(&mut rng)?.iter().enumerate() {
                        rows.push(vec!["seignourel".into(), i.to_string(), x.to_string()]);
                    }
                }
                BroxMode::Brox => {
                    for (i, x) in brox(&mut rng)?.iter().enumerate() {
                        rows.push(vec!["brox".into(), i.to_string(), x.to_string()]);
                    }
                }
                BroxMode::Compare => {
                    let a = seign(&mut rng)?;
                    let b = brox(&mut rng)?;
                    report["ks"] = json!(stats::ks_two_sample(&a, &b));
                    for (i, x) in a.iter().enumerate() {
                        rows.push(vec!["seignourel".into(), i.to_string(), x.to_string()]);
                    }
                    for (i, x) in b.iter().enumerate() {
                        rows.push(vec!["brox".into(), i.to_string(), x.to_string()]);
                    }
                }
            }
            csv_out(out, "samples.csv", &["source", "i", "x"], rows)?;
            json_out(out, "brox.json", &report)?;
        }
        Cmd::Compare { config } => {
            let cfg = load_config(&config)?;
            let r = hdl_experiment(&cfg)?;
            csv_out(
                out,
                "compare.csv",
                &["n", "t", "dual", "dual_se", "l1", "mass_change", "error"],
                r.cells.iter().map(|c| {
                    vec![
                        c.n.to_string(),
                        c.t.to_string(),
                        opt(c.dual),
                        opt(c.dual_se),
                        opt(c.l1),
                        opt(c.mass_change),
                        c.error.clone().unwrap_or_default(),
                    ]
                }),
            )?;
            json_out(out, "compare.json", &serde_json::to_value(&r)?)?;
            return Ok(r.passed);
        }
        Cmd::MgDiag { config, test_fn } => {
            let cfg = load_config(&config)?;
            let tf: TestFn = test_fn.parse()?;
            let r = martingale_diag(&cfg, &tf)?;
            csv_out(
                out,
                "mg_diag.csv",
                &["n", "replicas", "mean", "std_err", "variance", "n_var", "d_max", "d_bound"],
                r.rows.iter().map(|w| {
                    vec![
                        w.n.to_string(),
                        w.replicas.to_string(),
                        w.mean.to_string(),
                        w.std_err.to_string(),
                        w.variance.to_string(),
                        w.n_var.to_string(),
                        w.d_max.to_string(),
                        w.d_bound.to_string(),
                    ]
                }),
            )?;
            json_out(out, "mg_diag.json", &serde_json::to_value(&r)?)?;
            return Ok(r.passed);
        }
        Cmd::ReplaceDiag { config, test_fn, thetas } => {
            let cfg = load_config(&config)?;
            let tf: TestFn = test_fn.parse()?;
            let r = replacement_diag(&cfg, &tf, &thetas)?;
            csv_out(
                out,
                "replace_diag.csv",
                &["n", "theta", "l", "statistic", "std_err", "signed_mean", "d_max", "d_bound"],
                r.rows.iter().map(|w| {
                    vec![
                        w.n.to_string(),
                        w.theta.to_string(),
                        w.l.to_string(),
                        w.statistic.to_string(),
                        w.std_err.to_string(),
                        w.signed_mean.to_string(),
                        w.d_max.to_string(),
                        w.d_bound.to_string(),
                    ]
                }),
            )?;
            json_out(out, "replace_diag.json", &serde_json::to_value(&r)?)?;
            return Ok(r.passed);
        }
    }
    Ok(true)
}

fn mode_name(m: BroxMode) -> &'static str {
    match m {
        BroxMode::Sinai => "sinai",
        BroxMode::Seignourel => "seignourel",
        BroxMode::Brox => "brox",
        BroxMode::Compare => "compare",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("report assertions failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
