use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dual_distance, replica_rng, ExperimentConfig, Measure};
use crate::environment::QuenchedEnvironment;
use crate::error::Result;
use crate::field::DensityField;
use crate::invariant_measure::{le_fugacities, ProductSampler};
use crate::pde::{solve_pde, PdeConfig, PdeTrajectory};
use crate::stats;
use crate::zero_range::{smooth_empirical, Dynamics, RateFunction, Sim};

const TAG: u64 = 0x4844_4C00;

/// One (N, t) entry of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlCell {
    pub n: usize,
    pub t: f64,
    /// Replica mean of d(pi^N_t, rho(t) dx).
    pub dual: Option<f64>,
    pub dual_se: Option<f64>,
    /// L1 distance between the replica-averaged smoothed empirical density
    /// and the PDE solution.
    pub l1: Option<f64>,
    /// max over replicas of |mass(pi^N_t) - mass(pi^N_0)|.
    pub mass_change: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HdlReport {
    pub config: ExperimentConfig,
    pub cells: Vec<HdlCell>,
    pub pde_mass_drift: f64,
    pub pde_steps: usize,
    /// Per observation time: dual distance at the largest N below the one at
    /// the smallest N.
    pub trend_ok: Vec<bool>,
    pub passed: bool,
}

struct ReplicaOut {
    dual: Vec<f64>,
    smooth: Vec<DensityField>,
    mass_change: f64,
}

fn replica(
    cfg: &ExperimentConfig,
    env_drift: &crate::environment::DriftField,
    g: &RateFunction,
    sampler: &ProductSampler,
    pde: &PdeTrajectory,
    n: usize,
    r: usize,
) -> Result<ReplicaOut> {
    let mut rng = replica_rng(cfg.dyn_seed, TAG, n, r);
    let c0 = sampler.sample(&mut rng);
    let mut sim = Sim::new(&c0, env_drift, g, cfg.engine()?)?;
    let mass0 = c0.total as f64 / n as f64;
    let mut out = ReplicaOut { dual: Vec::new(), smooth: Vec::new(), mass_change: 0.0 };
    for (i, &t) in cfg.t_obs.iter().enumerate() {
        sim.advance_to(t, &mut rng);
        let c = sim.configuration();
        let mass = c.eta.iter().map(|&e| e as u64).sum::<u64>() as f64 / n as f64;
        out.mass_change = out.mass_change.max((mass - mass0).abs());
        out.dual.push(dual_distance(&Measure::empirical(&c), &Measure::Density(pde.fields[i].clone())));
        out.smooth.push(smooth_empirical(&c, cfg.theta, cfg.pde_m)?);
    }
    Ok(out)
}

fn run_size(
    cfg: &ExperimentConfig,
    env: &QuenchedEnvironment,
    g: &RateFunction,
    pde: &PdeTrajectory,
    n: usize,
) -> Result<Vec<HdlCell>> {
    let init = cfg.init()?;
    let drift = cfg.drift(env, n)?;
    let (_, phi) = le_fugacities(|x| init.eval(x), n, g)?;
    let sampler = ProductSampler::new(&phi, g)?;
    // Ordered collection keeps the reduction order fixed.
    let outs: Vec<Result<ReplicaOut>> =
        (0..cfg.replicas).into_par_iter().map(|r| replica(cfg, &drift, g, &sampler, pde, n, r)).collect();
    let outs: Vec<ReplicaOut> = outs.into_iter().collect::<Result<_>>()?;
    let reps = outs.len() as f64;
    let mass_change = outs.iter().map(|o| o.mass_change).fold(0.0, f64::max);
    Ok(cfg
        .t_obs
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let d: Vec<f64> = outs.iter().map(|o| o.dual[i]).collect();
            let mut avg = vec![0.0; cfg.pde_m];
            for o in &outs {
                for (a, v) in avg.iter_mut().zip(&o.smooth[i].values) {
                    *a += v / reps;
                }
            }
            let se = if d.len() > 1 { (stats::variance(&d) / reps).sqrt() } else { f64::NAN };
            HdlCell {
                n,
                t,
                dual: Some(stats::mean(&d)),
                dual_se: Some(se),
                l1: Some(DensityField::new(avg).l1_distance(&pde.fields[i])),
                mass_change: Some(mass_change),
                error: None,
            }
        })
        .collect())
}

/// Simulates every N from local equilibrium, solves the PDE once on the same
/// environment, and tabulates the distances. A failing size is reported in
/// its cells and does not stop the others.
pub fn hdl_experiment(cfg: &ExperimentConfig) -> Result<HdlReport> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let g = cfg.rate()?;
    let init = cfg.init()?;
    let rho0 = DensityField::from_fn(cfg.pde_m, |x| init.eval(x));
    let t_end = cfg.t_obs.last().copied().unwrap_or(0.0);
    let pde = solve_pde(&rho0, &|x| cfg.w_prime(&env, x), &g, t_end, &cfg.t_obs, PdeConfig::default())?;

    let mut cells = Vec::new();
    for &n in &cfg.ns {
        match run_size(cfg, &env, &g, &pde, n) {
            Ok(c) => cells.extend(c),
            Err(e) => cells.extend(cfg.t_obs.iter().map(|&t| HdlCell {
                n,
                t,
                dual: None,
                dual_se: None,
                l1: None,
                mass_change: None,
                error: Some(e.to_string()),
            })),
        }
    }

    let (n_lo, n_hi) = (*cfg.ns.iter().min().unwrap(), *cfg.ns.iter().max().unwrap());
    let trend_ok: Vec<bool> = cfg
        .t_obs
        .iter()
        .map(|&t| {
            let at = |n: usize| cells.iter().find(|c| c.n == n && c.t == t).and_then(|c| c.dual);
            matches!((at(n_lo), at(n_hi)), (Some(a), Some(b)) if n_hi == n_lo || b < a)
        })
        .collect();
    let passed = trend_ok.iter().all(|&b| b) && cells.iter().all(|c| c.error.is_none());
    Ok(HdlReport { config: cfg.clone(), cells, pde_mass_drift: pde.mass_drift, pde_steps: pde.steps, trend_ok, passed })
}
