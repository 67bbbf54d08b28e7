use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::martingale::{generator_coefficients, GeneratorIntegral};
use super::{replica_rng, ExperimentConfig, TestFn};
use crate::error::{invalid, Result};
use crate::invariant_measure::{le_fugacities, PhiTable, ProductSampler};
use crate::stats;
use crate::zero_range::{block_averages, Dynamics, RateFunction, Sim};

const TAG: u64 = 0x5245_5000;

/// Block half-width l = floor(theta N) standing in for eta^{theta N}.
pub fn block_half_width(theta: f64, n: usize) -> usize {
    (theta * n as f64).floor() as usize
}

/// One trajectory: for each theta, N^{-1} sum_k int_0^T D_k (g(eta_t(k)) -
/// Phi(eta_t^l(k))) dt. The g part is integrated exactly between jumps; the
/// block part by the trapezoid rule on `grid` equal steps.
#[allow(clippy::too_many_arguments)]
pub fn replacement_replica<R: Rng>(
    sim: &mut Sim,
    d: &[f64],
    g: &RateFunction,
    table: &mut PhiTable,
    thetas: &[f64],
    t_end: f64,
    grid: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = d.len();
    let ls: Vec<usize> = thetas.iter().map(|&th| block_half_width(th, n)).collect();
    let block_term = |eta: &[u32], table: &mut PhiTable| -> Result<Vec<f64>> {
        ls.iter()
            .map(|&l| {
                let avg = block_averages(eta, l);
                let mut s = 0.0;
                for (a, dk) in avg.iter().zip(d) {
                    s += dk * table.phi(*a)?;
                }
                Ok(s / n as f64)
            })
            .collect()
    };
    let mut obs = GeneratorIntegral::new(d, g, sim.eta());
    let mut prev = block_term(sim.eta(), table)?;
    let mut block_int = vec![0.0; ls.len()];
    let h = t_end / grid as f64;
    for i in 1..=grid {
        let t = if i == grid { t_end } else { i as f64 * h };
        sim.run_until(t, rng, &mut obs);
        let cur = block_term(sim.eta(), table)?;
        for j in 0..ls.len() {
            block_int[j] += 0.5 * h * (prev[j] + cur[j]);
        }
        prev = cur;
    }
    Ok(block_int.iter().map(|b| obs.integral - b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementRow {
    pub n: usize,
    pub theta: f64,
    pub l: usize,
    /// Replica mean of the absolute value.
    pub statistic: f64,
    pub std_err: f64,
    /// Replica mean of the signed value.
    pub signed_mean: f64,
    pub d_max: f64,
    pub d_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplacementReport {
    pub config: ExperimentConfig,
    pub test_fn: String,
    pub thetas: Vec<f64>,
    pub t: f64,
    pub rows: Vec<ReplacementRow>,
    /// Per theta: statistic strictly decreasing along the sorted sizes.
    pub decreasing_in_n: Vec<bool>,
    /// At the largest N: statistic nonincreasing as theta shrinks.
    pub decreasing_in_theta: bool,
    pub bound_ok: bool,
    pub passed: bool,
}

/// Monte Carlo estimate of E|N^{-1} sum_k int_0^T D_k (g(eta(k)) - Phi(eta^l(k)))|
/// over the sizes in `cfg.ns` and the widths in `thetas`.
pub fn replacement_diag(cfg: &ExperimentConfig, g_test: &TestFn, thetas: &[f64]) -> Result<ReplacementReport> {
    cfg.validate()?;
    if thetas.is_empty() {
        return invalid("empty theta schedule");
    }
    let min_n = *cfg.ns.iter().min().unwrap();
    for &th in thetas {
        if !(th > 0.0 && th < 0.5) || block_half_width(th, min_n) < 1 || 2 * block_half_width(th, min_n) + 1 > min_n {
            return invalid(format!("theta {th} gives an empty or oversized block at N = {min_n}"));
        }
    }
    if cfg.time_grid == 0 {
        return invalid("time_grid must be positive");
    }
    let env = cfg.environment()?;
    let g = cfg.rate()?;
    let init = cfg.init()?;
    let engine = cfg.engine()?;
    let t_end = *cfg.t_obs.last().ok_or_else(|| crate::Error::Config("t_obs is empty".into()))?;
    let (d1, d2) = g_test.derivative_bounds();
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &n in &ns {
        let drift = cfg.drift(&env, n)?;
        let d = generator_coefficients(g_test, &drift);
        let (_, phi) = le_fugacities(|x| init.eval(x), n, &g)?;
        let sampler = ProductSampler::new(&phi, &g)?;
        let base = PhiTable::new(&g, 2.0 * init.max() + 4.0, 1.0 / 1024.0)?;
        let ys: Vec<Result<Vec<f64>>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.dyn_seed, TAG, n, r);
                let c0 = sampler.sample(&mut rng);
                let mut sim = Sim::new(&c0, &drift, &g, engine)?;
                let mut table = base.clone();
                replacement_replica(&mut sim, &d, &g, &mut table, thetas, t_end, cfg.time_grid, &mut rng)
            })
            .collect();
        let ys: Vec<Vec<f64>> = ys.into_iter().collect::<Result<_>>()?;
        let d_max = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (j, &th) in thetas.iter().enumerate() {
            let abs: Vec<f64> = ys.iter().map(|y| y[j].abs()).collect();
            let signed: Vec<f64> = ys.iter().map(|y| y[j]).collect();
            let se = if abs.len() > 1 { (stats::variance(&abs) / abs.len() as f64).sqrt() } else { f64::NAN };
            rows.push(ReplacementRow {
                n,
                theta: th,
                l: block_half_width(th, n),
                statistic: stats::mean(&abs),
                std_err: se,
                signed_mean: stats::mean(&signed),
                d_max,
                d_bound: d2 + 2.0 * drift.sup_scaled * d1,
            });
        }
    }
    let stat = |n: usize, th: f64| rows.iter().find(|r| r.n == n && r.theta == th).map(|r| r.statistic).unwrap();
    let decreasing_in_n: Vec<bool> =
        thetas.iter().map(|&th| ns.windows(2).all(|w| stat(w[1], th) < stat(w[0], th))).collect();
    let n_hi = *ns.last().unwrap();
    let mut by_theta: Vec<f64> = thetas.to_vec();
    by_theta.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let decreasing_in_theta = by_theta.windows(2).all(|w| stat(n_hi, w[1]) <= stat(n_hi, w[0]));
    let bound_ok = rows.iter().all(|r| r.d_max <= r.d_bound * (1.0 + 1e-12));
    let passed = decreasing_in_n.iter().all(|&b| b) && bound_ok;
    Ok(ReplacementReport {
        config: cfg.clone(),
        test_fn: g_test.to_string(),
        thetas: thetas.to_vec(),
        t: t_end,
        rows,
        decreasing_in_n,
        decreasing_in_theta,
        bound_ok,
        passed,
    })
}
