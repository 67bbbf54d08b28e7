use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replica_rng, ExperimentConfig, TestFn};
use crate::environment::DriftField;
use crate::error::{invalid, Result};
use crate::invariant_measure::{le_fugacities, ProductSampler};
use crate::stats;
use crate::zero_range::{Dynamics, Observer, RateFunction, Sim};

const TAG: u64 = 0x4D47_0000;
const RESYNC: u64 = 1 << 20;

/// D_k = 1/2 Delta_N G(k/N) + 2 nabla_N G(k/N) sqrt(N) q_k, the coefficient of
/// g(eta(k)) in N^2 L <G, pi^N>.
pub(crate) fn generator_coefficients(g_test: &TestFn, drift: &DriftField) -> Vec<f64> {
    let n = drift.n;
    let nf = n as f64;
    let gv: Vec<f64> = (0..n).map(|k| g_test.value(k as f64 / nf)).collect();
    (0..n)
        .map(|k| {
            let (gp, gm) = (gv[(k + 1) % n], gv[(k + n - 1) % n]);
            let lap = nf * nf * (gp + gm - 2.0 * gv[k]);
            let grad = 0.5 * nf * (gp - gm);
            0.5 * lap + 2.0 * grad * nf.sqrt() * drift.q[k]
        })
        .collect()
}

/// Tracks S = sum_k D_k g(eta(k)) through the jumps and integrates S/N in time,
/// which is exact because S is constant between jumps.
pub(crate) struct GeneratorIntegral<'a> {
    d: &'a [f64],
    g: &'a RateFunction,
    /// g(k+1) - g(k) for k up to the total particle number.
    dg: Vec<f64>,
    inv_n: f64,
    s: f64,
    pub integral: f64,
    jumps: u64,
}

impl<'a> GeneratorIntegral<'a> {
    pub(crate) fn new(d: &'a [f64], g: &'a RateFunction, eta: &[u32]) -> Self {
        let total: usize = eta.iter().map(|&e| e as usize).sum();
        let dg = (0..=total).map(|k| g.g(k + 1) - g.g(k)).collect();
        let inv_n = 1.0 / d.len() as f64;
        let mut me = Self { d, g, dg, inv_n, s: 0.0, integral: 0.0, jumps: 0 };
        me.resync(eta);
        me
    }

    fn resync(&mut self, eta: &[u32]) {
        self.s = eta.iter().zip(self.d).map(|(&e, &d)| d * self.g.g(e as usize)).sum();
    }
}

impl Observer for GeneratorIntegral<'_> {
    #[inline]
    fn elapse(&mut self, dt: f64, _eta: &[u32]) {
        self.integral += dt * self.s * self.inv_n;
    }

    #[inline]
    fn jumped(&mut self, from: usize, to: usize, eta: &[u32]) {
        let (ef, et) = (eta[from] as usize, eta[to] as usize);
        self.s += self.dg[et - 1] * self.d[to] - self.dg[ef] * self.d[from];
        self.jumps += 1;
        if self.jumps % RESYNC == 0 {
            self.resync(eta);
        }
    }
}

fn pairing(eta: &[u32], gv: &[f64]) -> f64 {
    eta.iter().zip(gv).map(|(&e, &v)| e as f64 * v).sum::<f64>() / eta.len() as f64
}

/// One trajectory: returns M^{N,G}_T.
pub fn martingale_replica<R: Rng>(
    sim: &mut Sim,
    d: &[f64],
    g: &RateFunction,
    g_test: &TestFn,
    t_end: f64,
    rng: &mut R,
) -> f64 {
    let n = sim.eta().len();
    let gv: Vec<f64> = (0..n).map(|k| g_test.value(k as f64 / n as f64)).collect();
    let start = pairing(sim.eta(), &gv);
    let mut obs = GeneratorIntegral::new(d, g, sim.eta());
    sim.run_until(t_end, rng, &mut obs);
    pairing(sim.eta(), &gv) - start - obs.integral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_err: f64,
    pub variance: f64,
    /// N Var(M_T)
    pub n_var: f64,
    pub d_max: f64,
    /// sup|G''| + 2 C sup|G'| with C = max_k sqrt(N) |q_k|.
    pub d_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub config: ExperimentConfig,
    pub test_fn: String,
    pub t: f64,
    pub rows: Vec<MartingaleRow>,
    /// max/min of N Var over the sizes.
    pub spread: f64,
    pub mean_ok: bool,
    pub bound_ok: bool,
    pub passed: bool,
}

/// Estimates mean and variance of M^{N,G}_T at T = last t_obs, per N.
pub fn martingale_diag(cfg: &ExperimentConfig, g_test: &TestFn) -> Result<MartingaleReport> {
    cfg.validate()?;
    if cfg.replicas < 30 {
        return invalid(format!("martingale diagnostics need at least 30 replicas, got {}", cfg.replicas));
    }
    let env = cfg.environment()?;
    let g = cfg.rate()?;
    let init = cfg.init()?;
    let engine = cfg.engine()?;
    let t_end = *cfg.t_obs.last().ok_or_else(|| crate::Error::Config("t_obs is empty".into()))?;
    let (d1, d2) = g_test.derivative_bounds();
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let drift = cfg.drift(&env, n)?;
        let d = generator_coefficients(g_test, &drift);
        let (_, phi) = le_fugacities(|x| init.eval(x), n, &g)?;
        let sampler = ProductSampler::new(&phi, &g)?;
        let ms: Vec<Result<f64>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(cfg.dyn_seed, TAG, n, r);
                let c0 = sampler.sample(&mut rng);
                let mut sim = Sim::new(&c0, &drift, &g, engine)?;
                Ok(martingale_replica(&mut sim, &d, &g, g_test, t_end, &mut rng))
            })
            .collect();
        let ms: Vec<f64> = ms.into_iter().collect::<Result<_>>()?;
        let var = stats::variance(&ms);
        rows.push(MartingaleRow {
            n,
            replicas: ms.len(),
            mean: stats::mean(&ms),
            std_err: (var / ms.len() as f64).sqrt(),
            variance: var,
            n_var: n as f64 * var,
            d_max: d.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            d_bound: d2 + 2.0 * drift.sup_scaled * d1,
        });
    }
    let nv: Vec<f64> = rows.iter().map(|r| r.n_var).collect();
    let (lo, hi) = nv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = if lo > 0.0 { hi / lo } else if hi == 0.0 { 1.0 } else { f64::INFINITY };
    let mean_ok = rows.iter().all(|r| r.mean.abs() <= 3.0 * r.std_err || r.std_err == 0.0 && r.mean == 0.0);
    let bound_ok = rows.iter().all(|r| r.d_max <= r.d_bound * (1.0 + 1e-12));
    Ok(MartingaleReport {
        config: cfg.clone(),
        test_fn: g_test.to_string(),
        t: t_end,
        rows,
        spread,
        mean_ok,
        bound_ok,
        passed: spread <= 3.0 && mean_ok && bound_ok,
    })
}
