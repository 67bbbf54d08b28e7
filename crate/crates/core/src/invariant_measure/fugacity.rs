use serde::{Deserialize, Serialize};

use crate::environment::DriftField;
use crate::error::{Error, Result};
use crate::stats::KahanSum;

/// Solution of r_{k-1} phi_{k-1} + l_{k+1} phi_{k+1} = phi_k on the torus,
/// normalised to max phi = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FugacityProfile {
    pub n: usize,
    /// phi[k] for site k in 0..N (site 0 is site N).
    pub phi: Vec<f64>,
    /// Common flux r_k phi_k - l_{k+1} phi_{k+1}.
    pub gamma: f64,
    /// Largest stationarity residual over the sites.
    pub residual: f64,
}

impl FugacityProfile {
    pub fn max_min_ratio(&self) -> f64 {
        let max = self.phi.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.phi.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// N * max_k |phi_k - phi_{k+1}|.
    pub fn max_increment_times_n(&self) -> f64 {
        let n = self.n;
        (0..n).map(|k| (self.phi[k] - self.phi[(k + 1) % n]).abs()).fold(0.0, f64::max) * n as f64
    }
}

/// max_k |r_{k-1} phi_{k-1} + l_{k+1} phi_{k+1} - phi_k|.
pub fn stationarity_residual(env: &DriftField, phi: &[f64]) -> f64 {
    let n = env.n;
    (0..n)
        .map(|k| {
            let km = (k + n - 1) % n;
            let kp = (k + 1) % n;
            (env.right_prob(km) * phi[km] + env.left_prob(kp) * phi[kp] - phi[k]).abs()
        })
        .fold(0.0, f64::max)
}

pub fn solve_fugacities(env: &DriftField) -> Result<FugacityProfile> {
    solve_fugacities_anchored(env, 0)
}

/// Solves the recursion started at site `anchor` (anchor fixed to 1 before
/// normalisation). Every anchor yields the same normalised profile.
///
/// With A_k = R_{1,k-1}/L_{2,k} and T_k = S_k/L_{2,k} (one-based positions
/// counted from the anchor), both obey one-step recursions
///   A_{k+1} = A_k r_k / l_{k+1},   T_{k+1} = (r_k T_k + 1) / l_{k+1},
/// and phi_k = A_k - T_k (A_{N+1} - 1)/T_{N+1}. A is accumulated in logs.
pub fn solve_fugacities_anchored(env: &DriftField, anchor: usize) -> Result<FugacityProfile> {
    let n = env.n;
    if n < 3 {
        return Err(Error::Fugacity(format!("need N >= 3, got {n}")));
    }
    env.check_rates()?;
    let site = |p: usize| (anchor + p - 1) % n;
    let r = |p: usize| env.right_prob(site(p));
    let l = |p: usize| env.left_prob(site(p));

    let mut log_a = vec![0.0; n + 2];
    let mut t = vec![0.0; n + 2];
    let mut acc = KahanSum::default();
    for p in 1..=n {
        acc.add(r(p).ln() - l(p + 1).ln());
        log_a[p + 1] = acc.value();
        t[p + 1] = (r(p) * t[p] + 1.0) / l(p + 1);
    }
    let c = (log_a[n + 1].exp_m1()) / t[n + 1];
    let mut phi = vec![0.0; n];
    for p in 1..=n {
        phi[site(p)] = log_a[p].exp() - t[p] * c;
    }
    if let Some(k) = (0..n).find(|&k| !(phi[k] > 0.0)) {
        return Err(Error::Fugacity(format!("non-positive fugacity {} at site {k}", phi[k])));
    }
    let max = phi.iter().cloned().fold(f64::MIN, f64::max);
    for v in &mut phi {
        *v /= max;
    }
    let gamma = c / max;
    let residual = stationarity_residual(env, &phi);
    if !(residual <= 1e-10) {
        return Err(Error::Fugacity(format!("stationarity residual {residual:e} exceeds 1e-10")));
    }
    Ok(FugacityProfile { n, phi, gamma, residual })
}
