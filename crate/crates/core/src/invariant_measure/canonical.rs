use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::zero_range::RateFunction;

/// Product measure with fugacities `phi` conditioned on `j` particles.
#[derive(Debug, Clone)]
pub struct CanonicalBlock {
    pub phi: Vec<f64>,
    pub j: usize,
    pub g: RateFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    G,
    Occupancy,
}

const MAX_SITES: usize = 64;
const MAX_PARTICLES: usize = 10_000;

/// Site weights w(m) = phi^m / g(m)!, m = 0..=j, divided by their maximum.
fn site_weights(phi: f64, g: &RateFunction, j: usize) -> Vec<f64> {
    let lp = phi.ln();
    let logs: Vec<f64> = (0..=j).map(|m| m as f64 * lp - g.log_gfact(m)).collect();
    let max = logs.iter().cloned().fold(f64::MIN, f64::max);
    logs.iter().map(|l| (l - max).exp()).collect()
}

/// Partition function of all sites but `skip`, for totals 0..=j, up to a
/// common factor. Each convolution is rescaled by its maximum.
fn partition_excluding(block: &CanonicalBlock, skip: usize) -> Vec<f64> {
    let j = block.j;
    let mut z = vec![0.0; j + 1];
    z[0] = 1.0;
    for (x, &phi) in block.phi.iter().enumerate() {
        if x == skip {
            continue;
        }
        let w = site_weights(phi, &block.g, j);
        let mut next = vec![0.0; j + 1];
        for (t, out) in next.iter_mut().enumerate() {
            *out = (0..=t).map(|m| w[m] * z[t - m]).sum();
        }
        let max = next.iter().cloned().fold(0.0, f64::max);
        z = next.into_iter().map(|v| v / max).collect();
    }
    z
}

/// E[f(eta(site))] under the canonical measure, by dynamic programming over
/// the single-site weight tables.
pub fn canonical_expectation(block: &CanonicalBlock, site: usize, observable: Observable) -> Result<f64> {
    let n = block.phi.len();
    if n == 0 || site >= n {
        return invalid(format!("site {site} outside block of {n} sites"));
    }
    if n > MAX_SITES || block.j > MAX_PARTICLES {
        return Err(Error::Budget { size: n.max(block.j), budget: MAX_SITES.min(MAX_PARTICLES) });
    }
    if block.phi.iter().any(|&p| !(p > 0.0)) {
        return invalid("fugacities must be positive");
    }
    let j = block.j;
    let zx = partition_excluding(block, site);
    let w = site_weights(block.phi[site], &block.g, j);
    let f = |m: usize| match observable {
        Observable::G => block.g.g(m),
        Observable::Occupancy => m as f64,
    };
    let (mut num, mut den) = (0.0, 0.0);
    for m in 0..=j {
        let p = w[m] * zx[j - m];
        num += f(m) * p;
        den += p;
    }
    Ok(num / den)
}
