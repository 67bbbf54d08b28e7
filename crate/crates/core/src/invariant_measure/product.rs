use rand::Rng;

use super::single_site::{phi_of_rho, single_site_law};
use crate::error::{invalid, Result};
use crate::zero_range::{Configuration, RateFunction};

/// Inverse-CDF sampler for a product measure with given site fugacities.
#[derive(Debug, Clone)]
pub struct ProductSampler {
    cdfs: Vec<Vec<f64>>,
}

impl ProductSampler {
    pub fn new(fugacities: &[f64], g: &RateFunction) -> Result<Self> {
        if fugacities.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return invalid("fugacities must be positive and finite");
        }
        // Sites often share a fugacity; reuse the table of the previous site.
        let mut cdfs: Vec<Vec<f64>> = Vec::with_capacity(fugacities.len());
        let mut last: Option<(f64, usize)> = None;
        for (k, &f) in fugacities.iter().enumerate() {
            if let Some((lf, idx)) = last {
                if lf == f {
                    let c = cdfs[idx].clone();
                    cdfs.push(c);
                    continue;
                }
            }
            let law = single_site_law(g, f)?;
            let mut acc = 0.0;
            cdfs.push(law.probs.iter().map(|p| {
                acc += p;
                acc
            }).collect());
            last = Some((f, k));
        }
        Ok(Self { cdfs })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Configuration {
        let eta: Vec<u32> = self
            .cdfs
            .iter()
            .map(|cdf| {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32
            })
            .collect();
        let total = eta.iter().map(|&e| e as u64).sum();
        Configuration { eta, total }
    }
}

/// Independent site draws, site k from P_{phi_k}.
pub fn sample_product<R: Rng>(fugacities: &[f64], g: &RateFunction, rng: &mut R) -> Result<Configuration> {
    Ok(ProductSampler::new(fugacities, g)?.sample(rng))
}

/// Local-equilibrium cell densities rho_{k,N} = N int_{(k-1)/N}^{k/N} rho0 and
/// fugacities Phi(rho_{k,N}), for sites k in 0..N (site 0 is site N).
pub fn le_fugacities(rho0: impl Fn(f64) -> f64, n: usize, g: &RateFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    // Composite Simpson on 8 panels per cell.
    const PANELS: usize = 8;
    let h = 1.0 / (n * PANELS) as f64;
    let mut rho = Vec::with_capacity(n);
    for k in 0..n {
        let site = if k == 0 { n } else { k };
        let a = (site - 1) as f64 / n as f64;
        let mut s = rho0(a) + rho0(a + PANELS as f64 * h);
        for i in 1..PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * rho0(a + i as f64 * h);
        }
        let v = s * h / 3.0 * n as f64;
        if !(v >= 0.0) {
            return invalid(format!("initial profile negative near x = {a}"));
        }
        rho.push(v);
    }
    let mut phi = Vec::with_capacity(n);
    let mut cache: Option<(f64, f64)> = None;
    for &r in &rho {
        let p = match cache {
            Some((cr, cp)) if cr == r => cp,
            _ => phi_of_rho(g, r)?.0,
        };
        cache = Some((r, p));
        phi.push(p);
    }
    Ok((rho, phi))
}

/// H(mu_le | R_N) = sum_k rho_k ln(phi~_k/phi_k) + sum_k ln(Z(phi_k)/Z(phi~_k)).
pub fn relative_entropy_le(g: &RateFunction, le: &[f64], profile: &[f64], rho: &[f64]) -> Result<f64> {
    if le.len() != profile.len() || le.len() != rho.len() {
        return invalid("length mismatch");
    }
    let mut h = 0.0;
    for k in 0..le.len() {
        let (a, b) = (le[k], profile[k]);
        if !(a > 0.0 && b > 0.0) {
            return invalid("fugacities must be positive");
        }
        let za = single_site_law(g, a)?.log_z;
        let zb = single_site_law(g, b)?.log_z;
        h += rho[k] * (a / b).ln() + zb - za;
    }
    Ok(h)
}
