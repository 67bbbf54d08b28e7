use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::zero_range::RateFunction;

/// Dropped tail of the series relative to the partial sum.
const TAIL_TOL: f64 = 1e-16;

/// P_phi(n) = phi^n / (Z(phi) g(n)!), truncated where the tail is negligible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSiteLaw {
    pub phi: f64,
    pub z_value: f64,
    pub log_z: f64,
    pub trunc: usize,
    pub probs: Vec<f64>,
}

impl SingleSiteLaw {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().enumerate().map(|(n, p)| (n as f64 - m).powi(2) * p).sum()
    }
}

pub fn single_site_law(g: &RateFunction, phi: f64) -> Result<SingleSiteLaw> {
    if !(phi >= 0.0) || !phi.is_finite() {
        return invalid(format!("fugacity must be finite and nonnegative, got {phi}"));
    }
    if phi == 0.0 {
        return Ok(SingleSiteLaw { phi, z_value: 1.0, log_z: 0.0, trunc: 0, probs: vec![1.0] });
    }
    let lphi = phi.ln();
    // Log-terms n ln(phi) - ln g(n)!; stop once a geometric bound on the
    // remaining tail, using g(m) >= g_* m, is below TAIL_TOL of the sum.
    let mut logs = vec![0.0];
    let mut lf = 0.0;
    let mut max = 0.0f64;
    let mut partial = 1.0;
    let mut n = 0usize;
    loop {
        n += 1;
        lf += g.g(n).ln();
        let t = n as f64 * lphi - lf;
        logs.push(t);
        if t > max {
            partial = partial * (max - t).exp() + 1.0;
            max = t;
        } else {
            partial += (t - max).exp();
        }
        let ratio = phi / (g.g_star_lower * (n + 1) as f64);
        if ratio < 0.5 {
            let tail = (t - max).exp() * ratio / (1.0 - ratio);
            if tail < TAIL_TOL * partial {
                break;
            }
        }
    }
    let weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = weights.iter().sum();
    let log_z = max + s.ln();
    Ok(SingleSiteLaw {
        phi,
        z_value: log_z.exp(),
        log_z,
        trunc: n,
        probs: weights.iter().map(|w| w / s).collect(),
    })
}

/// Z(phi) and the truncation index used.
pub fn partition_z(g: &RateFunction, phi: f64) -> Result<(f64, usize)> {
    let law = single_site_law(g, phi)?;
    Ok((law.z_value, law.trunc))
}

/// Mean R(phi) and variance of P_phi.
pub fn moments(g: &RateFunction, phi: f64) -> Result<(f64, f64)> {
    let law = single_site_law(g, phi)?;
    Ok((law.mean(), law.variance()))
}

/// Phi(rho), the inverse of R, together with Phi'(rho) = Phi / sigma^2.
pub fn phi_of_rho(g: &RateFunction, rho: f64) -> Result<(f64, f64)> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return invalid(format!("density must be finite and nonnegative, got {rho}"));
    }
    if rho == 0.0 {
        return Ok((0.0, g.g(1)));
    }
    let tol = 1e-12 * (1.0 + rho);
    let mut lo = g.g_star_lower * rho * (1.0 - 1e-12);
    let mut hi = g.g_star_upper * rho * (1.0 + 1e-12);
    while moments(g, lo)?.0 > rho {
        lo *= 0.5;
    }
    while moments(g, hi)?.0 < rho {
        hi *= 2.0;
    }
    let mut phi = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, var) = moments(g, phi)?;
        if (r - rho).abs() <= tol {
            return Ok((phi, phi / var));
        }
        if r < rho {
            lo = phi;
        } else {
            hi = phi;
        }
        // Newton with R'(phi) = var / phi, falling back to bisection.
        let newton = phi - (r - rho) * phi / var;
        phi = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let (_, var) = moments(g, phi)?;
    Ok((phi, phi / var))
}

/// Cubic Hermite table of Phi and Phi' on a uniform density grid, grown on
/// demand.
#[derive(Debug, Clone)]
pub struct PhiTable {
    g: RateFunction,
    h: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

impl PhiTable {
    pub fn new(g: &RateFunction, rho_max: f64, h: f64) -> Result<Self> {
        let mut t = Self { g: g.clone(), h, phi: Vec::new(), dphi: Vec::new() };
        t.extend_to(rho_max)?;
        Ok(t)
    }

    pub fn rho_max(&self) -> f64 {
        (self.phi.len() - 1) as f64 * self.h
    }

    fn extend_to(&mut self, rho: f64) -> Result<()> {
        let need = (rho / self.h).ceil() as usize + 2;
        while self.phi.len() < need {
            let (p, d) = phi_of_rho(&self.g, self.phi.len() as f64 * self.h)?;
            self.phi.push(p);
            self.dphi.push(d);
        }
        Ok(())
    }

    /// Phi and Phi' at rho, or `None` above the tabulated range.
    #[inline]
    pub fn eval(&self, rho: f64) -> Option<(f64, f64)> {
        let s = rho / self.h;
        let i = s.floor() as usize;
        if i + 1 >= self.phi.len() {
            return None;
        }
        let t = s - i as f64;
        let (p0, p1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.dphi[i] * self.h, self.dphi[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let d = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.h;
        Some((v, d))
    }

    #[inline]
    pub fn phi(&mut self, rho: f64) -> Result<f64> {
        Ok(self.get(rho)?.0)
    }

    pub fn get(&mut self, rho: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.eval(rho) {
            return Ok(v);
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return invalid(format!("density must be finite and nonnegative, got {rho}"));
        }
        self.extend_to((2.0 * rho).max(self.rho_max()))?;
        Ok(self.eval(rho).expect("extended"))
    }
}
