use super::Configuration;
use crate::error::{invalid, Result};
use crate::field::DensityField;

/// eta^l(k) = (2l+1)^{-1} sum_{|y-k|<=l} eta(y), periodic.
pub fn block_average(c: &Configuration, k: usize, l: usize) -> Result<f64> {
    let n = c.n();
    if 2 * l + 1 > n {
        return invalid(format!("block 2l+1 = {} exceeds N = {n}", 2 * l + 1));
    }
    let s: u64 = (0..=2 * l).map(|i| c.eta[(k + n - l + i) % n] as u64).sum();
    Ok(s as f64 / (2 * l + 1) as f64)
}

/// Block averages at every site, O(N) by a sliding window.
pub fn block_averages(eta: &[u32], l: usize) -> Vec<f64> {
    let n = eta.len();
    assert!(2 * l < n, "block exceeds torus");
    let w = (2 * l + 1) as f64;
    let mut s: u64 = (0..=2 * l).map(|i| eta[(n - l + i) % n] as u64).sum();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(s as f64 / w);
        s += eta[(k + l + 1) % n] as u64;
        s -= eta[(k + n - l) % n] as u64;
    }
    out
}

/// Periodic distance on the unit torus.
fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Empirical measure smoothed by the box kernel (2 theta)^{-1} 1[|.| <= theta]
/// and read at the cell centres x_i = (i + 1/2)/M.
pub fn smooth_empirical(c: &Configuration, theta: f64, m: usize) -> Result<DensityField> {
    let n = c.n();
    let nf = n as f64;
    if !(theta * nf >= 1.0) || theta >= 0.5 {
        return invalid(format!("need theta*N >= 1 and theta < 1/2, got theta = {theta}, N = {n}"));
    }
    if m == 0 {
        return invalid("grid size must be positive");
    }
    // Periodic prefix sums over two laps so any window is one difference.
    let mut prefix = Vec::with_capacity(2 * n + 1);
    prefix.push(0u64);
    for i in 0..2 * n {
        prefix.push(prefix[i] + c.eta[i % n] as u64);
    }
    let inside = |k: i64, x: f64| torus_dist(k as f64 / nf, x) <= theta;
    let scale = 1.0 / (nf * 2.0 * theta);
    let values = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / m as f64;
            let mut lo = ((x - theta) * nf).ceil() as i64;
            let mut hi = ((x + theta) * nf).floor() as i64;
            // Settle the two ends with the exact predicate.
            while !inside(lo, x) {
                lo += 1;
            }
            while inside(lo - 1, x) {
                lo -= 1;
            }
            while !inside(hi, x) {
                hi -= 1;
            }
            while inside(hi + 1, x) {
                hi += 1;
            }
            let a = lo.rem_euclid(n as i64) as usize;
            let len = (hi - lo + 1) as usize;
            (prefix[a + len] - prefix[a]) as f64 * scale
        })
        .collect();
    Ok(DensityField::new(values))
}
