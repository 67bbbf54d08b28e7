use nalgebra::{DMatrix, DVector};

use crate::environment::DriftField;
use crate::error::{Error, Result};
use crate::zero_range::RateFunction;

/// All occupation vectors of `n` sites holding `total` particles, in
/// lexicographic order.
pub fn compositions(n: usize, total: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: usize, sites: usize, out: &mut Vec<Vec<u32>>) {
        if sites == 1 {
            prefix.push(left as u32);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v as u32);
            rec(prefix, left - v, sites - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::with_capacity(n), total, n, &mut out);
    }
    out
}

/// Dense generator of the whole torus dynamics at fixed particle number
/// (microscopic time).
#[derive(Debug, Clone)]
pub struct FullGenerator {
    pub states: Vec<Vec<u32>>,
    pub q: DMatrix<f64>,
}

const FULL_BUDGET: usize = 5000;

pub fn full_generator(env: &DriftField, g: &RateFunction, total: usize) -> Result<FullGenerator> {
    let n = env.n;
    let states = compositions(n, total);
    if states.len() > FULL_BUDGET {
        return Err(Error::Budget { size: states.len(), budget: FULL_BUDGET });
    }
    let index: std::collections::HashMap<Vec<u32>, usize> =
        states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let mut q = DMatrix::zeros(states.len(), states.len());
    for (i, s) in states.iter().enumerate() {
        for k in 0..n {
            if s[k] == 0 {
                continue;
            }
            let rate = g.g(s[k] as usize);
            for (dest, p) in [((k + 1) % n, env.right_prob(k)), ((k + n - 1) % n, env.left_prob(k))] {
                let mut t = s.clone();
                t[k] -= 1;
                t[dest] += 1;
                let jdx = index[&t];
                q[(i, jdx)] += rate * p;
                q[(i, i)] -= rate * p;
            }
        }
    }
    Ok(FullGenerator { states, q })
}

/// Solves pi Q = 0 with sum(pi) = 1 (one balance equation replaced by the
/// normalisation).
pub fn stationary_vector(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = q.nrows();
    let mut a = q.transpose();
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidParameter("singular generator".into()))?;
    Ok(x.iter().copied().collect())
}

/// Product weights prod_k phi_k^{eta_k} / g(eta_k)! normalised over `states`.
pub fn canonical_from_profile(states: &[Vec<u32>], phi: &[f64], g: &RateFunction) -> Vec<f64> {
    let logs: Vec<f64> = states
        .iter()
        .map(|s| {
            s.iter()
                .zip(phi)
                .map(|(&e, &p)| e as f64 * p.ln() - g.log_gfact(e as usize))
                .sum::<f64>()
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::MIN, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}
