use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::fugacity::FugacityProfile;
use super::full::{canonical_from_profile, compositions};
use crate::environment::DriftField;
use crate::error::{invalid, Error, Result};
use crate::zero_range::RateFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockSpec {
    /// Sites k-l..=k+l joined as a path.
    One { k: usize, l: usize },
    /// Two such blocks plus a bridge bond between k+l and k2-l.
    Two { k: usize, k2: usize, l: usize },
}

/// Localized generator on configurations of a block with exactly j
/// particles, with rates (1/2) g(eta(x)) p_{x,+/-}.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    pub sites: Vec<usize>,
    pub states: Vec<Vec<u32>>,
    /// Canonical law of the restricted product measure.
    pub kappa: Vec<f64>,
    /// Off-diagonal rates (from, to, rate).
    pub transitions: Vec<(usize, usize, f64)>,
    /// Total exit rate per state.
    pub exit: Vec<f64>,
    /// min over the bonds' forward probabilities p_{x,+}; r = 1/min.
    pub min_p_plus: f64,
    pub phi_max_over_min: f64,
}

const BLOCK_BUDGET: usize = 200_000;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn torus_gap(a: usize, b: usize, n: usize) -> usize {
    let d = (a + n - b) % n;
    d.min(n - d)
}

pub fn build_block_generator(
    spec: BlockSpec,
    env: &DriftField,
    profile: &FugacityProfile,
    g: &RateFunction,
    j: usize,
) -> Result<BlockGenerator> {
    let n = env.n;
    if profile.n != n {
        return invalid("profile and drift field sizes differ");
    }
    let path = |k: usize, l: usize| -> Vec<usize> { (0..=2 * l).map(|i| (k + n - l + i) % n).collect() };
    let (sites, bonds): (Vec<usize>, Vec<(usize, usize)>) = match spec {
        BlockSpec::One { k, l } => {
            if 2 * l + 1 > n || l == 0 {
                return invalid(format!("block l = {l} does not fit N = {n}"));
            }
            let sites = path(k % n, l);
            let bonds = (0..2 * l).map(|i| (i, i + 1)).collect();
            (sites, bonds)
        }
        BlockSpec::Two { k, k2, l } => {
            if l == 0 || torus_gap(k % n, k2 % n, n) <= 2 * l || 4 * l + 2 > n {
                return invalid("two-block spec needs |k - k2| > 2l and room on the torus");
            }
            let mut sites = path(k % n, l);
            sites.extend(path(k2 % n, l));
            let m = 2 * l + 1;
            let mut bonds: Vec<(usize, usize)> = (0..2 * l).map(|i| (i, i + 1)).collect();
            bonds.extend((0..2 * l).map(|i| (m + i, m + i + 1)));
            bonds.push((2 * l, m));
            (sites, bonds)
        }
    };
    let size = binomial(j + sites.len() - 1, sites.len() - 1);
    if size > BLOCK_BUDGET as f64 {
        return Err(Error::Budget { size: size as usize, budget: BLOCK_BUDGET });
    }
    let phi: Vec<f64> = sites.iter().map(|&x| profile.phi[x]).collect();
    let states = compositions(sites.len(), j);
    let kappa = canonical_from_profile(&states, &phi, g);
    let index: HashMap<&[u32], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();

    // p_{a->b} = r_a + (phi_b/phi_a) l_b and its mirror, per bond.
    let probs: Vec<(f64, f64)> = bonds
        .iter()
        .map(|&(a, b)| {
            let (xa, xb) = (sites[a], sites[b]);
            let (ra, lb) = (env.right_prob(xa), env.left_prob(xb));
            (ra + phi[b] / phi[a] * lb, lb + phi[a] / phi[b] * ra)
        })
        .collect();
    let min_p_plus = probs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);

    let mut transitions = Vec::new();
    let mut exit = vec![0.0; states.len()];
    let mut buf = vec![0u32; sites.len()];
    for (i, s) in states.iter().enumerate() {
        for (&(a, b), &(pab, pba)) in bonds.iter().zip(&probs) {
            for (from, to, p) in [(a, b, pab), (b, a, pba)] {
                if s[from] == 0 {
                    continue;
                }
                let rate = 0.5 * g.g(s[from] as usize) * p;
                buf.copy_from_slice(s);
                buf[from] -= 1;
                buf[to] += 1;
                transitions.push((i, index[buf.as_slice()], rate));
                exit[i] += rate;
            }
        }
    }
    let pmax = phi.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = phi.iter().cloned().fold(f64::MAX, f64::min);
    Ok(BlockGenerator { sites, states, kappa, transitions, exit, min_p_plus, phi_max_over_min: pmax / pmin })
}

impl BlockGenerator {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut q = DMatrix::zeros(m, m);
        for &(i, j, r) in &self.transitions {
            q[(i, j)] += r;
        }
        for i in 0..m {
            q[(i, i)] -= self.exit[i];
        }
        q
    }

    /// max |kappa(a) Q(a,b) - kappa(b) Q(b,a)|.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut rates: HashMap<(usize, usize), f64> = HashMap::new();
        for &(i, j, r) in &self.transitions {
            *rates.entry((i, j)).or_insert(0.0) += r;
        }
        rates
            .iter()
            .map(|(&(i, j), &r)| {
                let back = rates.get(&(j, i)).copied().unwrap_or(0.0);
                (self.kappa[i] * r - self.kappa[j] * back).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_irreducible(&self) -> bool {
        let m = self.dim();
        let mut adj = vec![Vec::new(); m];
        for &(i, j, _) in &self.transitions {
            adj[i].push(j);
        }
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// r = 1 / min p_{x,+}.
    pub fn r(&self) -> f64 {
        1.0 / self.min_p_plus
    }

    /// Entries of -D^{1/2} Q D^{-1/2}, symmetric under detailed balance.
    fn symmetric_entries(&self) -> Vec<(usize, usize, f64)> {
        let sq: Vec<f64> = self.kappa.iter().map(|k| k.sqrt()).collect();
        let mut out: Vec<(usize, usize, f64)> =
            self.transitions.iter().map(|&(i, j, r)| (i, j, -r * sq[i] / sq[j])).collect();
        out.extend(self.exit.iter().enumerate().map(|(i, &e)| (i, i, e)));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapMethod {
    /// Dense below dimension 2000, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub fn spectral_gap(gen: &BlockGenerator) -> Result<f64> {
    spectral_gap_with(gen, GapMethod::Auto)
}

/// Smallest nonzero eigenvalue of -S in the kappa inner product.
pub fn spectral_gap_with(gen: &BlockGenerator, method: GapMethod) -> Result<f64> {
    let m = gen.dim();
    if m < 2 {
        return invalid("a single state has no gap");
    }
    let dense = match method {
        GapMethod::Auto => m <= 2000,
        GapMethod::Dense => true,
        GapMethod::Lanczos => false,
    };
    let entries = gen.symmetric_entries();
    if dense {
        let mut a = DMatrix::zeros(m, m);
        for &(i, j, v) in &entries {
            a[(i, j)] += v;
        }
        let a = (&a + a.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| x.total_cmp(y));
        return Ok(ev[1]);
    }
    let ground: Vec<f64> = gen.kappa.iter().map(|k| k.sqrt()).collect();
    lanczos_smallest(m, &entries, &ground, 1e-8)
}

/// Lanczos with full reorthogonalisation on the complement of `ground`.
fn lanczos_smallest(m: usize, entries: &[(usize, usize, f64)], ground: &[f64], tol: f64) -> Result<f64> {
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut y = DVector::zeros(m);
        for &(i, j, v) in entries {
            y[i] += v * x[j];
        }
        y
    };
    let g = DVector::from_column_slice(ground).normalize();
    let project = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        for _ in 0..2 {
            let c = g.dot(v);
            v.axpy(-c, &g, 1.0);
            for b in basis {
                let c = b.dot(v);
                v.axpy(-c, b, 1.0);
            }
        }
    };
    // Deterministic start with weight on every state.
    let mut v = DVector::from_fn(m, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    project(&mut v, &[]);
    v.normalize_mut();
    let max_iter = (m - 1).min(1500);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut last = f64::NAN;
    for it in 0..max_iter {
        let mut w = apply(&v);
        let a = v.dot(&w);
        alpha.push(a);
        basis.push(v.clone());
        project(&mut w, &basis);
        let b = w.norm();
        let k = alpha.len();
        if it % 5 == 4 || b < 1e-14 || it + 1 == max_iter {
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (idx, theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map(|(i, &v)| (i, v))
                .unwrap();
            let resid = (b * eig.eigenvectors[(k - 1, idx)]).abs();
            if resid <= tol * theta.abs().max(1.0) || b < 1e-14 {
                return Ok(theta);
            }
            last = theta;
        }
        beta.push(b);
        v = w / b;
    }
    Err(Error::Eigen(format!("Lanczos stopped at {max_iter} steps, last estimate {last}")))
}
