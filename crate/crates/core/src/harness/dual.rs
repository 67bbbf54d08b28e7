use std::f64::consts::PI;

use crate::field::DensityField;
use crate::zero_range::Configuration;

/// Number of test functions h_1..h_M in the distance.
pub const DUAL_MODES: usize = 20;

/// A finite measure on the unit torus.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Piecewise-constant density on M equal cells.
    Density(DensityField),
    /// Point masses (x, w).
    Atoms(Vec<(f64, f64)>),
}

impl Measure {
    /// pi^N = N^{-1} sum_k eta(k) delta_{k/N}.
    pub fn empirical(c: &Configuration) -> Self {
        let n = c.n() as f64;
        Measure::Atoms(
            c.eta.iter().enumerate().filter(|(_, &e)| e > 0).map(|(k, &e)| (k as f64 / n, e as f64 / n)).collect(),
        )
    }

    pub fn mass(&self) -> f64 {
        match self {
            Measure::Density(f) => f.mass(),
            Measure::Atoms(a) => a.iter().map(|p| p.1).sum(),
        }
    }
}

/// (frequency, is_sine) of h_m: h_1 = 1, then cos and sin of 2 pi j x in turn.
fn mode(m: usize) -> (usize, bool) {
    if m == 1 {
        (0, false)
    } else {
        (m / 2, m % 2 == 1)
    }
}

/// <h_m, mu>. Densities are integrated exactly cell by cell.
pub fn mode_pairing(mu: &Measure, m: usize) -> f64 {
    assert!(m >= 1, "modes start at 1");
    let (j, sine) = mode(m);
    match mu {
        Measure::Atoms(atoms) => atoms
            .iter()
            .map(|&(x, w)| {
                let a = 2.0 * PI * j as f64 * x;
                w * if sine { a.sin() } else { a.cos() }
            })
            .sum(),
        Measure::Density(f) => {
            if j == 0 {
                return f.mass();
            }
            let cells = f.len();
            let w = 2.0 * PI * j as f64;
            // Antiderivative of cos is sin/w, of sin is -cos/w.
            let prim = |x: f64| if sine { -(w * x).cos() / w } else { (w * x).sin() / w };
            let mut s = 0.0;
            let mut left = prim(0.0);
            for i in 0..cells {
                let right = prim((i + 1) as f64 / cells as f64);
                s += f.values[i] * (right - left);
                left = right;
            }
            s
        }
    }
}

/// sum_{m <= 20} 2^{-m} min(1, |<h_m, a> - <h_m, b>|).
pub fn dual_distance(a: &Measure, b: &Measure) -> f64 {
    (1..=DUAL_MODES)
        .map(|m| 0.5f64.powi(m as i32) * (mode_pairing(a, m) - mode_pairing(b, m)).abs().min(1.0))
        .sum()
}
