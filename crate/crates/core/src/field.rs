use serde::{Deserialize, Serialize};

/// Grid function on the unit torus, cell-centred at x_i = (i + 1/2)/M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { values: (0..m).map(|i| f((i as f64 + 0.5) / m as f64)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.values.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// Periodic linear interpolation between cell centres.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len();
        let s = x.rem_euclid(1.0) * m as f64 - 0.5;
        let i0 = s.floor();
        let w = s - i0;
        let i = (i0 as i64).rem_euclid(m as i64) as usize;
        let j = (i + 1) % m;
        (1.0 - w) * self.values[i] + w * self.values[j]
    }

    /// L1 distance; the coarser grid is read off the finer one by interpolation
    /// when sizes differ.
    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        if self.len() == other.len() {
            return self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>()
                * self.dx();
        }
        let (fine, coarse) = if self.len() > other.len() { (self, other) } else { (other, self) };
        (0..fine.len())
            .map(|i| (fine.values[i] - coarse.eval(fine.x(i))).abs())
            .sum::<f64>()
            * fine.dx()
    }

    pub fn sup_distance(&self, other: &DensityField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
