use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tabulated jump rate g with certified constants.
///
/// Beyond the table, g is extended linearly with the last increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    values: Vec<f64>,
    slope: f64,
    /// Prefix sums of ln g(i), i = 1..=k, at index k.
    log_fact: Vec<f64>,
    pub g_star_upper: f64,
    pub g_star_lower: f64,
    pub c1: f64,
    pub k0: usize,
}

impl RateFunction {
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn table(&self) -> &[f64] {
        &self.values
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    #[inline]
    pub fn g(&self, k: usize) -> f64 {
        match self.values.get(k) {
            Some(&v) => v,
            None => {
                let kk = self.k_max();
                self.values[kk] + (k - kk) as f64 * self.slope
            }
        }
    }

    /// ln g(n)! = sum_{i=1}^n ln g(i).
    pub fn log_gfact(&self, n: usize) -> f64 {
        if n < self.log_fact.len() {
            return self.log_fact[n];
        }
        let mut s = *self.log_fact.last().unwrap();
        for i in self.log_fact.len()..=n {
            s += self.g(i).ln();
        }
        s
    }

    /// `Some(c)` when g(k) = c k exactly on the table and its extension.
    pub fn linear_coefficient(&self) -> Option<f64> {
        let c = self.values[1];
        let exact = self.values.iter().enumerate().all(|(k, &v)| v == c * k as f64);
        (exact && self.slope == c).then_some(c)
    }

    pub fn linear(c: f64, k_max: usize) -> Result<Self> {
        certify_rate_function(&(0..=k_max).map(|k| c * k as f64).collect::<Vec<_>>())
    }

    /// g(k) = k + min(k, 5).
    pub fn kink5(k_max: usize) -> Result<Self> {
        certify_rate_function(&(0..=k_max).map(|k| (k + k.min(5)) as f64).collect::<Vec<_>>())
    }

    /// Named presets: `linear` (g = k), `linear:C` (g = C k), `kink5`
    /// (g = k + min(k,5)).
    pub fn preset(name: &str) -> Result<Self> {
        match name.split_once(':') {
            None if name == "linear" => Self::linear(1.0, 64),
            None if name == "kink5" => Self::kink5(64),
            Some(("linear", c)) => {
                let c: f64 = c.parse().map_err(|e| Error::InvalidParameter(format!("bad slope: {e}")))?;
                Self::linear(c, 64)
            }
            _ => invalid(format!("unknown rate preset `{name}`")),
        }
    }

    /// Table from text: numbers separated by whitespace or commas.
    pub fn parse_table(text: &str) -> Result<Self> {
        let vals: std::result::Result<Vec<f64>, _> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let vals = vals.map_err(|e| Error::InvalidParameter(format!("bad rate table: {e}")))?;
        certify_rate_function(&vals)
    }
}

fn reject<T>(k: usize, j: usize, reason: &str) -> Result<T> {
    Err(Error::RateFunction { k, j, reason: reason.to_string() })
}

/// Checks g(0) = 0, g > 0 off zero, bounded increments and the existence of
/// (c1, k0) with g(k) - g(j) >= c1 whenever k >= j + k0.
pub fn certify_rate_function(table: &[f64]) -> Result<RateFunction> {
    if table.len() < 2 {
        return invalid("rate table needs at least two entries");
    }
    if table.iter().any(|v| !v.is_finite()) {
        return invalid("rate table has non-finite entries");
    }
    if table[0] != 0.0 {
        return reject(0, 0, "g(0) must be 0");
    }
    if let Some(k) = (1..table.len()).find(|&k| table[k] <= 0.0) {
        return reject(k, 0, "g(k) must be positive for k >= 1");
    }
    let kmax = table.len() - 1;
    let slope = table[kmax] - table[kmax - 1];
    // Extended table long enough that every pair with j + k0 beyond it is
    // governed by the linear tail.
    let ext_len = 2 * kmax + 3;
    let ext: Vec<f64> = (0..ext_len)
        .map(|k| if k <= kmax { table[k] } else { table[kmax] + (k - kmax) as f64 * slope })
        .collect();
    if slope <= 0.0 {
        if let Some(k) = (kmax + 1..ext_len).find(|&k| ext[k] <= 0.0) {
            return reject(k, 0, "extrapolated tail reaches zero");
        }
    }
    let g_star_upper = ext.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let table_ratio = (1..=kmax).map(|k| table[k] / k as f64).fold(f64::INFINITY, f64::min);
    let g_star_lower = table_ratio.min(slope.max(0.0));

    // suffix_min[k] = min_{i >= k} ext[i]
    let mut suffix_min = ext.clone();
    for k in (0..ext_len - 1).rev() {
        suffix_min[k] = suffix_min[k].min(suffix_min[k + 1]);
    }
    for k0 in 1..=kmax {
        let mut c1 = slope * k0 as f64;
        for j in 0..ext_len - k0 {
            c1 = c1.min(suffix_min[j + k0] - ext[j]);
        }
        if c1 > 0.0 && slope > 0.0 {
            return Ok(RateFunction {
                log_fact: log_fact(table),
                values: table.to_vec(),
                slope,
                g_star_upper,
                g_star_lower,
                c1,
                k0,
            });
        }
    }
    // No k0 works; report the first pair (in scan order) with g(k) <= g(j).
    for j in 0..ext_len {
        for k in j + 1..ext_len {
            if ext[k] - ext[j] <= 0.0 {
                return reject(k, j, "no (c1, k0) with g(k) - g(j) >= c1 for k >= j + k0");
            }
        }
    }
    reject(ext_len, kmax + 1, "extrapolated tail is not increasing")
}

fn log_fact(table: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(table.len());
    let mut s = 0.0;
    out.push(0.0);
    for &v in &table[1..] {
        s += v.ln();
        out.push(s);
    }
    out
}
