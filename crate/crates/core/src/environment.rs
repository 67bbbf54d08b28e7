//! Quenched random environment: disorder, the scaled partial-sum walk, the
//! window-averaged drifts q_k and the continuum drift W'_eps.
//!
//! Indexing: sites are `0..N`, site `k` sitting at `x = k/N`, with site 0
//! identified with site N. Disorder is one-based, `r_j` for `j = 1..=N`,
//! stored at `values[j - 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng::hash;

/// Law of the i.i.d. disorder. Only bounded laws are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum DisorderLaw {
    Rademacher,
    /// Uniform on [-a, a].
    UniformPm(f64),
    /// Standard normal conditioned on |r| <= bound.
    TruncatedGaussian(f64),
    /// Degenerate law r = c. Not centred; used to build deterministic walks in
    /// tests. Its walk is not normalised (sigma is reported as 1).
    Constant(f64),
}

impl DisorderLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DisorderLaw::Rademacher => Ok(()),
            DisorderLaw::UniformPm(a) if a.is_finite() && a > 0.0 => Ok(()),
            DisorderLaw::UniformPm(a) => invalid(format!("uniform half-width must be finite and positive, got {a}")),
            DisorderLaw::TruncatedGaussian(b) if b.is_infinite() => {
                Err(Error::UnboundedLaw("gaussian without truncation".into()))
            }
            DisorderLaw::TruncatedGaussian(b) if b > 0.0 => Ok(()),
            DisorderLaw::TruncatedGaussian(b) => invalid(format!("truncation bound must be positive, got {b}")),
            DisorderLaw::Constant(c) if c.is_finite() => Ok(()),
            DisorderLaw::Constant(c) => invalid(format!("constant law needs a finite value, got {c}")),
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            DisorderLaw::Rademacher => 1.0,
            DisorderLaw::UniformPm(a) => a,
            DisorderLaw::TruncatedGaussian(b) => b,
            DisorderLaw::Constant(c) => c.abs(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            DisorderLaw::Rademacher => 1.0,
            DisorderLaw::UniformPm(a) => a / 3f64.sqrt(),
            DisorderLaw::TruncatedGaussian(b) => {
                let n = Normal::standard();
                let mass = 2.0 * n.cdf(b) - 1.0;
                let dens = (-0.5 * b * b).exp() / (2.0 * std::f64::consts::PI).sqrt();
                (1.0 - 2.0 * b * dens / mass).sqrt()
            }
            DisorderLaw::Constant(_) => 1.0,
        }
    }

    /// Disorder value at any integer index; a pure function of `(seed, i)`.
    pub fn value_at(&self, seed: u64, i: i64) -> f64 {
        let h = hash(&[seed, i as u64, 0xD15C]);
        let u = ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        match *self {
            DisorderLaw::Rademacher => {
                if h >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderLaw::UniformPm(a) => a * (2.0 * u - 1.0),
            DisorderLaw::TruncatedGaussian(b) => {
                let n = Normal::standard();
                let lo = n.cdf(-b);
                let z = n.inverse_cdf(lo + u * (1.0 - 2.0 * lo));
                z.clamp(-b, b)
            }
            DisorderLaw::Constant(c) => c,
        }
    }
}

impl fmt::Display for DisorderLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisorderLaw::Rademacher => write!(f, "rademacher"),
            DisorderLaw::UniformPm(a) => write!(f, "uniform:{a}"),
            DisorderLaw::TruncatedGaussian(b) => write!(f, "tgauss:{b}"),
            DisorderLaw::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for DisorderLaw {
    type Err = Error;

    /// `rademacher`, `uniform:A`, `tgauss:B`, `const:C`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidParameter(format!("law `{name}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad law parameter: {e}")))
        };
        let law = match name.trim().to_ascii_lowercase().as_str() {
            "rademacher" => DisorderLaw::Rademacher,
            "uniform" | "uniform_pm" => DisorderLaw::UniformPm(num(arg)?),
            "tgauss" | "truncated_gaussian" => DisorderLaw::TruncatedGaussian(num(arg)?),
            "const" | "constant" => DisorderLaw::Constant(num(arg)?),
            "gaussian" | "normal" => return Err(Error::UnboundedLaw(s.to_string())),
            other => return invalid(format!("unknown disorder law `{other}`")),
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSequence {
    pub seed: u64,
    pub law: DisorderLaw,
    pub values: Vec<f64>,
    pub sigma: f64,
}

impl DisorderSequence {
    /// One-based periodic access r_j, j in Z, period = stored length.
    pub fn r(&self, j: i64) -> f64 {
        self.values[(j - 1).rem_euclid(self.values.len() as i64) as usize]
    }
}

pub fn gen_disorder(seed: u64, count: usize, law: DisorderLaw) -> Result<DisorderSequence> {
    if count == 0 {
        return invalid("disorder count must be at least 1");
    }
    law.validate()?;
    let values = (1..=count as i64).map(|i| law.value_at(seed, i)).collect();
    Ok(DisorderSequence { seed, law, values, sigma: law.sigma() })
}

/// Scaled walk X^N sampled on the grid {-N..2N}/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub n: usize,
    /// `values[k + N]` holds X^N at u = k/N.
    pub values: Vec<f64>,
}

impl WalkPath {
    fn from_unit(n: usize, unit: Vec<f64>) -> Self {
        debug_assert_eq!(unit.len(), n + 1);
        let w1 = unit[n];
        let mut values = Vec::with_capacity(3 * n + 1);
        values.extend(unit[..n].iter().map(|v| v - w1));
        values.extend(unit.iter().copied());
        values.extend(unit[1..].iter().map(|v| v + w1));
        Self { n, values }
    }

    /// Grid value at u = k/N for k in -N..=2N.
    pub fn at(&self, k: i64) -> f64 {
        self.values[(k + self.n as i64) as usize]
    }

    pub fn w1(&self) -> f64 {
        self.at(self.n as i64)
    }

    /// Piecewise-linear interpolant, lifted to all of R by the periodic-shift
    /// rule W_{u+1} = W_u + W_1.
    pub fn eval(&self, u: f64) -> f64 {
        let n = self.n as f64;
        if (-1.0..=2.0).contains(&u) {
            let s = (u * n).clamp(-n, 2.0 * n);
            let i = s.floor().min(2.0 * n - 1.0);
            let w = s - i;
            let k = i as i64;
            return (1.0 - w) * self.at(k) + w * self.at(k + 1);
        }
        let f = u.floor();
        self.eval(u - f) + f * self.w1()
    }
}

pub fn build_walk(d: &DisorderSequence, n: usize) -> Result<WalkPath> {
    if n == 0 {
        return invalid("N must be positive");
    }
    if d.values.len() < n {
        return Err(Error::InsufficientDisorder { needed: n, got: d.values.len() });
    }
    let scale = 1.0 / (d.sigma * (n as f64).sqrt());
    let mut unit = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    unit.push(0.0);
    for &r in &d.values[..n] {
        s += r;
        unit.push(s * scale);
    }
    Ok(WalkPath::from_unit(n, unit))
}

/// Window-averaged drifts q_k, k in 0..N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftField {
    pub n: usize,
    pub eps: f64,
    /// Half-width m = floor(eps N) of the averaging window.
    pub window: usize,
    pub q: Vec<f64>,
    pub sup_scaled: f64,
}

impl DriftField {
    /// Drift field from explicit values; `eps` and `window` are left at zero.
    pub fn from_q(q: Vec<f64>) -> Self {
        let n = q.len();
        let sup_scaled = q.iter().fold(0.0f64, |a, v| a.max(v.abs())) * (n as f64).sqrt();
        Self { n, eps: 0.0, window: 0, q, sup_scaled }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_q(vec![0.0; n])
    }

    pub fn q_over_sqrt_n(&self, k: usize) -> f64 {
        self.q[k] / (self.n as f64).sqrt()
    }

    /// Probability 1/2 + q_k/sqrt(N) of a jump to the right from site k.
    pub fn right_prob(&self, k: usize) -> f64 {
        0.5 + self.q_over_sqrt_n(k)
    }

    pub fn left_prob(&self, k: usize) -> f64 {
        0.5 - self.q_over_sqrt_n(k)
    }

    /// Rejects fields with |q_k|/sqrt(N) >= 1/2 somewhere.
    pub fn check_rates(&self) -> Result<()> {
        for k in 0..self.n {
            let v = self.q_over_sqrt_n(k);
            if !(v.abs() < 0.5) {
                return Err(Error::DriftTooLarge { site: k, value: v.abs() });
            }
        }
        Ok(())
    }
}

pub fn epsilon_drift(w: &WalkPath, eps: f64) -> Result<DriftField> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("eps must lie in (0,1), got {eps}"));
    }
    let n = w.n;
    let en = eps * n as f64;
    if en < 1.0 {
        return Err(Error::EmptyWindow(en));
    }
    let m = en.floor() as i64;
    let c = (n as f64).sqrt() / (2 * m + 1) as f64;
    // W_{(k+m)/N} - W_{(k-m-1)/N} collects r_{k-m}..r_{k+m}: 2m+1 terms.
    let q: Vec<f64> = (0..n as i64).map(|k| c * (w.at(k + m) - w.at(k - m - 1))).collect();
    let sup_scaled = q.iter().fold(0.0f64, |a, v| a.max(v.abs())) * (n as f64).sqrt();
    Ok(DriftField { n, eps, window: m as usize, q, sup_scaled })
}

/// W'_eps(x) = (W_{x+eps} - W_{x-eps}) / (2 eps) on the interpolated walk.
pub fn w_prime_eps(w: &WalkPath, eps: f64, x: f64) -> f64 {
    (w.eval(x + eps) - w.eval(x - eps)) / (2.0 * eps)
}

/// One quenched sample shared by every level N.
///
/// Partial sums of a single fixed sequence do not converge pathwise as N
/// grows, so levels are coupled through a fine reference walk W (N_ref
/// steps): the level-N walk is W sampled at k/N, and its disorder is
/// recovered from the increments as r^N_k = sigma sqrt(N) (W(k/N) - W((k-1)/N)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuenchedEnvironment {
    pub seed: u64,
    pub law: DisorderLaw,
    pub sigma: f64,
    pub reference: WalkPath,
}

pub const DEFAULT_N_REF: usize = 1 << 20;

impl QuenchedEnvironment {
    pub fn new(seed: u64, law: DisorderLaw, n_ref: usize) -> Result<Self> {
        let d = gen_disorder(seed, n_ref, law)?;
        let reference = build_walk(&d, n_ref)?;
        Ok(Self { seed, law, sigma: d.sigma, reference })
    }

    pub fn n_ref(&self) -> usize {
        self.reference.n
    }

    pub fn walk(&self, n: usize) -> WalkPath {
        let nr = self.n_ref();
        let unit: Vec<f64> = if nr % n == 0 {
            let s = nr / n;
            (0..=n).map(|k| self.reference.at((k * s) as i64)).collect()
        } else {
            (0..=n).map(|k| self.reference.eval(k as f64 / n as f64)).collect()
        };
        WalkPath::from_unit(n, unit)
    }

    /// Level-N disorder r^N_1..r^N_N.
    pub fn disorder(&self, n: usize) -> DisorderSequence {
        let w = self.walk(n);
        let c = self.sigma * (n as f64).sqrt();
        let values = (1..=n as i64).map(|k| c * (w.at(k) - w.at(k - 1))).collect();
        DisorderSequence { seed: self.seed, law: self.law, values, sigma: self.sigma }
    }

    pub fn drift(&self, n: usize, eps: f64) -> Result<DriftField> {
        epsilon_drift(&self.walk(n), eps)
    }

    pub fn w_prime_eps(&self, eps: f64, x: f64) -> f64 {
        w_prime_eps(&self.reference, eps, x)
    }
}
