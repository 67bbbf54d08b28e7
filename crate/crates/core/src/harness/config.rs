use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::{DisorderLaw, DriftField, QuenchedEnvironment, DEFAULT_N_REF};
use crate::error::{invalid, Error, Result};
use crate::zero_range::{Engine, RateFunction};

/// Initial macroscopic profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitProfile {
    Constant(f64),
    /// a + b cos(2 pi x)
    Cosine { a: f64, b: f64 },
}

impl InitProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitProfile::Constant(c) => c,
            InitProfile::Cosine { a, b } => a + b * (2.0 * std::f64::consts::PI * x).cos(),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            InitProfile::Constant(c) => c,
            InitProfile::Cosine { a, b } => a + b.abs(),
        }
    }
}

impl fmt::Display for InitProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitProfile::Constant(c) => write!(f, "const:{c}"),
            InitProfile::Cosine { a, b } => write!(f, "cos:{a}:{b}"),
        }
    }
}

impl FromStr for InitProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|e| Error::Config(format!("bad number `{t}` in `{s}`: {e}")));
        let p = match parts.as_slice() {
            ["const", c] => InitProfile::Constant(num(c)?),
            ["cos", a, b] => InitProfile::Cosine { a: num(a)?, b: num(b)? },
            _ => return Err(Error::Config(format!("unknown initial profile `{s}` (const:C or cos:A:B)"))),
        };
        let min = match p {
            InitProfile::Constant(c) => c,
            InitProfile::Cosine { a, b } => a - b.abs(),
        };
        if !(min >= 0.0) || !p.max().is_finite() {
            return Err(Error::Config(format!("initial profile `{s}` must be finite and nonnegative")));
        }
        Ok(p)
    }
}

/// Smooth periodic test function G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFn {
    Const(f64),
    Sin(u32),
    Cos(u32),
}

impl TestFn {
    pub fn value(&self, x: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI;
        match *self {
            TestFn::Const(c) => c,
            TestFn::Sin(n) => (w * n as f64 * x).sin(),
            TestFn::Cos(n) => (w * n as f64 * x).cos(),
        }
    }

    /// (sup |G'|, sup |G''|)
    pub fn derivative_bounds(&self) -> (f64, f64) {
        match *self {
            TestFn::Const(_) => (0.0, 0.0),
            TestFn::Sin(n) | TestFn::Cos(n) => {
                let w = 2.0 * std::f64::consts::PI * n as f64;
                (w, w * w)
            }
        }
    }
}

impl fmt::Display for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFn::Const(c) => write!(f, "const:{c}"),
            TestFn::Sin(n) => write!(f, "sin:{n}"),
            TestFn::Cos(n) => write!(f, "cos:{n}"),
        }
    }
}

impl FromStr for TestFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.trim().split_once(':').unwrap_or((s.trim(), "1"));
        let bad = |e: String| Error::Config(format!("bad test function `{s}`: {e}"));
        match kind {
            "const" => Ok(TestFn::Const(arg.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?)),
            "sin" | "cos" => {
                let n: u32 = arg.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                if n == 0 {
                    return Err(bad("frequency must be positive".into()));
                }
                Ok(if kind == "sin" { TestFn::Sin(n) } else { TestFn::Cos(n) })
            }
            _ => Err(bad("expected const:C, sin:N or cos:N".into())),
        }
    }
}

/// Flat key/value experiment description. Every run in one config shares the
/// environment seed, so all sizes see the same quenched sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub law: String,
    pub eps: f64,
    /// Rate preset (`linear`, `linear:C`, `kink5`) or `table:g0,g1,...`.
    pub g: String,
    pub ns: Vec<usize>,
    pub t_obs: Vec<f64>,
    pub theta: f64,
    pub replicas: usize,
    pub pde_m: usize,
    pub output_dir: Option<String>,
    /// Seed of the particle dynamics, independent of the environment.
    pub dyn_seed: u64,
    pub init: String,
    pub n_ref: usize,
    /// Run without environment (q = 0, W' = 0).
    pub zero_drift: bool,
    /// `auto`, `tree` or `walkers`.
    pub engine: String,
    /// Test function for the diagnostics.
    pub test_fn: String,
    /// Sampling points in time for the block term of the replacement statistic.
    pub time_grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            law: "rademacher".into(),
            eps: 0.1,
            g: "linear".into(),
            ns: vec![512, 1024, 2048, 4096],
            t_obs: vec![0.05],
            theta: 0.05,
            replicas: 20,
            pde_m: 512,
            output_dir: None,
            dyn_seed: 1,
            init: "cos:1:0.5".into(),
            n_ref: DEFAULT_N_REF,
            zero_drift: false,
            engine: "auto".into(),
            test_fn: "sin:1".into(),
            time_grid: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.law()?;
        self.rate()?;
        self.init()?;
        self.engine()?;
        self.test_function()?;
        if self.ns.is_empty() {
            return Err(Error::Config("ns must not be empty".into()));
        }
        let min_n = *self.ns.iter().min().unwrap();
        if !(self.theta > 0.0 && self.theta < 0.5) || self.theta * (min_n as f64) < 1.0 {
            return Err(Error::Config(format!("need 0 < theta < 1/2 and theta * min(ns) >= 1 (theta = {})", self.theta)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if self.t_obs.iter().any(|&t| !(t >= 0.0 && t.is_finite())) || self.t_obs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("t_obs must be increasing and nonnegative".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        if !self.pde_m.is_power_of_two() || !(128..=16384).contains(&self.pde_m) {
            return Err(Error::Config(format!("pde_m must be a power of two in [128, 16384], got {}", self.pde_m)));
        }
        if self.n_ref < *self.ns.iter().max().unwrap() {
            return Err(Error::Config("n_ref must be at least max(ns)".into()));
        }
        Ok(())
    }

    pub fn law(&self) -> Result<DisorderLaw> {
        let law: DisorderLaw = self.law.parse()?;
        law.validate()?;
        Ok(law)
    }

    pub fn rate(&self) -> Result<RateFunction> {
        match self.g.strip_prefix("table:") {
            Some(t) => RateFunction::parse_table(t),
            None => RateFunction::preset(&self.g),
        }
    }

    pub fn init(&self) -> Result<InitProfile> {
        self.init.parse()
    }

    pub fn engine(&self) -> Result<Engine> {
        match self.engine.as_str() {
            "auto" => Ok(Engine::Auto),
            "tree" => Ok(Engine::Tree),
            "walkers" => Ok(Engine::Walkers),
            e => invalid(format!("unknown engine `{e}`")),
        }
    }

    pub fn test_function(&self) -> Result<TestFn> {
        self.test_fn.parse()
    }

    pub fn environment(&self) -> Result<QuenchedEnvironment> {
        QuenchedEnvironment::new(self.seed, self.law()?, self.n_ref)
    }

    pub(crate) fn drift(&self, env: &QuenchedEnvironment, n: usize) -> Result<DriftField> {
        if self.zero_drift {
            Ok(DriftField::zero(n))
        } else {
            env.drift(n, self.eps)
        }
    }

    pub(crate) fn w_prime(&self, env: &QuenchedEnvironment, x: f64) -> f64 {
        if self.zero_drift {
            0.0
        } else {
            env.w_prime_eps(self.eps, x)
        }
    }
}
