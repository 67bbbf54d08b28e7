use std::sync::Arc;

use rand::RngCore;

use super::driver::{BrownianDriver, MAX_DEPTH};
use crate::environment::WalkPath;
use crate::error::{invalid, Error, Result};

const MAX_SEGMENT: i32 = 62;

/// Tabulated scale function A(y) = int_0^y e^{W} on [-L, L].
///
/// W is sampled on a grid that starts at `base_h` and is bisected wherever a
/// cell's potential increment exceeds `max_dw`. Within a cell W is taken
/// linear, so A is integrated exactly there and inverted in closed form.
#[derive(Clone)]
pub struct BroxEnvironment {
    potential: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    half_width: f64,
    max_half_width: f64,
    base_h: f64,
    min_h: f64,
    max_dw: f64,
    xs: Vec<f64>,
    ws: Vec<f64>,
    a: Vec<f64>,
}

impl std::fmt::Debug for BroxEnvironment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BroxEnvironment")
            .field("half_width", &self.half_width)
            .field("nodes", &self.xs.len())
            .finish()
    }
}

impl BroxEnvironment {
    pub fn from_fn<F>(w: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_grid(w, 4.0, 64.0, 2f64.powi(-12), 2f64.powi(-18), 0.05)
    }

    /// Potential -4 sigma W of the walk, so that the diffusion is the limit of
    /// the walk with u_i = 1/2 + r_i / sqrt(N).
    pub fn from_walk(walk: WalkPath, sigma: f64) -> Self {
        Self::from_fn(move |x| -4.0 * sigma * walk.eval(x))
    }

    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0)
    }

    pub fn with_grid<F>(w: F, half_width: f64, max_half_width: f64, base_h: f64, min_h: f64, max_dw: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut env = Self {
            potential: Arc::new(w),
            half_width,
            max_half_width: max_half_width.max(half_width),
            base_h,
            min_h: min_h.min(base_h),
            max_dw,
            xs: Vec::new(),
            ws: Vec::new(),
            a: Vec::new(),
        };
        env.build();
        env
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes(&self) -> usize {
        self.xs.len()
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    fn build(&mut self) {
        let l = self.half_width;
        let cells = (2.0 * l / self.base_h).round() as usize;
        let w = self.potential.clone();
        let mut xs = Vec::with_capacity(cells + 1);
        let mut ws = Vec::with_capacity(cells + 1);
        let mut x0 = -l;
        let mut w0 = w(x0);
        for c in 0..cells {
            let x1 = -l + (c + 1) as f64 * self.base_h;
            let w1 = w(x1);
            self.refine(&*w, x0, w0, x1, w1, &mut xs, &mut ws);
            x0 = x1;
            w0 = w1;
        }
        xs.push(x0);
        ws.push(w0);

        // Accumulate outward from 0 so that A near 0 does not inherit the
        // rounding of large partial sums from a far, high-potential edge.
        let zero = xs.partition_point(|&x| x < 0.0);
        let mut a = vec![0.0; xs.len()];
        for i in zero + 1..xs.len() {
            a[i] = a[i - 1] + cell_integral(xs[i] - xs[i - 1], ws[i - 1], ws[i]);
        }
        for i in (0..zero).rev() {
            a[i] = a[i + 1] - cell_integral(xs[i + 1] - xs[i], ws[i], ws[i + 1]);
        }
        self.xs = xs;
        self.ws = ws;
        self.a = a;
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&self, w: &dyn Fn(f64) -> f64, x0: f64, w0: f64, x1: f64, w1: f64, xs: &mut Vec<f64>, ws: &mut Vec<f64>) {
        if (w1 - w0).abs() > self.max_dw && x1 - x0 > self.min_h {
            let xm = 0.5 * (x0 + x1);
            let wm = w(xm);
            self.refine(w, x0, w0, xm, wm, xs, ws);
            self.refine(w, xm, wm, x1, w1, xs, ws);
        } else {
            xs.push(x0);
            ws.push(w0);
        }
    }

    /// Doubles the window. Fails once the cap is reached.
    pub fn extend(&mut self) -> Result<()> {
        if self.half_width * 2.0 > self.max_half_width {
            return Err(Error::WindowExhausted(format!("half-width cap {} reached", self.max_half_width)));
        }
        self.half_width *= 2.0;
        self.build();
        Ok(())
    }

    /// A(x) for x inside the window.
    pub fn scale(&self, x: f64) -> Option<f64> {
        if !(x >= self.xs[0] && x <= *self.xs.last().unwrap()) {
            return None;
        }
        let i = (self.xs.partition_point(|&v| v <= x).max(1) - 1).min(self.xs.len() - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (self.ws[i + 1] - self.ws[i]) / h;
        let u = x - self.xs[i];
        Some(self.a[i] + self.ws[i].exp() * exp_ratio(s, u))
    }

    /// (A^{-1}(y), W(A^{-1}(y))), or None when y is outside A's range.
    pub fn scale_inverse(&self, y: f64) -> Option<(f64, f64)> {
        let last = self.a.len() - 1;
        if !(y >= self.a[0] && y <= self.a[last]) {
            return None;
        }
        let i = (self.a.partition_point(|&v| v <= y).max(1) - 1).min(last - 1);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (self.ws[i + 1] - self.ws[i]) / h;
        let z = (y - self.a[i]) * (-self.ws[i]).exp();
        let u = if s.abs() * h < 1e-12 { z } else { (s * z).ln_1p() / s };
        let u = u.clamp(0.0, h);
        Some((self.xs[i] + u, self.ws[i] + s * u))
    }

    /// True when A beyond the window edge on the given side changes by less
    /// than its rounding there, so that A is numerically at its limit.
    pub fn tail_saturated(&self, upper: bool) -> bool {
        let (a, w) = if upper { (*self.a.last().unwrap(), *self.ws.last().unwrap()) } else { (self.a[0], self.ws[0]) };
        w.exp() < f64::EPSILON * a.abs()
    }

    /// Strict monotonicity of the tabulated A.
    pub fn is_monotone(&self) -> bool {
        self.a.windows(2).all(|p| p[1] > p[0])
    }
}

/// int_0^h e^{w0 + (w1 - w0) u / h} du
fn cell_integral(h: f64, w0: f64, w1: f64) -> f64 {
    let d = w1 - w0;
    let r = if d.abs() < 1e-12 { 1.0 + 0.5 * d } else { d.exp_m1() / d };
    h * w0.exp() * r
}

/// (e^{s u} - 1) / s, with its limit u at s = 0.
fn exp_ratio(s: f64, u: f64) -> f64 {
    if (s * u).abs() < 1e-12 {
        u
    } else {
        (s * u).exp_m1() / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BroxConfig {
    /// Spatial resolution: a B-time leaf is split while X moves more than this
    /// across it (or is expected to).
    pub h_x: f64,
    pub min_level: u32,
    pub max_level: u32,
    /// Use every dyadic leaf at this level instead of adaptive refinement.
    pub uniform_level: Option<u32>,
    /// Rerun at half resolution to report a tolerance.
    pub estimate_tolerance: bool,
}

impl Default for BroxConfig {
    fn default() -> Self {
        Self { h_x: 0.01, min_level: 4, max_level: 40, uniform_level: None, estimate_tolerance: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BroxSample {
    pub x: f64,
    /// B-time s with T(s) = t.
    pub b_time: f64,
    /// |X(h_x) - X(2 h_x)|, zero when not estimated.
    pub tol: f64,
    pub leaves: u64,
}

#[derive(Clone, Copy)]
enum Refine {
    Uniform(u32),
    Adaptive { h_x: f64, min_level: u32, max_level: u32 },
}

struct Walker<'a> {
    env: &'a BroxEnvironment,
    driver: &'a BrownianDriver,
    refine: Refine,
    t: f64,
    clock: f64,
    leaves: u64,
}

#[derive(Clone, Copy)]
struct Node {
    s: f64,
    b: f64,
    x: f64,
    w: f64,
    /// B lies beyond the tabulated range of A. The infinite clock rate forces
    /// refinement towards the exit; if t is not reached before it, the
    /// window is extended and the walk restarts.
    clamped: bool,
    /// Clamped against a tail where A has numerically reached a finite
    /// limit. The clock diverges as B approaches that limit, so t is reached
    /// before the exit.
    saturated: bool,
}

impl Walker<'_> {
    fn node(&self, s: f64, b: f64) -> Result<Node> {
        Ok(match self.env.scale_inverse(b) {
            Some((x, w)) => Node { s, b, x, w, clamped: false, saturated: false },
            None => {
                let x = if b > 0.0 { self.env.half_width } else { -self.env.half_width };
                let saturated = self.env.tail_saturated(b > 0.0);
                Node { s, b, x, w: f64::NEG_INFINITY, clamped: true, saturated }
            }
        })
    }

    /// Depth-first walk of one dyadic interval. Returns the crossing point
    /// once the accumulated clock reaches t.
    fn visit(&mut self, seg: i32, level: u32, idx: u64, l: Node, r: Node) -> Result<Option<(f64, f64)>> {
        let len = r.s - l.s;
        let dt = len * 0.5 * ((-2.0 * l.w).exp() + (-2.0 * r.w).exp());
        let crossing = self.clock + dt >= self.t;
        let split = match self.refine {
            Refine::Uniform(level_max) => level < level_max,
            Refine::Adaptive { h_x, min_level, max_level } => {
                level < min_level
                    || (crossing && level < MAX_DEPTH)
                    || (level < max_level
                        && ((r.x - l.x).abs() > h_x || len.sqrt() * (-l.w).exp().max((-r.w).exp()) > h_x))
            }
        };
        if split {
            let bm = self.driver.midpoint(seg, level, idx, l.b, r.b, len);
            let m = self.node(0.5 * (l.s + r.s), bm)?;
            if let Some(hit) = self.visit(seg, level + 1, 2 * idx, l, m)? {
                return Ok(Some(hit));
            }
            let hit = self.visit(seg, level + 1, 2 * idx + 1, m, r)?;
            // A coarse trapezoid may overestimate the clock, so a crossing
            // parent can legitimately have no crossing child. Only when the
            // gap to t is at rounding level were the children's increments
            // absorbed, and then the crossing is at the right end.
            if hit.is_none() && crossing && self.t - self.clock <= 4.0 * f64::EPSILON * self.t {
                if r.clamped {
                    return Err(outside(r.b));
                }
                self.clock = self.t;
                return Ok(Some((r.x, r.s)));
            }
            return Ok(hit);
        }
        self.leaves += 1;
        // The clock had not reached t when B left the tabulated range.
        if !l.clamped && r.clamped && r.saturated {
            self.clock = self.t;
            return Ok(Some((l.x, l.s)));
        }
        if l.clamped || r.clamped {
            return Err(outside(if l.clamped { l.b } else { r.b }));
        }
        if crossing {
            let frac = if dt > 0.0 { ((self.t - self.clock) / dt).clamp(0.0, 1.0) } else { 0.0 };
            let b = l.b + frac * (r.b - l.b);
            let (x, _) = self.env.scale_inverse(b).ok_or_else(|| outside(b))?;
            return Ok(Some((x, l.s + frac * len)));
        }
        self.clock += dt;
        Ok(None)
    }

    fn run(&mut self) -> Result<(f64, f64)> {
        if self.t == 0.0 {
            return Ok((self.env.scale_inverse(0.0).ok_or_else(|| outside(0.0))?.0, 0.0));
        }
        for seg in -1..=MAX_SEGMENT {
            let (a, b) = BrownianDriver::segment_bounds(seg);
            let l = self.node(a, self.driver.segment_start(seg))?;
            let r = self.node(b, self.driver.segment_end(seg))?;
            if let Some(hit) = self.visit(seg, 0, 0, l, r)? {
                return Ok(hit);
            }
        }
        invalid("Brownian clock never reached t")
    }
}

fn outside(b: f64) -> Error {
    Error::WindowExhausted(format!("B = {b} outside the tabulated scale range"))
}

fn locate(env: &mut BroxEnvironment, t: f64, driver: &BrownianDriver, refine: Refine) -> Result<(f64, f64, u64)> {
    loop {
        let mut w = Walker { env, driver, refine, t, clock: 0.0, leaves: 0 };
        match w.run() {
            Ok((x, s)) => return Ok((x, s, w.leaves)),
            Err(Error::WindowExhausted(_)) => env.extend()?,
            Err(e) => return Err(e),
        }
    }
}

/// X_t = A^{-1}(B_{T^{-1}(t)}) for the given Brownian path.
pub fn brox_sample_with_driver(
    env: &mut BroxEnvironment,
    t: f64,
    driver: &BrownianDriver,
    cfg: &BroxConfig,
) -> Result<BroxSample> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time {t} must be finite and nonnegative"));
    }
    if !(cfg.h_x > 0.0) {
        return invalid("h_x must be positive");
    }
    let (fine, coarse) = match cfg.uniform_level {
        Some(level) => (Refine::Uniform(level), Refine::Uniform(level.saturating_sub(1))),
        None => (
            Refine::Adaptive { h_x: cfg.h_x, min_level: cfg.min_level, max_level: cfg.max_level },
            Refine::Adaptive { h_x: 2.0 * cfg.h_x, min_level: cfg.min_level, max_level: cfg.max_level },
        ),
    };
    let (x, b_time, leaves) = locate(env, t, driver, fine)?;
    let tol = if cfg.estimate_tolerance { (locate(env, t, driver, coarse)?.0 - x).abs() } else { 0.0 };
    Ok(BroxSample { x, b_time, tol, leaves })
}

/// Brox sample with a fresh Brownian path seeded from `rng`.
pub fn brox_sample<R: RngCore>(env: &mut BroxEnvironment, t: f64, rng: &mut R, cfg: &BroxConfig) -> Result<BroxSample> {
    let driver = BrownianDriver::new(rng.next_u64());
    brox_sample_with_driver(env, t, &driver, cfg)
}
