use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::{Exp1, Poisson};

use super::{Configuration, RateFunction, SumTree};
use crate::brox::PeriodicEnvironment;
use crate::environment::DriftField;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub site: usize,
    pub dest: usize,
    pub direction: i8,
    /// Macroscopic waiting time before the jump.
    pub dt: f64,
}

/// Hook called along a trajectory. `elapse` reports a stretch of macroscopic
/// time during which the configuration `eta` was frozen; `jumped` is called
/// after each move with the updated configuration.
pub trait Observer {
    fn elapse(&mut self, _dt: f64, _eta: &[u32]) {}
    fn jumped(&mut self, _from: usize, _to: usize, _eta: &[u32]) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

pub trait Dynamics {
    fn time(&self) -> f64;
    fn eta(&self) -> &[u32];
    fn total(&self) -> u64;
    fn run_until<R: Rng, O: Observer>(&mut self, t_end: f64, rng: &mut R, obs: &mut O);

    /// Same law as `run_until` without an observer; engines may skip
    /// generating individual holding times.
    fn advance_to<R: Rng>(&mut self, t_end: f64, rng: &mut R) {
        self.run_until(t_end, rng, &mut NoObserver);
    }

    fn configuration(&self) -> Configuration {
        Configuration { eta: self.eta().to_vec(), total: self.total() }
    }
}

fn check_inputs(config: &Configuration, env: &DriftField) -> Result<()> {
    if env.n != config.n() {
        return invalid(format!("drift field has {} sites, configuration {}", env.n, config.n()));
    }
    env.check_rates()
}

/// General engine: Gillespie sampling with a sum tree over site exit rates.
#[derive(Debug, Clone)]
pub struct EventState {
    eta: Vec<u32>,
    total: u64,
    right: Vec<f64>,
    g: RateFunction,
    tree: SumTree,
    t: f64,
    speed: f64,
}

impl EventState {
    pub fn new(config: &Configuration, env: &DriftField, g: &RateFunction) -> Result<Self> {
        check_inputs(config, env)?;
        let leaves: Vec<f64> = config.eta.iter().map(|&e| g.g(e as usize)).collect();
        let n = config.n();
        Ok(Self {
            eta: config.eta.clone(),
            total: config.total,
            right: (0..n).map(|k| env.right_prob(k)).collect(),
            g: g.clone(),
            tree: SumTree::new(&leaves),
            t: 0.0,
            speed: (n * n) as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    /// Total exit rate sum_k g(eta(k)), before the N^2 speed-up.
    pub fn root_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn t_micro(&self) -> f64 {
        self.t * self.speed
    }

    pub fn tree_coherence_error(&self) -> f64 {
        let fresh = self.eta.iter().enumerate().map(|(k, &e)| (self.tree.leaf(k) - self.g.g(e as usize)).abs());
        fresh.fold(self.tree.coherence_error(), f64::max)
    }

    pub fn waiting_time<R: Rng>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / (self.tree.total() * self.speed)
    }

    /// Chooses a site proportionally to its exit rate and a direction, then
    /// moves one particle. Only the two touched leaves are updated.
    pub fn fire<R: Rng>(&mut self, rng: &mut R) -> (usize, usize, i8) {
        let n = self.eta.len();
        let k = loop {
            let k = self.tree.find(rng.random::<f64>() * self.tree.total());
            if self.eta[k] > 0 {
                break k;
            }
        };
        let (dest, dir) = if rng.random::<f64>() < self.right[k] {
            (if k + 1 == n { 0 } else { k + 1 }, 1)
        } else {
            (if k == 0 { n - 1 } else { k - 1 }, -1)
        };
        self.eta[k] -= 1;
        self.eta[dest] += 1;
        self.tree.set(k, self.g.g(self.eta[k] as usize));
        self.tree.set(dest, self.g.g(self.eta[dest] as usize));
        (k, dest, dir)
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Option<Event> {
        if self.total == 0 {
            return None;
        }
        let dt = self.waiting_time(rng);
        self.t += dt;
        let (site, dest, direction) = self.fire(rng);
        Some(Event { site, dest, direction, dt })
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.t = t;
    }
}

impl Dynamics for EventState {
    fn time(&self) -> f64 {
        self.t
    }

    fn eta(&self) -> &[u32] {
        &self.eta
    }

    fn total(&self) -> u64 {
        self.total
    }

    fn run_until<R: Rng, O: Observer>(&mut self, t_end: f64, rng: &mut R, obs: &mut O) {
        if self.total == 0 {
            if t_end > self.t {
                obs.elapse(t_end - self.t, &self.eta);
                self.t = t_end;
            }
            return;
        }
        loop {
            let dt = self.waiting_time(rng);
            // Memorylessness makes discarding the overshooting clock exact.
            if self.t + dt > t_end {
                if t_end > self.t {
                    obs.elapse(t_end - self.t, &self.eta);
                    self.t = t_end;
                }
                return;
            }
            obs.elapse(dt, &self.eta);
            self.t += dt;
            let (k, dest, _) = self.fire(rng);
            obs.jumped(k, dest, &self.eta);
        }
    }
}

/// Particle-based engine. Every particle carries a clock of rate
/// beta = sup_k g(k)/k; when it rings at a site holding k particles the jump
/// is kept with probability g(k)/(beta k). The kept jumps then occur at the
/// zero-range rates g(k), and for g(k) = c k nothing is ever rejected.
///
/// A single 64-bit draw selects both the particle (high half of the product
/// with the particle count) and the direction (low half, compared with the
/// right-jump probability scaled to 2^64).
#[derive(Debug, Clone)]
pub struct WalkerState {
    eta: Vec<u32>,
    pos: Vec<u32>,
    thresh: Vec<u64>,
    beta: f64,
    /// Acceptance g(k)/(beta k) at index k; None when g is linear.
    accept: Option<Vec<f64>>,
    g: RateFunction,
    t: f64,
    speed: f64,
    walk: PeriodicEnvironment,
}

/// sup_k g(k)/k, attained on the table or approached by the linear tail.
fn clock_rate(g: &RateFunction) -> f64 {
    (1..=g.k_max() + 1).map(|k| g.g(k) / k as f64).fold(g.slope(), f64::max)
}

impl WalkerState {
    pub fn new(config: &Configuration, env: &DriftField, g: &RateFunction) -> Result<Self> {
        check_inputs(config, env)?;
        let n = config.n();
        let mut pos = Vec::with_capacity(config.total as usize);
        for (k, &e) in config.eta.iter().enumerate() {
            pos.extend(std::iter::repeat_n(k as u32, e as usize));
        }
        let (beta, accept) = match g.linear_coefficient() {
            Some(c) => (c, None),
            None => {
                let beta = clock_rate(g);
                let len = pos.len().max(g.k_max()) + 2;
                let acc = (0..len).map(|k| if k == 0 { 0.0 } else { g.g(k) / (beta * k as f64) }).collect();
                (beta, Some(acc))
            }
        };
        if !(beta > 0.0 && beta.is_finite()) {
            return invalid("walker clock rate must be positive");
        }
        let thresh = (0..n).map(|k| (env.right_prob(k) * 18_446_744_073_709_551_616.0) as u64).collect();
        let walk = PeriodicEnvironment::new((0..n).map(|k| env.right_prob(k)).collect())?;
        Ok(Self {
            eta: config.eta.clone(),
            pos,
            thresh,
            beta,
            accept,
            g: g.clone(),
            t: 0.0,
            speed: (n * n) as f64,
            walk,
        })
    }

    /// Clock rate per particle.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    fn fire<R: RngCore>(&mut self, rng: &mut R) -> Option<(usize, usize)> {
        let n = self.eta.len() as u32;
        let x = rng.next_u64();
        let prod = x as u128 * self.pos.len() as u128;
        let i = (prod >> 64) as usize;
        let low = prod as u64;
        let k = self.pos[i];
        if let Some(acc) = &self.accept {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u >= acc[self.eta[k as usize] as usize] {
                return None;
            }
        }
        let dest = if low < self.thresh[k as usize] {
            if k + 1 == n { 0 } else { k + 1 }
        } else if k == 0 {
            n - 1
        } else {
            k - 1
        };
        self.pos[i] = dest;
        self.eta[k as usize] -= 1;
        self.eta[dest as usize] += 1;
        Some((k as usize, dest as usize))
    }

    fn total_rate(&self) -> f64 {
        self.beta * self.pos.len() as f64 * self.speed
    }

    pub fn rate_function(&self) -> &RateFunction {
        &self.g
    }
}

impl Dynamics for WalkerState {
    fn time(&self) -> f64 {
        self.t
    }

    fn eta(&self) -> &[u32] {
        &self.eta
    }

    fn total(&self) -> u64 {
        self.pos.len() as u64
    }

    fn run_until<R: Rng, O: Observer>(&mut self, t_end: f64, rng: &mut R, obs: &mut O) {
        if self.pos.is_empty() {
            if t_end > self.t {
                obs.elapse(t_end - self.t, &self.eta);
                self.t = t_end;
            }
            return;
        }
        let rate = self.total_rate();
        loop {
            let e: f64 = rng.sample(Exp1);
            let dt = e / rate;
            if self.t + dt > t_end {
                if t_end > self.t {
                    obs.elapse(t_end - self.t, &self.eta);
                    self.t = t_end;
                }
                return;
            }
            obs.elapse(dt, &self.eta);
            self.t += dt;
            if let Some((k, dest)) = self.fire(rng) {
                obs.jumped(k, dest, &self.eta);
            }
        }
    }

    /// The attempt rate is constant, so the number of attempts in the
    /// interval is Poisson. For linear g the particles are independent: each
    /// makes a Poisson number of jumps along a walk in the fixed environment
    /// of right-jump probabilities, advanced several steps per draw by the
    /// exact multi-step law.
    fn advance_to<R: Rng>(&mut self, t_end: f64, rng: &mut R) {
        if t_end <= self.t {
            return;
        }
        if !self.pos.is_empty() {
            let n = self.eta.len() as i64;
            let mut stream = Xoshiro256PlusPlus::seed_from_u64(rng.next_u64());
            if self.accept.is_none() {
                let mean = self.beta * self.speed * (t_end - self.t);
                let jumps = Poisson::new(mean).ok();
                for p in self.pos.iter_mut() {
                    let steps = jumps.map(|d| stream.sample(d) as u64).unwrap_or(0);
                    *p = self.walk.advance(*p as usize, steps, &mut stream).rem_euclid(n) as u32;
                }
                self.eta.iter_mut().for_each(|e| *e = 0);
                for &p in &self.pos {
                    self.eta[p as usize] += 1;
                }
            } else {
                let mean = self.total_rate() * (t_end - self.t);
                let count = Poisson::new(mean).map(|p| stream.sample(p) as u64).unwrap_or(0);
                for _ in 0..count {
                    self.fire(&mut stream);
                }
            }
        }
        self.t = t_end;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Particle engine.
    #[default]
    Auto,
    Tree,
    Walkers,
}

/// Either engine behind one type.
#[derive(Debug, Clone)]
pub enum Sim {
    Tree(EventState),
    Walkers(WalkerState),
}

impl Sim {
    pub fn new(config: &Configuration, env: &DriftField, g: &RateFunction, engine: Engine) -> Result<Self> {
        match engine {
            Engine::Tree => Ok(Sim::Tree(EventState::new(config, env, g)?)),
            Engine::Auto | Engine::Walkers => Ok(Sim::Walkers(WalkerState::new(config, env, g)?)),
        }
    }
}

impl Dynamics for Sim {
    fn time(&self) -> f64 {
        match self {
            Sim::Tree(s) => s.time(),
            Sim::Walkers(s) => s.time(),
        }
    }

    fn eta(&self) -> &[u32] {
        match self {
            Sim::Tree(s) => s.eta(),
            Sim::Walkers(s) => s.eta(),
        }
    }

    fn total(&self) -> u64 {
        match self {
            Sim::Tree(s) => s.total(),
            Sim::Walkers(s) => s.total(),
        }
    }

    fn run_until<R: Rng, O: Observer>(&mut self, t_end: f64, rng: &mut R, obs: &mut O) {
        match self {
            Sim::Tree(s) => s.run_until(t_end, rng, obs),
            Sim::Walkers(s) => s.run_until(t_end, rng, obs),
        }
    }

    fn advance_to<R: Rng>(&mut self, t_end: f64, rng: &mut R) {
        match self {
            Sim::Tree(s) => s.advance_to(t_end, rng),
            Sim::Walkers(s) => s.advance_to(t_end, rng),
        }
    }
}

pub fn simulate<R: Rng>(
    eta0: &Configuration,
    env: &DriftField,
    g: &RateFunction,
    t_end: f64,
    snapshots: &[f64],
    rng: &mut R,
) -> Result<Vec<Configuration>> {
    simulate_with(Engine::Auto, eta0, env, g, t_end, snapshots, rng)
}

/// Configurations at each snapshot time (or only at `t_end` when the list is
/// empty).
pub fn simulate_with<R: Rng>(
    engine: Engine,
    eta0: &Configuration,
    env: &DriftField,
    g: &RateFunction,
    t_end: f64,
    snapshots: &[f64],
    rng: &mut R,
) -> Result<Vec<Configuration>> {
    if !(t_end >= 0.0) {
        return invalid("t_end must be nonnegative");
    }
    if snapshots.iter().any(|&s| !(0.0..=t_end).contains(&s)) || snapshots.windows(2).any(|w| w[1] < w[0]) {
        return invalid("snapshot times must be sorted and within [0, t_end]");
    }
    let mut sim = Sim::new(eta0, env, g, engine)?;
    let times: Vec<f64> = if snapshots.is_empty() { vec![t_end] } else { snapshots.to_vec() };
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        sim.advance_to(t, rng);
        out.push(sim.configuration());
    }
    Ok(out)
}
