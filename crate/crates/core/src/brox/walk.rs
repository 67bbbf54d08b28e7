use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::Binomial;

use crate::environment::{DisorderLaw, DisorderSequence};
use crate::error::{invalid, Error, Result};

/// Site environment u_i = P(step to the right from i), i in Z.
pub trait SiteProbabilities {
    fn u(&mut self, i: i64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantSite(pub f64);

impl SiteProbabilities for ConstantSite {
    fn u(&mut self, _i: i64) -> f64 {
        self.0
    }
}

/// u_i = 1/2 + scale * r_i with i.i.d. r_i, generated on first visit and
/// cached. Values are a pure function of (seed, i).
#[derive(Debug, Clone)]
pub struct LazySinaiEnvironment {
    seed: u64,
    law: DisorderLaw,
    scale: f64,
    nonneg: Vec<f64>,
    neg: Vec<f64>,
}

impl LazySinaiEnvironment {
    pub fn new(seed: u64, law: DisorderLaw, scale: f64) -> Result<Self> {
        law.validate()?;
        let b = law.bound() * scale.abs();
        if !(b < 0.5) {
            return invalid(format!("scale {scale} puts u outside (0,1)"));
        }
        Ok(Self { seed, law, scale, nonneg: Vec::new(), neg: Vec::new() })
    }

    /// E[log((1-u)/u)^2], the variance driving Sinai localisation.
    pub fn log_ratio_variance(&self, samples: usize) -> f64 {
        (0..samples as i64)
            .map(|i| {
                let u = 0.5 + self.scale * self.law.value_at(self.seed ^ 0xABCD, i);
                ((1.0 - u) / u).ln().powi(2)
            })
            .sum::<f64>()
            / samples as f64
    }
}

impl SiteProbabilities for LazySinaiEnvironment {
    fn u(&mut self, i: i64) -> f64 {
        let (store, idx) = if i >= 0 { (&mut self.nonneg, i as usize) } else { (&mut self.neg, (-i - 1) as usize) };
        while store.len() <= idx {
            let j = if i >= 0 { store.len() as i64 } else { -(store.len() as i64) - 1 };
            store.push(0.5 + self.scale * self.law.value_at(self.seed, j));
        }
        store[idx]
    }
}

const LANES: usize = 8;
/// Steps taken per table lookup.
const BLOCK: usize = 8;

/// N-periodic environment u_i = 1/2 + r_i / sqrt(N), r one-based periodic.
#[derive(Debug, Clone)]
pub struct PeriodicEnvironment {
    /// u at i mod N.
    pub u: Vec<f64>,
    thresh: Vec<u32>,
    /// Per site, the law of the displacement after BLOCK steps as cumulative
    /// thresholds on 32-bit draws: the walk moves by 2 j - BLOCK where j
    /// counts the thresholds not exceeding the draw.
    block: Vec<[u32; BLOCK]>,
}

fn to_u32(p: f64) -> u32 {
    (p * 4_294_967_296.0).round().clamp(0.0, u32::MAX as f64) as u32
}

impl PeriodicEnvironment {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = u.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
            return Err(Error::EnvironmentRange { site: i as i64, u: v });
        }
        let n = u.len();
        let thresh = u.iter().map(|&v| to_u32(v)).collect();
        let block = if n > BLOCK {
            (0..n)
                .map(|p| {
                    // law[d + BLOCK] = P(displacement d) after the steps so far.
                    let mut law = [0.0f64; 2 * BLOCK + 1];
                    law[BLOCK] = 1.0;
                    for _ in 0..BLOCK {
                        let mut next = [0.0f64; 2 * BLOCK + 1];
                        for (i, &m) in law.iter().enumerate() {
                            if m == 0.0 {
                                continue;
                            }
                            let site = (p as i64 + i as i64 - BLOCK as i64).rem_euclid(n as i64) as usize;
                            next[i + 1] += m * u[site];
                            next[i - 1] += m * (1.0 - u[site]);
                        }
                        law = next;
                    }
                    let mut cum = 0.0;
                    std::array::from_fn(|j| {
                        cum += law[2 * j];
                        to_u32(cum)
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self { u, thresh, block })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    fn is_symmetric(&self) -> bool {
        self.u.iter().all(|&v| v == 0.5)
    }

    /// U after `steps` steps from 0. A symmetric environment is sampled
    /// exactly through the binomial law of the number of right steps.
    /// Otherwise the walk is advanced BLOCK steps at a time with the exact
    /// multi-step law of its current site, each move consuming 32 bits of a
    /// xoshiro stream seeded by `rng`.
    pub fn endpoint<R: Rng>(&self, steps: u64, rng: &mut R) -> i64 {
        self.endpoints(steps, 1, rng)[0]
    }

    /// `count` independent endpoints. Walker i is seeded by the i-th draw
    /// from `rng`, so the result does not depend on how walkers are batched.
    /// Walkers advance in groups of `LANES` so that the dependent table
    /// lookups of different walkers overlap.
    pub fn endpoints<R: Rng>(&self, steps: u64, count: usize, rng: &mut R) -> Vec<i64> {
        if self.is_symmetric() {
            let b = Binomial::new(steps, 0.5).expect("valid binomial");
            return (0..count)
                .map(|_| {
                    let mut r = Xoshiro256PlusPlus::seed_from_u64(rng.next_u64());
                    2 * r.sample(b) as i64 - steps as i64
                })
                .collect();
        }
        let seeds: Vec<u64> = (0..count).map(|_| rng.next_u64()).collect();
        let mut out = Vec::with_capacity(count);
        for chunk in seeds.chunks(LANES) {
            if chunk.len() == LANES {
                let mut gens: [Xoshiro256PlusPlus; LANES] =
                    std::array::from_fn(|i| Xoshiro256PlusPlus::seed_from_u64(chunk[i]));
                out.extend_from_slice(&self.run_lanes(steps, &mut gens, [0; LANES]));
            } else {
                for &seed in chunk {
                    let mut one = [Xoshiro256PlusPlus::seed_from_u64(seed)];
                    out.push(self.run_lanes(steps, &mut one, [0])[0]);
                }
            }
        }
        out
    }

    /// Unwrapped position after `steps` steps from `start`.
    pub fn advance(&self, start: usize, steps: u64, stream: &mut Xoshiro256PlusPlus) -> i64 {
        self.run_lanes(steps, std::slice::from_mut(stream).try_into().expect("one lane"), [start as i64])[0]
    }

    fn run_lanes<const L: usize>(&self, steps: u64, gens: &mut [Xoshiro256PlusPlus; L], start: [i64; L]) -> [i64; L] {
        let n = self.u.len() as i64;
        let mut p: [i64; L] = std::array::from_fn(|i| start[i].rem_euclid(n));
        let mut wind: [i64; L] = std::array::from_fn(|i| start[i].div_euclid(n));
        #[inline(always)]
        fn wrap(n: i64, p: &mut i64, wind: &mut i64) {
            let up = (*p >= n) as i64;
            let down = (*p < 0) as i64;
            *wind += up - down;
            *p += n * (down - up);
        }
        let (blocks, rest) = if self.block.is_empty() { (0, steps) } else { (steps / BLOCK as u64, steps % BLOCK as u64) };
        let table = &self.block[..];
        for _ in 0..blocks / 2 {
            for i in 0..L {
                let x = gens[i].next_u64();
                for bits in [x as u32, (x >> 32) as u32] {
                    let c = &table[p[i] as usize];
                    let j: i64 = c.iter().map(|&t| (bits >= t) as i64).sum();
                    p[i] += 2 * j - BLOCK as i64;
                    wrap(n, &mut p[i], &mut wind[i]);
                }
            }
        }
        let single = rest + if blocks % 2 == 1 { BLOCK as u64 } else { 0 };
        let th = &self.thresh[..];
        for _ in 0..single {
            for i in 0..L {
                let bits = (gens[i].next_u64() >> 32) as u32;
                p[i] += 2 * ((bits < th[p[i] as usize]) as i64) - 1;
                wrap(n, &mut p[i], &mut wind[i]);
            }
        }
        std::array::from_fn(|i| wind[i] * n + p[i])
    }

    /// N^{-1} U_{floor(N^2 t)}.
    pub fn sample<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let n = self.n() as f64;
        let steps = (n * n * t).floor() as u64;
        self.endpoint(steps, rng) as f64 / n
    }

    /// `count` independent draws of N^{-1} U_{floor(N^2 t)}.
    pub fn samples<R: Rng>(&self, t: f64, count: usize, rng: &mut R) -> Vec<f64> {
        let n = self.n() as f64;
        let steps = (n * n * t).floor() as u64;
        self.endpoints(steps, count, rng).into_iter().map(|u| u as f64 / n).collect()
    }
}

impl SiteProbabilities for PeriodicEnvironment {
    fn u(&mut self, i: i64) -> f64 {
        self.u[i.rem_euclid(self.u.len() as i64) as usize]
    }
}

pub fn seignourel_environment(d: &DisorderSequence, n: usize) -> Result<PeriodicEnvironment> {
    if d.values.len() < n || n == 0 {
        return Err(Error::InsufficientDisorder { needed: n, got: d.values.len() });
    }
    let s = (n as f64).sqrt();
    // Site p (mod N) carries r_p, and site 0 is site N.
    let u = (0..n).map(|p| 0.5 + d.values[(p + n - 1) % n] / s).collect();
    PeriodicEnvironment::new(u)
}

/// N^{-1} U^N_{floor(N^2 t)} in the environment u_i = 1/2 + r_i/sqrt(N).
pub fn seignourel_sample<R: Rng>(d: &DisorderSequence, n: usize, t: f64, rng: &mut R) -> Result<f64> {
    Ok(seignourel_environment(d, n)?.sample(t, rng))
}

pub fn sinai_walk<E: SiteProbabilities, R: Rng>(env: &mut E, steps: usize, rng: &mut R) -> Vec<i64> {
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = 0i64;
    path.push(x);
    for _ in 0..steps {
        x += if rng.random::<f64>() < env.u(x) { 1 } else { -1 };
        path.push(x);
    }
    path
}

pub fn sinai_endpoint<E: SiteProbabilities, R: Rng>(env: &mut E, steps: usize, rng: &mut R) -> i64 {
    let mut x = 0i64;
    for _ in 0..steps {
        x += if rng.random::<f64>() < env.u(x) { 1 } else { -1 };
    }
    x
}
