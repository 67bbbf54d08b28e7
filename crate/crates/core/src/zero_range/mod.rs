//! Exact continuous-time simulation of the zero-range process on the
//! discrete torus, with empirical observables and tagged-particle tracking.
//!
//! Time is macroscopic throughout: the microscopic clock runs N^2 faster.

mod dynamics;
mod observables;
mod rate;
mod tagged;
mod tree;

pub use dynamics::{
    simulate, simulate_with, Dynamics, Engine, Event, EventState, NoObserver, Observer, Sim, WalkerState,
};
pub use observables::{block_average, block_averages, smooth_empirical};
pub use rate::{certify_rate_function, RateFunction};
pub use tagged::{track_tagged, TaggedPath};
pub use tree::SumTree;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub eta: Vec<u32>,
    pub total: u64,
}

impl Configuration {
    pub fn new(eta: Vec<u32>) -> Result<Self> {
        if eta.is_empty() {
            return invalid("configuration needs at least one site");
        }
        let total = eta.iter().map(|&v| v as u64).sum();
        Ok(Self { eta, total })
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    /// Pairing <G, pi^N> = (1/N) sum_k G(k/N) eta(k).
    pub fn pair(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.n() as f64;
        self.eta.iter().enumerate().map(|(k, &e)| g(k as f64 / n) * e as f64).sum::<f64>() / n
    }
}
