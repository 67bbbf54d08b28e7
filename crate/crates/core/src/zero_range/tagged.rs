use rand::Rng;

use super::{Dynamics, EventState};
use crate::error::{invalid, Result};

/// Path of a tagged particle, recorded at the times it moves.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPath {
    pub n: usize,
    pub times: Vec<f64>,
    /// Unwrapped lattice position; x^N(t) = position / N.
    pub positions: Vec<i64>,
    /// For every departure from the tagged particle's site: the occupancy
    /// before the jump and whether the tagged particle was the one to leave.
    pub departures: Vec<(u32, bool)>,
}

impl TaggedPath {
    pub fn x(&self) -> Vec<f64> {
        self.positions.iter().map(|&p| p as f64 / self.n as f64).collect()
    }

    pub fn increments(&self) -> Vec<i64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Runs the dynamics until `t_end`, following particle number `particle`
/// (particles numbered site by site from site 0). When its site fires with
/// m residents, the tagged particle is the one leaving with probability 1/m.
pub fn track_tagged<R: Rng>(state: &mut EventState, particle: u64, t_end: f64, rng: &mut R) -> Result<TaggedPath> {
    if particle >= state.total() {
        return invalid(format!("particle id {particle} >= total {}", state.total()));
    }
    let n = state.n();
    let mut acc = 0u64;
    let mut site = 0usize;
    for (k, &e) in state.eta().iter().enumerate() {
        acc += e as u64;
        if particle < acc {
            site = k;
            break;
        }
    }
    let mut pos = site as i64;
    let mut path = TaggedPath { n, times: vec![state.time()], positions: vec![pos], departures: Vec::new() };
    loop {
        let dt = state.waiting_time(rng);
        if state.time() + dt > t_end {
            state.set_time(t_end.max(state.time()));
            break;
        }
        state.set_time(state.time() + dt);
        let (k, _dest, dir) = state.fire(rng);
        if k == site {
            let m = state.eta()[k] + 1;
            let moved = m == 1 || rng.random::<f64>() * (m as f64) < 1.0;
            path.departures.push((m, moved));
            if moved {
                pos += dir as i64;
                site = pos.rem_euclid(n as i64) as usize;
                path.times.push(state.time());
                path.positions.push(pos);
            }
        }
    }
    Ok(path)
}
