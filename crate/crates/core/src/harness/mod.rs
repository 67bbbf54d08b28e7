//! Experiment orchestration: hydrodynamic comparison against the PDE,
//! martingale and replacement diagnostics, and the weak-topology distance.

mod config;
mod dual;
mod hdl;
mod martingale;
mod replacement;

pub use config::{ExperimentConfig, InitProfile, TestFn};
pub use dual::{dual_distance, mode_pairing, Measure, DUAL_MODES};
pub use hdl::{hdl_experiment, HdlCell, HdlReport};
pub use martingale::{martingale_diag, martingale_replica, MartingaleReport, MartingaleRow};
pub use replacement::{replacement_diag, replacement_replica, ReplacementReport, ReplacementRow};

use crate::rng::FastRng;

/// Generator for replica `replica` of a run at size `n` with purpose `tag`.
pub(crate) fn replica_rng(seed: u64, tag: u64, n: usize, replica: usize) -> FastRng {
    crate::rng::fast_stream(seed, crate::rng::hash(&[tag, n as u64, replica as u64]))
}
