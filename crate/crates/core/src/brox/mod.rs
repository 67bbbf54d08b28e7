//! Sinai random walk, its diffusively rescaled (Seignourel) version and the
//! Brox diffusion X_t = A^{-1}(B_{T^{-1}(t)}) built from scale and speed.

mod diffusion;
mod driver;
mod walk;

pub use diffusion::{brox_sample, brox_sample_with_driver, BroxConfig, BroxEnvironment, BroxSample};
pub use driver::{BrownianDriver, MAX_DEPTH};
pub use walk::{
    seignourel_environment, seignourel_sample, sinai_endpoint, sinai_walk, ConstantSite, LazySinaiEnvironment,
    PeriodicEnvironment, SiteProbabilities,
};
