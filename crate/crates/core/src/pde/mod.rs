//! Conservative finite-volume solver for
//!   d_t rho = (1/2) d_xx Phi(rho) - 2 d_x (W'_eps Phi(rho))
//! on the unit torus, with weak-form residuals and the stationary profile.

mod solver;
mod stationary;
mod weak;

pub use solver::{solve_pde, solve_pde_observed, FluxType, PdeConfig, PdeTrajectory};
pub use stationary::{stationary_profile, stationary_shape};
pub use weak::{weak_residual, weak_residual_fields, TestFunction, TrigTest, WeakAccumulator};
