//! Invariant measures of the zero-range dynamics: single-site laws, the
//! inhomogeneous fugacity profile, product and local-equilibrium samplers,
//! canonical expectations and localized block generators.

mod blocks;
mod canonical;
mod fugacity;
mod full;
mod product;
mod single_site;

pub use blocks::{build_block_generator, spectral_gap, spectral_gap_with, BlockGenerator, BlockSpec, GapMethod};
pub use canonical::{canonical_expectation, CanonicalBlock, Observable};
pub use fugacity::{solve_fugacities, solve_fugacities_anchored, FugacityProfile};
pub use full::{canonical_from_profile, compositions, full_generator, stationary_vector, FullGenerator};
pub use product::{le_fugacities, relative_entropy_le, sample_product, ProductSampler};
pub use single_site::{moments, partition_z, phi_of_rho, single_site_law, PhiTable, SingleSiteLaw};
