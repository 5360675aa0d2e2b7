//! Independent references: finite differences, the discrete KL-regularised
//! improvement closed form, entropy quadrature and mode coverage.

pub mod checks;
mod coverage;
mod entropy;
mod fd;
mod pmd;

pub use coverage::{mode_coverage, modes_covered};
pub use entropy::{
    conditional_entropy_bound, gaussian_entropy, gaussian_kl_sigma_grad, gaussian_kl_to_isotropic, marginal_entropy_quadrature,
    neg_log_sigma_grad, one_step_marginal, standard_normal_rule, Mixture1d, HERMITE_NODES, QUADRATURE_TOL,
};
pub use fd::{finite_diff_directional, finite_diff_grad, relative_error};
pub use pmd::{pmd_brute_force, pmd_closed_form, pmd_objective, simplex_grid_min, DiscretePmd};
