//! Mean-square optimal interpolation with exactly known densities.

pub mod functional;
pub mod solve;

pub use functional::{
    coeffs_a_mu, lift_periodic, transform_b, v_coeffs, FunctionalSpec, PeriodicFunctionalSpec,
};
pub use solve::{
    fourier_blocks, interpolate, mse_value, solve_system, spectral_characteristic, Characteristic,
    ClassicalProblem, FourierBlocks, Interpolation, InterpolationSolution, MseReport,
    SystemSolution, CONDITION_WARNING, MSE_ROUTE_TOL,
};
