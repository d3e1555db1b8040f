//! Least-favorable densities in admissible classes and the saddle-point checks
//! of the resulting robust estimate.

mod class;
mod solve;

pub use class::{DensityClassSpec, MembershipReport, NoiseClass, ResolvedClass, SignalClass};
pub use solve::{
    extremal_residuals, mse_functional, saddle_check, solve_minimax, EquationResidual, IterationRecord,
    MinimaxOptions, MinimaxResult, Multipliers, ResidualReport, SaddleReport,
};
