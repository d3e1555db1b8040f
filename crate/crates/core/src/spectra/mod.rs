//! Frequency-domain objects: the grid, operator symbols, spectral densities,
//! structural functions and the minimality integral.
//!
//! Every integral is normalized as `(1/2pi) int_{-pi}^{pi} . d lambda` and
//! evaluated with the midpoint rule on a [`FrequencyGrid`].

pub mod density;
pub mod grid;
pub mod structural;
pub mod symbols;

pub use density::{
    combine, fm_density, format_float, hermitian_eigenvalues, CMat, DensityGrid, DensityModel,
};
pub use grid::{FourierSeries, FrequencyGrid, MatrixSeries};
pub use structural::{
    invert_density, invert_grid, minimality_report, minimality_value, structural_function,
    structural_series, MinimalityReport,
};
pub use symbols::{symbols, SymbolGrid};
