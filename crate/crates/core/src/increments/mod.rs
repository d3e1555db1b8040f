//! Increment operators: integer-order multiple increments and their
//! fractional generalization.

pub mod fractional;
pub mod gm;

pub use fractional::{
    classify_stationarity, frequency_set, gegenbauer, gegenbauer_coefficients, gm_series,
    FMIncrementSpec, FmFactor, FrequencyEntry, FrequencySet, FrequencyReport, SeriesSign,
    StationarityReport,
};
pub use gm::{convolve_exact, expand_operator, inverse_series, to_f64, GMIncrementSpec};
