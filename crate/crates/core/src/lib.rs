pub mod classical;
pub mod error;
pub mod increments;
pub mod minimax;
pub mod oracle;
pub mod spectra;

pub use classical::*;
pub use error::{ErrorKind, GmiError, Result};
pub use increments::*;
pub use spectra::*;
