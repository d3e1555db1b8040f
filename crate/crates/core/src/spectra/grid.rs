use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{GmiError, Result};

/// Symmetric midpoint grid `lambda_j = -pi + (j + 1/2) 2 pi / n` on `[-pi, pi)`.
///
/// Node `j` pairs with node `n - 1 - j`; the pair is stored as exact negatives
/// so that real-sequence symmetry survives rounding.
#[derive(Clone)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FrequencyGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrequencyGrid").field("n_grid", &self.nodes.len()).finish()
    }
}

pub const MIN_GRID: usize = 1 << 10;

impl FrequencyGrid {
    pub fn new(n_grid: usize) -> Result<Self> {
        if n_grid < MIN_GRID || !n_grid.is_power_of_two() {
            return Err(GmiError::InvalidInput(format!(
                "grid size must be a power of two >= {MIN_GRID}, got {n_grid}"
            )));
        }
        let h = 2.0 * PI / n_grid as f64;
        let mut nodes = vec![0.0; n_grid];
        for j in 0..n_grid / 2 {
            let lam = -PI + (j as f64 + 0.5) * h;
            nodes[j] = lam;
            nodes[n_grid - 1 - j] = -lam;
        }
        let fft = FftPlanner::new().plan_fft_inverse(n_grid);
        Ok(Self { nodes, fft })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lambda(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Index of the node at `-lambda_j`.
    pub fn pair(&self, j: usize) -> usize {
        self.nodes.len() - 1 - j
    }

    /// Same grid at twice the resolution.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.len())
    }

    /// Midpoint rule for `(1/2pi) int phi(lambda) d lambda`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// All Fourier coefficients `(1/2pi) int e^{i lambda m} phi d lambda`
    /// by the midpoint rule, via one inverse FFT.
    pub fn fourier(&self, values: &[Complex64]) -> FourierSeries {
        let n = self.len();
        assert_eq!(values.len(), n, "sample count must match the grid");
        let mut buf = values.to_vec();
        self.fft.process(&mut buf);
        // e^{i lambda_j m} = e^{-i pi m} e^{i pi m / n} e^{2 pi i j m / n}
        let scale = 1.0 / n as f64;
        for (m, v) in buf.iter_mut().enumerate() {
            let phase = -PI * m as f64 + PI * m as f64 / n as f64;
            *v *= Complex64::from_polar(scale, phase);
        }
        FourierSeries { coeffs: buf }
    }
}

/// Periodic table of midpoint Fourier coefficients, indexed by any integer lag.
#[derive(Debug, Clone)]
pub struct FourierSeries {
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    /// Coefficient at lag `m`; valid for `|m| < n/2`, beyond which the
    /// midpoint rule aliases.
    pub fn at(&self, m: i64) -> Complex64 {
        let n = self.coeffs.len() as i64;
        let r = m.rem_euclid(n) as usize;
        // shifting m by k n multiplies e^{-i pi m} e^{i pi m / n} by (-1)^k
        let shift = (m - r as i64) / n;
        let mut v = self.coeffs[r];
        if shift.rem_euclid(2) == 1 {
            v = -v;
        }
        v
    }
}

/// Entrywise Fourier tables of a matrix-valued function on the grid.
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    dim: usize,
    entries: Vec<FourierSeries>,
}

impl MatrixSeries {
    pub fn new(grid: &FrequencyGrid, values: &[DMatrix<Complex64>]) -> Self {
        let dim = values.first().map_or(0, |m| m.nrows());
        let mut entries = Vec::with_capacity(dim * dim);
        let mut column = vec![Complex64::new(0.0, 0.0); values.len()];
        for r in 0..dim {
            for c in 0..dim {
                for (slot, m) in column.iter_mut().zip(values) {
                    *slot = m[(r, c)];
                }
                entries.push(grid.fourier(&column));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, m: i64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.entries[r * self.dim + c].at(m))
    }

    /// Real part of the coefficient; exact for functions with the
    /// real-sequence symmetry `phi(-lambda) = conj(phi(lambda))`.
    pub fn at_re(&self, m: i64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.entries[r * self.dim + c].at(m).re)
    }
}
