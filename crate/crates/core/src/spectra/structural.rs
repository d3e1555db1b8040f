use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};
use crate::increments::GMIncrementSpec;
use crate::spectra::density::{combine, hermitian_eigenvalues, CMat, DensityGrid, DensityModel};
use crate::spectra::grid::{FrequencyGrid, MatrixSeries};
use crate::spectra::symbols::{symbols, SymbolGrid};

/// Smallest eigenvalue of `p(lambda)` accepted as invertible.
pub const INVERTIBILITY_FLOOR: f64 = 1e-12;

/// Inverse of a Hermitian positive-definite density value, failing with the
/// node index when it is singular or non-finite.
pub fn invert_density(m: &CMat, node: usize, lambda: f64) -> Result<CMat> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(GmiError::NonFinite { node, lambda });
    }
    if m.nrows() == 1 {
        let v = m[(0, 0)].re;
        if v <= INVERTIBILITY_FLOOR {
            return Err(GmiError::SingularDensity { node, lambda });
        }
        return Ok(CMat::from_element(1, 1, Complex64::new(1.0 / v, 0.0)));
    }
    if hermitian_eigenvalues(m)[0] <= INVERTIBILITY_FLOOR {
        return Err(GmiError::SingularDensity { node, lambda });
    }
    let inv = m.clone().try_inverse().ok_or(GmiError::SingularDensity { node, lambda })?;
    // restore exact Hermitian symmetry lost to rounding
    Ok((&inv + inv.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Inverse of `p` at every node.
pub fn invert_grid(p: &DensityGrid, grid: &FrequencyGrid) -> Result<Vec<CMat>> {
    p.values()
        .iter()
        .enumerate()
        .map(|(j, m)| invert_density(m, j, grid.lambda(j)))
        .collect()
}

/// All lags of the structural function
/// `D(m; mu1, mu2) = (1/2pi) int e^{i lambda m} chi_{mu1} conj(chi_{mu2}) |beta|^{-2} f d lambda`.
pub fn structural_series(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    grid: &FrequencyGrid,
    mu1: &[u32],
    mu2: &[u32],
) -> Result<MatrixSeries> {
    f.check_grid(grid)?;
    let s1 = spec.with_steps(mu1)?;
    let s2 = spec.with_steps(mu2)?;
    let values: Vec<CMat> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let (c1, beta) = symbols(&s1, l);
            let (c2, _) = symbols(&s2, l);
            f.at(j) * (c1 * c2.conj() / beta.norm_sqr())
        })
        .collect();
    Ok(MatrixSeries::new(grid, &values))
}

pub fn structural_function(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    grid: &FrequencyGrid,
    m: i64,
    mu1: &[u32],
    mu2: &[u32],
) -> Result<DMatrix<f64>> {
    Ok(structural_series(spec, f, grid, mu1, mu2)?.at_re(m))
}

/// `(1/2pi) int Tr[|beta|^2 / |chi|^2 p^{-1}] d lambda` with `p = f + |beta|^2 g`.
pub fn minimality_value(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    grid: &FrequencyGrid,
) -> Result<f64> {
    f.check_grid(grid)?;
    let sym = SymbolGrid::new(spec, grid);
    let p = combine(f, g, &sym)?;
    let inv = invert_grid(&p, grid)?;
    let vals: Vec<f64> = inv.iter().enumerate().map(|(j, m)| sym.weight(j) * m.trace().re).collect();
    Ok(grid.mean(&vals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub value: f64,
    pub refined_value: f64,
    /// Both resolutions agree within 5%, i.e. no sign of a divergent integral.
    pub is_minimal: bool,
}

/// Evaluates the minimality integral at `grid` and at twice its resolution.
pub fn minimality_report(
    spec: &GMIncrementSpec,
    f: &DensityModel,
    g: &DensityModel,
    grid: &FrequencyGrid,
) -> Result<MinimalityReport> {
    let value = minimality_value(spec, &f.evaluate(grid, Some(spec))?, &g.evaluate(grid, Some(spec))?, grid)?;
    let fine = grid.refined()?;
    let refined_value =
        minimality_value(spec, &f.evaluate(&fine, Some(spec))?, &g.evaluate(&fine, Some(spec))?, &fine)?;
    let is_minimal = value.is_finite() && (refined_value - value).abs() <= 0.05 * value.abs();
    Ok(MinimalityReport { value, refined_value, is_minimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn first_difference() -> GMIncrementSpec {
        GMIncrementSpec::single(1, 1, 1).unwrap()
    }

    fn beta_weighted(spec: &GMIncrementSpec, grid: &FrequencyGrid, c: f64) -> DensityGrid {
        let sym = SymbolGrid::new(spec, grid);
        DensityGrid::from_scalar(&(0..grid.len()).map(|j| c * sym.beta2(j)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn structural_function_of_ma1_increments() {
        let grid = FrequencyGrid::new(1024).unwrap();
        let spec = first_difference();
        let f = beta_weighted(&spec, &grid, 1.5);
        let sf = |m| structural_function(&spec, &f, &grid, m, &[1], &[1]).unwrap()[(0, 0)];
        assert_abs_diff_eq!(sf(0), 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sf(1), -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sf(-1), -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sf(3), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn minimality_examples() {
        let grid = FrequencyGrid::new(1024).unwrap();
        let spec = first_difference();
        let one = DensityGrid::from_scalar(&vec![1.0; 1024]).unwrap();
        let zero = DensityGrid::zeros(1, 1024);
        let v = minimality_value(&spec, &one, &zero, &grid).unwrap();
        assert!(v > 1.0 && v < PI * PI / 4.0);

        let sym = SymbolGrid::new(&spec, &grid);
        let f = DensityGrid::from_scalar(&(0..1024).map(|j| sym.weight(j)).collect::<Vec<_>>()).unwrap();
        assert_abs_diff_eq!(minimality_value(&spec, &f, &zero, &grid).unwrap(), 1.0, epsilon = 1e-12);

        let err = minimality_value(&spec, &zero, &zero, &grid).unwrap_err();
        assert!(err.to_string().contains("minimality violated (singular density)"));
    }

    #[test]
    fn minimality_report_flags_convergence() {
        let grid = FrequencyGrid::new(1024).unwrap();
        let spec = first_difference();
        let rep = minimality_report(
            &spec,
            &DensityModel::scalar_constant(1.0),
            &DensityModel::scalar_constant(0.5),
            &grid,
        )
        .unwrap();
        assert!(rep.is_minimal);
    }
}
