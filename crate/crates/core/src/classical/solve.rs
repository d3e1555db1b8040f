use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::functional::{coeffs_a_mu, transform_b, v_coeffs, FunctionalSpec};
use crate::error::{GmiError, Result};
use crate::increments::GMIncrementSpec;
use crate::spectra::{
    combine, format_float, invert_density, CMat, DensityGrid, FrequencyGrid,
    MatrixSeries, SymbolGrid,
};

/// Condition numbers above this are reported as a warning.
pub const CONDITION_WARNING: f64 = 1e12;
/// Relative tolerance between the two MSE routes.
pub const MSE_ROUTE_TOL: f64 = 1e-6;

/// Densities, symbols and `p^{-1}` sampled on a grid: everything the
/// classical formulas need, computed once.
#[derive(Debug, Clone)]
pub struct ClassicalProblem {
    pub spec: GMIncrementSpec,
    pub grid: FrequencyGrid,
    pub f: DensityGrid,
    pub g: DensityGrid,
    pub sym: SymbolGrid,
    pub p_inv: Vec<CMat>,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Row vector times matrix.
fn rowmul(v: &[Complex64], m: &CMat) -> Vec<Complex64> {
    (0..m.ncols()).map(|j| v.iter().enumerate().map(|(i, x)| x * m[(i, j)]).sum()).collect()
}

/// `v M v^*` for a row vector `v`.
fn quad(v: &[Complex64], m: &CMat) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, vi) in v.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            acc += vi * m[(i, j)] * vj.conj();
        }
    }
    acc.re
}

/// `sum_k coeffs[k] e^{i lambda k}` for vector-valued coefficients.
pub(crate) fn series_at(coeffs: &[Vec<f64>], dim: usize, lambda: f64) -> Vec<Complex64> {
    let z = Complex64::from_polar(1.0, lambda);
    let mut acc = vec![Complex64::new(0.0, 0.0); dim];
    for v in coeffs.iter().rev() {
        for (a, x) in acc.iter_mut().zip(v) {
            *a = *a * z + x;
        }
    }
    acc
}

fn stack(vs: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(vs.iter().map(Vec::len).sum(), vs.iter().flatten().copied())
}

fn unstack(v: &DVector<f64>, dim: usize) -> Vec<Vec<f64>> {
    v.as_slice().chunks(dim).map(<[f64]>::to_vec).collect()
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

impl ClassicalProblem {
    pub fn new(spec: &GMIncrementSpec, f: &DensityGrid, g: &DensityGrid, grid: &FrequencyGrid) -> Result<Self> {
        f.check_grid(grid)?;
        g.check_grid(grid)?;
        let sym = SymbolGrid::new(spec, grid);
        let p = combine(f, g, &sym)?;
        let p_inv = p
            .values()
            .par_iter()
            .enumerate()
            .map(|(j, m)| {
                let inv = invert_density(m, j, grid.lambda(j))?;
                let w = sym.weight(j);
                if !w.is_finite() || inv.iter().any(|z| !(z * w).re.is_finite()) {
                    return Err(GmiError::NonFinite { node: j, lambda: grid.lambda(j) });
                }
                Ok(inv)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), grid: grid.clone(), f: f.clone(), g: g.clone(), sym, p_inv })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    fn check_functional(&self, fspec: &FunctionalSpec) -> Result<()> {
        if fspec.dim() != self.dim() {
            return Err(GmiError::DimensionMismatch { expected: self.dim(), got: fspec.dim() });
        }
        Ok(())
    }

    /// Fourier block matrices for horizon `n`.
    ///
    /// * `P[j,k]` : coefficient at `j - k` of `|beta|^2/|chi|^2 p^{-1}`;
    /// * `T[j,m]` : coefficient at `j - m` of `(-1)^{sum d} |beta|^2/|chi|^2 p^{-1} g`,
    ///   the sign matching the orientation of `a_mu`;
    /// * `Q[k,l]` : coefficient at `k - l` of `f p^{-1} g`.
    pub fn blocks(&self, n: usize) -> FourierBlocks {
        let dim = self.dim();
        let ng = self.spec.n_gamma();
        let sign = if self.spec.total_order().is_multiple_of(2) { 1.0 } else { -1.0 };
        let phi_p: Vec<CMat> =
            self.p_inv.iter().enumerate().map(|(j, m)| m * c(self.sym.weight(j))).collect();
        let p = place_blocks(&MatrixSeries::new(&self.grid, &phi_p), n + ng, dim, 1.0);
        let (t, q) = if self.g.is_zero() {
            let k = (n + ng + 1) * dim;
            (DMatrix::zeros(k, k), DMatrix::zeros((n + 1) * dim, (n + 1) * dim))
        } else {
            let phi_t: Vec<CMat> = phi_p.iter().zip(self.g.values()).map(|(m, g)| m * g).collect();
            let phi_q: Vec<CMat> = self
                .f
                .values()
                .iter()
                .zip(&self.p_inv)
                .zip(self.g.values())
                .map(|((f, pi), g)| f * pi * g)
                .collect();
            (
                place_blocks(&MatrixSeries::new(&self.grid, &phi_t), n + ng, dim, sign),
                place_blocks(&MatrixSeries::new(&self.grid, &phi_q), n, dim, 1.0),
            )
        };
        FourierBlocks { dim, horizon: n, n_gamma: ng, t, p, q }
    }

    /// Full solution of the interpolation problem for `fspec`.
    pub fn solve(&self, fspec: &FunctionalSpec) -> Result<Interpolation> {
        self.check_functional(fspec)?;
        let blocks = self.blocks(fspec.horizon());
        let b = transform_b(&self.spec, fspec)?;
        let a_mu = coeffs_a_mu(&self.spec, fspec)?;
        let sys = solve_system(&blocks, &b, &a_mu)?;
        let v = v_coeffs(&self.spec, &b)?;
        let mse = self.mse_routes(fspec, &blocks, &sys)?;
        let parts = self.characteristic_parts(fspec, &b, &sys)?;
        let mut warnings = Vec::new();
        if let Some(w) = &sys.warning {
            warnings.push(w.clone());
        }
        Ok(Interpolation {
            solution: InterpolationSolution {
                dim: self.dim(),
                horizon: fspec.horizon(),
                n_gamma: self.spec.n_gamma(),
                b,
                a_mu,
                c: sys.c.clone(),
                v,
                delta: mse.algebraic,
                mse,
                condition_number: sys.condition_number,
                system_residual: sys.residual,
                warnings,
            },
            characteristic: parts,
        })
    }

    fn mse_routes(&self, fspec: &FunctionalSpec, blocks: &FourierBlocks, sys: &SystemSolution) -> Result<MseReport> {
        let a = stack(fspec.weights());
        let algebraic = sys.rhs.dot(&stack(&sys.c)) + a.dot(&(&blocks.q * &a));
        let spectral = self.spectral_mse(fspec, &sys.c);
        let abs_diff = (algebraic - spectral).abs();
        let scale = algebraic.abs().max(spectral.abs());
        if abs_diff > MSE_ROUTE_TOL * scale {
            return Err(GmiError::Inconsistent(format!(
                "MSE routes disagree: algebraic {algebraic:e}, spectral {spectral:e}"
            )));
        }
        Ok(MseReport { algebraic, spectral, abs_diff })
    }

    /// Two-integral spectral form of the error for coefficients `c`.
    pub fn spectral_mse(&self, fspec: &FunctionalSpec, c_coeffs: &[Vec<f64>]) -> f64 {
        let dim = self.dim();
        let vals: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|j| {
                let lam = self.grid.lambda(j);
                let chi_bar = self.sym.chi[j].conj();
                let beta2 = self.sym.beta2(j);
                let a = series_at(fspec.weights(), dim, lam);
                let cc = series_at(c_coeffs, dim, lam);
                let f = self.f.at(j);
                let g = self.g.at(j);
                let pi = &self.p_inv[j];
                let wv: Vec<Complex64> =
                    rowmul(&scale(&a, chi_bar), g).iter().zip(&cc).map(|(x, y)| x + y).collect();
                let w2: Vec<Complex64> = sub(&rowmul(&scale(&a, chi_bar), f), &scale(&cc, c(beta2)));
                let r1 = rowmul(&wv, pi);
                let r2 = rowmul(&w2, pi);
                self.sym.weight(j) * quad(&r1, f) + quad(&r2, g) / self.sym.chi2(j)
            })
            .collect();
        self.grid.mean(&vals)
    }

    /// `h^T = B^T chi/beta - A^T g conj(beta) p^{-1} - C^T conj(beta)/conj(chi) p^{-1}`,
    /// split as `h1 - h2` with `c = c1 - c2`, `P c1 = [b]_+`, `P c2 = T a_mu`.
    fn characteristic_parts(&self, fspec: &FunctionalSpec, b: &[Vec<f64>], sys: &SystemSolution) -> Result<Characteristic> {
        let dim = self.dim();
        let c1 = &sys.c1;
        let c2: Vec<Vec<f64>> = c1
            .iter()
            .zip(&sys.c)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect();
        let rows: Vec<(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)> = (0..self.grid.len())
            .into_par_iter()
            .map(|j| {
                let lam = self.grid.lambda(j);
                let chi = self.sym.chi[j];
                let beta = self.sym.beta[j];
                let pi = &self.p_inv[j];
                let bb = series_at(b, dim, lam);
                let a = series_at(fspec.weights(), dim, lam);
                let cc = series_at(&sys.c, dim, lam);
                let k1 = series_at(c1, dim, lam);
                let k2 = series_at(&c2, dim, lam);
                let ratio = beta.conj() / chi.conj();
                let lead = scale(&bb, chi / beta);
                let noise = rowmul(&scale(&rowmul(&a, self.g.at(j)), beta.conj()), pi);
                let h = sub(&sub(&lead, &noise), &rowmul(&scale(&cc, ratio), pi));
                let h1 = sub(&lead, &rowmul(&scale(&k1, ratio), pi));
                let h2 = sub(&noise, &rowmul(&scale(&k2, ratio), pi));
                (h, h1, h2)
            })
            .collect();
        let mut h = Vec::with_capacity(rows.len());
        let mut h1 = Vec::with_capacity(rows.len());
        let mut h2 = Vec::with_capacity(rows.len());
        for (x, y, z) in rows {
            h.push(x);
            h1.push(y);
            h2.push(z);
        }
        Ok(Characteristic { dim, h, h1, h2 })
    }

    /// Error of an arbitrary characteristic `h`:
    /// `(1/2pi) int u f u^* + v g v^*` with `u = B^T chi/beta - h^T`, `v = u beta - A^T`.
    /// Nodewise kernels `(K_f, K_g)` of the error of the estimate with
    /// coefficients `c`, so that the error under densities `(f', g')` is
    /// `mean(Tr(K_f f') + Tr(K_g g'))`.
    pub fn kernels(&self, fspec: &FunctionalSpec, c_coeffs: &[Vec<f64>]) -> (Vec<CMat>, Vec<CMat>) {
        let dim = self.dim();
        let outer = |v: &[Complex64], s: f64| -> CMat {
            CMat::from_fn(dim, dim, |r, col| v[r].conj() * v[col] * s)
        };
        (0..self.grid.len())
            .into_par_iter()
            .map(|j| {
                let lam = self.grid.lambda(j);
                let chi_bar = self.sym.chi[j].conj();
                let beta2 = self.sym.beta2(j);
                let a = series_at(fspec.weights(), dim, lam);
                let cc = series_at(c_coeffs, dim, lam);
                let pi = &self.p_inv[j];
                let wv: Vec<Complex64> =
                    rowmul(&scale(&a, chi_bar), self.g.at(j)).iter().zip(&cc).map(|(x, y)| x + y).collect();
                let w2: Vec<Complex64> = sub(&rowmul(&scale(&a, chi_bar), self.f.at(j)), &scale(&cc, c(beta2)));
                (outer(&rowmul(&wv, pi), self.sym.weight(j)), outer(&rowmul(&w2, pi), 1.0 / self.sym.chi2(j)))
            })
            .unzip()
    }

    /// Coefficients `c` of the optimal estimate without the cross-checks
    /// performed by [`ClassicalProblem::solve`].
    pub fn coefficients(&self, fspec: &FunctionalSpec) -> Result<(Vec<Vec<f64>>, f64)> {
        self.check_functional(fspec)?;
        let blocks = self.blocks(fspec.horizon());
        let b = transform_b(&self.spec, fspec)?;
        let a_mu = coeffs_a_mu(&self.spec, fspec)?;
        let sys = solve_system(&blocks, &b, &a_mu)?;
        let a = stack(fspec.weights());
        let delta = sys.rhs.dot(&stack(&sys.c)) + a.dot(&(&blocks.q * &a));
        Ok((sys.c, delta))
    }

    pub fn characteristic_mse(&self, fspec: &FunctionalSpec, h: &[Vec<Complex64>]) -> Result<f64> {
        self.check_functional(fspec)?;
        let dim = self.dim();
        let b = transform_b(&self.spec, fspec)?;
        let vals: Vec<f64> = (0..self.grid.len())
            .map(|j| {
                let lam = self.grid.lambda(j);
                let chi = self.sym.chi[j];
                let beta = self.sym.beta[j];
                let bb = series_at(&b, dim, lam);
                let a = series_at(fspec.weights(), dim, lam);
                let u = sub(&scale(&bb, chi / beta), &h[j]);
                let v = sub(&scale(&u, beta), &a);
                quad(&u, self.f.at(j)) + quad(&v, self.g.at(j))
            })
            .collect();
        Ok(self.grid.mean(&vals))
    }

    /// Largest modulus among the Fourier coefficients `j = 0..=N + n_gamma` of
    /// `B^T - A^T g |beta|^2/chi p^{-1} - C^T |beta|^2/|chi|^2 p^{-1}`, which the
    /// optimal `c` annihilates.
    pub fn orthogonality_residual(&self, fspec: &FunctionalSpec, c_coeffs: &[Vec<f64>]) -> Result<f64> {
        self.check_functional(fspec)?;
        let dim = self.dim();
        let b = transform_b(&self.spec, fspec)?;
        let rows: Vec<Vec<Complex64>> = (0..self.grid.len())
            .map(|j| {
                let lam = self.grid.lambda(j);
                let pi = &self.p_inv[j];
                let beta2 = self.sym.beta2(j);
                let bb = series_at(&b, dim, lam);
                let a = series_at(fspec.weights(), dim, lam);
                let cc = series_at(c_coeffs, dim, lam);
                let noise = rowmul(&scale(&rowmul(&a, self.g.at(j)), c(beta2) / self.sym.chi[j]), pi);
                let signal = rowmul(&scale(&cc, c(self.sym.weight(j))), pi);
                sub(&sub(&bb, &noise), &signal)
            })
            .collect();
        let k = fspec.horizon() + self.spec.n_gamma();
        let mut worst = 0.0f64;
        for comp in 0..dim {
            let column: Vec<Complex64> = rows.iter().map(|r| r[comp]).collect();
            let fs = self.grid.fourier(&column);
            for jj in 0..=k as i64 {
                worst = worst.max(fs.at(-jj).norm());
            }
        }
        Ok(worst)
    }
}

fn place_blocks(series: &MatrixSeries, k: usize, dim: usize, sign: f64) -> DMatrix<f64> {
    let size = (k + 1) * dim;
    let mut out = DMatrix::zeros(size, size);
    let lags: Vec<DMatrix<f64>> = (-(k as i64)..=k as i64).map(|m| series.at_re(m) * sign).collect();
    for j in 0..=k {
        for l in 0..=k {
            let blk = &lags[j + k - l];
            out.view_mut((j * dim, l * dim), (dim, dim)).copy_from(blk);
        }
    }
    out
}

/// Stacked block matrices; block `(j, k)` occupies rows `j T..(j+1) T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBlocks {
    pub dim: usize,
    pub horizon: usize,
    pub n_gamma: usize,
    pub t: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl FourierBlocks {
    pub fn block(m: &DMatrix<f64>, dim: usize, j: usize, k: usize) -> DMatrix<f64> {
        m.view((j * dim, k * dim), (dim, dim)).into_owned()
    }
}

pub fn fourier_blocks(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    n: usize,
    grid: &FrequencyGrid,
) -> Result<FourierBlocks> {
    Ok(ClassicalProblem::new(spec, f, g, grid)?.blocks(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSolution {
    pub c: Vec<Vec<f64>>,
    /// `P^{-1} [b]_+`, the part of `c` driven by the signal weights.
    pub c1: Vec<Vec<f64>>,
    pub rhs: DVector<f64>,
    pub condition_number: f64,
    pub residual: f64,
    pub warning: Option<String>,
}

fn symmetric_condition(p: &DMatrix<f64>) -> f64 {
    let sym = (p + p.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `P c = [b]_{+n_gamma} - T a_mu`.
pub fn solve_system(blocks: &FourierBlocks, b: &[Vec<f64>], a_mu: &[Vec<f64>]) -> Result<SystemSolution> {
    let dim = blocks.dim;
    let size = blocks.p.nrows();
    let mut bplus = vec![0.0; size];
    let bs = stack(b);
    if bs.len() > size || stack(a_mu).len() != size {
        return Err(GmiError::DimensionMismatch { expected: size, got: stack(a_mu).len() });
    }
    bplus[..bs.len()].copy_from_slice(bs.as_slice());
    let bplus = DVector::from_vec(bplus);
    let rhs = &bplus - &blocks.t * stack(a_mu);
    let condition_number = symmetric_condition(&blocks.p);
    if !condition_number.is_finite() {
        return Err(GmiError::SingularSystem);
    }
    let solve = |r: &DVector<f64>| -> Result<DVector<f64>> {
        let x = match blocks.p.clone().cholesky() {
            Some(ch) => ch.solve(r),
            None => blocks.p.clone().lu().solve(r).ok_or(GmiError::SingularSystem)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GmiError::SingularSystem);
        }
        Ok(x)
    };
    let cvec = solve(&rhs)?;
    let c1 = solve(&bplus)?;
    let residual = (&blocks.p * &cvec - &rhs).norm();
    let warning = (condition_number > CONDITION_WARNING)
        .then(|| format!("ill-conditioned system: condition number {condition_number:e}"));
    Ok(SystemSolution {
        c: unstack(&cvec, dim),
        c1: unstack(&c1, dim),
        rhs,
        condition_number,
        residual,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub algebraic: f64,
    pub spectral: f64,
    pub abs_diff: f64,
}

/// Everything reported for one interpolation problem except the
/// characteristic, which is exported separately on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSolution {
    pub dim: usize,
    pub horizon: usize,
    pub n_gamma: usize,
    pub b: Vec<Vec<f64>>,
    pub a_mu: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    /// Initial-value weights for `k = -n_gamma..=-1`.
    pub v: Vec<Vec<f64>>,
    pub delta: f64,
    pub mse: MseReport,
    pub condition_number: f64,
    pub system_residual: f64,
    pub warnings: Vec<String>,
}

/// Spectral characteristic `h = h1 - h2` sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub dim: usize,
    pub h: Vec<Vec<Complex64>>,
    pub h1: Vec<Vec<Complex64>>,
    pub h2: Vec<Vec<Complex64>>,
}

impl Characteristic {
    pub fn write_csv<W: std::io::Write>(&self, grid: &FrequencyGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["lambda".to_string()];
        for name in ["h", "h1", "h2"] {
            for k in 0..self.dim {
                header.push(format!("{name}_re_{k}"));
                header.push(format!("{name}_im_{k}"));
            }
        }
        w.write_record(&header)?;
        for j in 0..self.h.len() {
            let mut row = vec![format_float(grid.lambda(j))];
            for part in [&self.h, &self.h1, &self.h2] {
                for z in &part[j] {
                    row.push(format_float(z.re));
                    row.push(format_float(z.im));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub solution: InterpolationSolution,
    pub characteristic: Characteristic,
}

pub fn interpolate(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    fspec: &FunctionalSpec,
    grid: &FrequencyGrid,
) -> Result<Interpolation> {
    ClassicalProblem::new(spec, f, g, grid)?.solve(fspec)
}

/// Both MSE routes for given coefficients `c`.
pub fn mse_value(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    fspec: &FunctionalSpec,
    c_coeffs: &[Vec<f64>],
    grid: &FrequencyGrid,
) -> Result<MseReport> {
    let prob = ClassicalProblem::new(spec, f, g, grid)?;
    prob.check_functional(fspec)?;
    let blocks = prob.blocks(fspec.horizon());
    let b = transform_b(spec, fspec)?;
    let a_mu = coeffs_a_mu(spec, fspec)?;
    let mut sys = solve_system(&blocks, &b, &a_mu)?;
    sys.c = c_coeffs.to_vec();
    prob.mse_routes(fspec, &blocks, &sys)
}

pub fn spectral_characteristic(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    c_coeffs: &[Vec<f64>],
    fspec: &FunctionalSpec,
    grid: &FrequencyGrid,
) -> Result<Characteristic> {
    let prob = ClassicalProblem::new(spec, f, g, grid)?;
    prob.check_functional(fspec)?;
    let blocks = prob.blocks(fspec.horizon());
    let b = transform_b(spec, fspec)?;
    let a_mu = coeffs_a_mu(spec, fspec)?;
    let mut sys = solve_system(&blocks, &b, &a_mu)?;
    sys.c = c_coeffs.to_vec();
    prob.characteristic_parts(fspec, &b, &sys)
}
