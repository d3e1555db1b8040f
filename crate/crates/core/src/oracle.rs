//! Brute-force reference: finite-window Hilbert-space projection built from
//! covariances computed by quadrature, and spectral simulation of sample paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classical::{transform_b, FunctionalSpec};
use crate::error::{GmiError, Result};
use crate::increments::GMIncrementSpec;
use crate::spectra::{hermitian_eigenvalues, CMat, DensityGrid, FrequencyGrid, MatrixSeries, SymbolGrid};

pub const PINV_CUTOFF: f64 = 1e-10;
pub const GRAM_PSD_TOL: f64 = 1e-8;
pub const DEFAULT_SCHEDULE: [usize; 6] = [1, 5, 10, 50, 100, 200];

/// Observed increment times `[-L, -1]` and `[N + n_gamma + 1, N + n_gamma + L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub half_length: usize,
    pub horizon: usize,
    pub n_gamma: usize,
}

impl ObservationWindow {
    pub fn new(half_length: usize, horizon: usize, n_gamma: usize) -> Self {
        Self { half_length, horizon, n_gamma }
    }

    pub fn times(&self) -> Vec<i64> {
        let l = self.half_length as i64;
        let gap = (self.horizon + self.n_gamma) as i64;
        (-l..=-1).chain(gap + 1..=gap + l).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub cross: DVector<f64>,
    pub target_var: f64,
}

/// Covariance tables shared by every window size.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    dim: usize,
    /// Lags of `|chi|^2/|beta|^2 p`, the covariance of the observed increments.
    increments: MatrixSeries,
    /// Lags of `chi g`, the cross-covariance between increments and noise.
    noise_cross: MatrixSeries,
    b: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    target_var: f64,
    n_gamma: usize,
}

fn quad(v: &[Complex64], m: &CMat) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, vi) in v.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            acc += vi * m[(i, j)] * vj.conj();
        }
    }
    acc.re
}

impl CovarianceModel {
    pub fn new(
        spec: &GMIncrementSpec,
        f: &DensityGrid,
        g: &DensityGrid,
        fspec: &FunctionalSpec,
        grid: &FrequencyGrid,
    ) -> Result<Self> {
        f.check_grid(grid)?;
        g.check_grid(grid)?;
        let dim = f.dim();
        if g.dim() != dim || fspec.dim() != dim {
            return Err(GmiError::DimensionMismatch { expected: dim, got: fspec.dim() });
        }
        let sym = SymbolGrid::new(spec, grid);
        let inc: Vec<CMat> = (0..grid.len())
            .map(|j| {
                let p = f.at(j) + g.at(j) * Complex64::new(sym.beta2(j), 0.0);
                p * Complex64::new(sym.chi2(j) / sym.beta2(j), 0.0)
            })
            .collect();
        let cross: Vec<CMat> = (0..grid.len()).map(|j| g.at(j) * sym.chi[j]).collect();
        let b = transform_b(spec, fspec)?;
        let a = fspec.weights().to_vec();

        // Var(B chi zeta - A eta), written in the signal/noise split
        let mut vals = Vec::with_capacity(grid.len());
        for (j, &lam) in grid.nodes().iter().enumerate() {
            let z = Complex64::from_polar(1.0, lam);
            let poly = |coeffs: &[Vec<f64>]| -> Vec<Complex64> {
                let mut acc = vec![Complex64::new(0.0, 0.0); dim];
                for v in coeffs.iter().rev() {
                    for (s, x) in acc.iter_mut().zip(v) {
                        *s = *s * z + x;
                    }
                }
                acc
            };
            let bb = poly(&b);
            let aa = poly(&a);
            let chi = sym.chi[j];
            let noise_row: Vec<Complex64> = bb.iter().zip(&aa).map(|(x, y)| x * chi - y).collect();
            let signal = quad(&bb, f.at(j)) * sym.chi2(j) / sym.beta2(j);
            vals.push(signal + quad(&noise_row, g.at(j)));
        }
        let target_var = grid.mean(&vals);
        Ok(Self {
            dim,
            increments: MatrixSeries::new(grid, &inc),
            noise_cross: MatrixSeries::new(grid, &cross),
            b,
            a,
            target_var,
            n_gamma: spec.n_gamma(),
        })
    }

    /// Covariance `E[chi zeta(t+n) chi zeta(t)^T]`.
    pub fn increment_covariance(&self, n: i64) -> DMatrix<f64> {
        self.increments.at_re(n)
    }

    pub fn target_var(&self) -> f64 {
        self.target_var
    }

    pub fn gram_system(&self, window: &ObservationWindow) -> Result<GramSystem> {
        let times = window.times();
        let d = self.dim;
        let size = times.len() * d;
        let max_lag = 2 * (window.half_length + window.horizon + self.n_gamma) as i64 + 1;
        let lags: Vec<DMatrix<f64>> =
            (-max_lag..=max_lag).map(|m| self.increments.at_re(m)).collect();
        let lag = |m: i64| &lags[(m + max_lag) as usize];
        let mut gram = DMatrix::zeros(size, size);
        for (r, &tr) in times.iter().enumerate() {
            for (c, &tc) in times.iter().enumerate() {
                gram.view_mut((r * d, c * d), (d, d)).copy_from(lag(tr - tc));
            }
        }
        let mut cross = DVector::zeros(size);
        for (r, &t) in times.iter().enumerate() {
            let mut acc = DVector::zeros(d);
            for (k, bk) in self.b.iter().enumerate() {
                acc += lag(t - k as i64) * DVector::from_column_slice(bk);
            }
            for (m, am) in self.a.iter().enumerate() {
                acc -= self.noise_cross.at_re(t - m as i64) * DVector::from_column_slice(am);
            }
            cross.rows_mut(r * d, d).copy_from(&acc);
        }
        if size > 0 {
            let sym = (&gram + gram.transpose()) * 0.5;
            let min_ev = sym.symmetric_eigenvalues().min();
            if min_ev < -GRAM_PSD_TOL * gram.amax().max(1.0) {
                return Err(GmiError::Inconsistent(format!(
                    "Gram matrix not PSD (min eigenvalue {min_ev:e}); refine the grid"
                )));
            }
        }
        Ok(GramSystem { gram, cross, target_var: self.target_var })
    }
}

pub fn gram_covariances(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    fspec: &FunctionalSpec,
    window: &ObservationWindow,
    grid: &FrequencyGrid,
) -> Result<GramSystem> {
    CovarianceModel::new(spec, f, g, fspec, grid)?.gram_system(window)
}

/// `Var H - cross^T gram^+ cross` with eigenvalues below
/// `1e-10 * ||gram||` dropped from the pseudo-inverse.
pub fn projection_mse(gs: &GramSystem) -> f64 {
    if gs.gram.nrows() == 0 {
        return gs.target_var;
    }
    let sym = (&gs.gram + gs.gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let cutoff = PINV_CUTOFF * top;
    let proj = eig.eigenvectors.transpose() * &gs.cross;
    let explained: f64 = eig
        .eigenvalues
        .iter()
        .zip(proj.iter())
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, p)| p * p / l)
        .sum();
    gs.target_var - explained
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub half_length: usize,
    pub delta: f64,
    /// `|delta_L - reference| / reference`.
    pub rel_gap: f64,
}

/// `delta_L` for each half-length in `schedule`, compared with `reference`.
pub fn convergence_table(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    fspec: &FunctionalSpec,
    grid: &FrequencyGrid,
    schedule: &[usize],
    reference: f64,
) -> Result<Vec<ConvergenceRow>> {
    let model = CovarianceModel::new(spec, f, g, fspec, grid)?;
    schedule
        .iter()
        .map(|&l| {
            let w = ObservationWindow::new(l, fspec.horizon(), spec.n_gamma());
            let delta = projection_mse(&model.gram_system(&w)?);
            let rel_gap = if reference != 0.0 { (delta - reference).abs() / reference.abs() } else { delta.abs() };
            Ok(ConvergenceRow { half_length: l, delta, rel_gap })
        })
        .collect()
}

/// One jointly sampled stretch of increments `chi zeta(k)` and noise `eta(k)`,
/// `k = 0..length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    pub increments: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
}

/// Square root `L` with `L L^* = m` for a Hermitian PSD matrix.
fn psd_sqrt(m: &CMat) -> CMat {
    if m.nrows() == 1 {
        return CMat::from_element(1, 1, Complex64::new(m[(0, 0)].re.max(0.0).sqrt(), 0.0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|x| Complex64::new(x.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMat::from_diagonal(&d)
}

/// Spectral synthesis on the grid: independent complex Gaussian increments at
/// each node, conjugate-paired across `lambda -> -lambda` so the paths are real.
pub fn simulate_path(
    spec: &GMIncrementSpec,
    f: &DensityGrid,
    g: &DensityGrid,
    grid: &FrequencyGrid,
    length: usize,
    seed: u64,
) -> Result<SimulatedPath> {
    let n = grid.len();
    if length > n / 4 {
        return Err(GmiError::InvalidInput(format!("path length {length} exceeds n_grid/4 = {}", n / 4)));
    }
    f.check_grid(grid)?;
    g.check_grid(grid)?;
    let dim = f.dim();
    let sym = SymbolGrid::new(spec, grid);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    let draw = |rng: &mut ChaCha20Rng| -> Vec<Complex64> {
        (0..dim)
            .map(|_| {
                let u: f64 = StandardNormal.sample(rng);
                let v: f64 = StandardNormal.sample(rng);
                Complex64::new(u * scale, v * scale)
            })
            .collect()
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut sig = vec![vec![zero; n]; dim];
    let mut noi = vec![vec![zero; n]; dim];
    for j in 0..n / 2 {
        let pair = grid.pair(j);
        let ls = psd_sqrt(f.at(j));
        let lg = psd_sqrt(g.at(j));
        let zs = draw(&mut rng);
        let zn = draw(&mut rng);
        let amp = sym.chi[j] / sym.beta[j];
        for r in 0..dim {
            let mut ws = zero;
            let mut wn = zero;
            for c in 0..dim {
                ws += ls[(r, c)] * zs[c];
                wn += lg[(r, c)] * zn[c];
            }
            sig[r][j] = ws * amp;
            sig[r][pair] = (ws * amp).conj();
            noi[r][j] = wn;
            noi[r][pair] = wn.conj();
        }
    }
    // Y(k) = sum_j e^{i lambda_j k} W_j is n times the k-th Fourier coefficient
    let total = n as f64;
    let mut increments = vec![vec![0.0; dim]; length];
    let mut noise = vec![vec![0.0; dim]; length];
    for r in 0..dim {
        let noise_ft = grid.fourier(&noi[r]);
        let chi_noise: Vec<Complex64> = noi[r].iter().zip(&sym.chi).map(|(w, c)| w * c).collect();
        let sig_ft = grid.fourier(&sig[r]);
        let chi_ft = grid.fourier(&chi_noise);
        for k in 0..length {
            let kk = k as i64;
            increments[k][r] = total * (sig_ft.at(kk).re + chi_ft.at(kk).re);
            noise[k][r] = total * noise_ft.at(kk).re;
        }
    }
    Ok(SimulatedPath { increments, noise })
}

/// Smallest eigenvalue of the block-Toeplitz covariance of `lags` consecutive
/// increments; used to confirm positive semi-definiteness.
pub fn toeplitz_min_eigenvalue(model: &CovarianceModel, lags: usize) -> f64 {
    let d = model.dim;
    let size = (lags + 1) * d;
    let mut m = DMatrix::zeros(size, size);
    for r in 0..=lags {
        for c in 0..=lags {
            m.view_mut((r * d, c * d), (d, d)).copy_from(&model.increment_covariance(r as i64 - c as i64));
        }
    }
    let cm = m.map(|x| Complex64::new(x, 0.0));
    hermitian_eigenvalues(&((&cm + cm.adjoint()) * Complex64::new(0.5, 0.0)))[0]
}
