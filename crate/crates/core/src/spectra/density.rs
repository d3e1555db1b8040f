use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};
use crate::increments::{classify_stationarity, frequency_set, FMIncrementSpec, GMIncrementSpec};
use crate::spectra::grid::FrequencyGrid;
use crate::spectra::symbols::{symbols, SymbolGrid};

pub type CMat = DMatrix<Complex64>;

pub const PSD_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Admissible range for the bounded factor of a fractional density.
pub const BASE_BOUNDS: (f64, f64) = (1e-6, 1e6);

/// Matrix spectral density sampled on the nodes of a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    dim: usize,
    values: Vec<CMat>,
}

fn scale_of(m: &CMat) -> f64 {
    m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)].re];
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

impl DensityGrid {
    /// Validates Hermitian symmetry, PSD-ness and the real-sequence symmetry
    /// `f(-lambda) = f(lambda)^T` at paired nodes.
    pub fn new(values: Vec<CMat>) -> Result<Self> {
        let grid = Self::new_unchecked(values)?;
        grid.validate()?;
        Ok(grid)
    }

    pub(crate) fn new_unchecked(values: Vec<CMat>) -> Result<Self> {
        let dim = values.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(GmiError::InvalidDensity("empty density grid".into()));
        }
        for m in &values {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(GmiError::DimensionMismatch { expected: dim, got: m.nrows() });
            }
        }
        Ok(Self { dim, values })
    }

    pub fn from_scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| CMat::from_element(1, 1, Complex64::new(v, 0.0))).collect())
    }

    pub fn constant(matrix: &DMatrix<f64>, n_grid: usize) -> Result<Self> {
        let m = matrix.map(|x| Complex64::new(x, 0.0));
        Self::new(vec![m; n_grid])
    }

    pub fn zeros(dim: usize, n_grid: usize) -> Self {
        Self { dim, values: vec![CMat::zeros(dim, dim); n_grid] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        for (j, m) in self.values.iter().enumerate() {
            let scale = scale_of(m);
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(GmiError::InvalidDensity(format!("non-finite value at node {j}")));
            }
            let herm = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if herm > SYMMETRY_TOL * scale {
                return Err(GmiError::InvalidDensity(format!("not Hermitian at node {j}")));
            }
            let min_ev = hermitian_eigenvalues(m)[0];
            if min_ev < -PSD_TOL * scale {
                return Err(GmiError::InvalidDensity(format!(
                    "negative eigenvalue {min_ev:e} at node {j}"
                )));
            }
            let paired = &self.values[n - 1 - j];
            let asym = (paired - m.transpose()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if asym > SYMMETRY_TOL * scale.max(scale_of(paired)) {
                return Err(GmiError::InvalidDensity(format!(
                    "f(-lambda) != f(lambda)^T at node {j}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn at(&self, j: usize) -> &CMat {
        &self.values[j]
    }

    /// Scalar value at node `j` (entry `(0,0)`).
    pub fn scalar(&self, j: usize) -> f64 {
        self.values[j][(0, 0)].re
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|m| m.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
    }

    pub fn check_grid(&self, grid: &FrequencyGrid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(GmiError::DimensionMismatch { expected: grid.len(), got: self.len() });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(usize, &CMat) -> CMat) -> Self {
        let values = self.values.iter().enumerate().map(|(j, m)| f(j, m)).collect();
        Self { dim: self.dim, values }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|_, m| m * Complex64::new(alpha, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.len() != other.len() {
            return Err(GmiError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(self.map(|j, m| m + &other.values[j]))
    }

    pub fn write_csv<W: std::io::Write>(&self, grid: &FrequencyGrid, out: W) -> Result<()> {
        self.check_grid(grid)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["lambda".to_string()];
        for r in 0..self.dim {
            for c in 0..self.dim {
                header.push(format!("re_{r}_{c}"));
                header.push(format!("im_{r}_{c}"));
            }
        }
        w.write_record(&header)?;
        for (j, m) in self.values.iter().enumerate() {
            let mut row = vec![format_float(grid.lambda(j))];
            for r in 0..self.dim {
                for c in 0..self.dim {
                    row.push(format_float(m[(r, c)].re));
                    row.push(format_float(m[(r, c)].im));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`DensityGrid::write_csv`]; node count
    /// must match the grid.
    pub fn read_csv(path: &Path, grid: &FrequencyGrid) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let cols = rdr.headers()?.len();
        let pairs = cols.saturating_sub(1) / 2;
        let dim = (pairs as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim * 2 + 1 != cols {
            return Err(GmiError::InvalidDensity(format!("bad density CSV header ({cols} columns)")));
        }
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        GmiError::InvalidDensity(format!("unparsable number {s:?} in density CSV"))
                    })
                })
                .collect::<Result<_>>()?;
            values.push(CMat::from_fn(dim, dim, |r, c| {
                let k = 1 + 2 * (r * dim + c);
                Complex64::new(nums[k], nums[k + 1])
            }));
        }
        let out = Self::new(values)?;
        out.check_grid(grid)?;
        Ok(out)
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Serialize, Deserialize)]
struct RawDensityGrid {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let flat = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            self.values.iter().map(|m| m.transpose().iter().map(f).collect()).collect()
        };
        RawDensityGrid { dim: self.dim, re: flat(|z| z.re), im: flat(|z| z.im) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDensityGrid::deserialize(d)?;
        if raw.re.len() != raw.im.len() {
            return Err(serde::de::Error::custom("re/im node counts differ"));
        }
        let n = raw.dim;
        let values = raw
            .re
            .iter()
            .zip(&raw.im)
            .map(|(re, im)| {
                if re.len() != n * n || im.len() != n * n {
                    return Err(serde::de::Error::custom("matrix entry count mismatch"));
                }
                Ok(CMat::from_fn(n, n, |r, c| Complex64::new(re[r * n + c], im[r * n + c])))
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        DensityGrid::new_unchecked(values).map_err(serde::de::Error::custom)
    }
}

/// Parametric spectral density models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityModel {
    /// Frequency-independent real symmetric matrix.
    Constant { matrix: Vec<Vec<f64>> },
    Zero {
        #[serde(default = "one")]
        dim: usize,
    },
    /// `variance |1 + sum ma_k z^k|^2 / |1 - sum ar_k z^k|^2` at `z = e^{-i lambda}`,
    /// times the identity of size `dim`.
    Rational {
        #[serde(default)]
        ar: Vec<f64>,
        #[serde(default)]
        ma: Vec<f64>,
        #[serde(default = "unit")]
        variance: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `Theta(z) Theta(z)^*` with `Theta(z) = sum_k coeffs[k] z^k`.
    MatrixMa { coeffs: Vec<Vec<Vec<f64>>> },
    /// Fractional seasonal density built on a bounded base density.
    Fractional { spec: FMIncrementSpec, base: Box<DensityModel> },
    /// `|beta|^2 / |chi|^2` of the problem's increment operator times `base`.
    IncrementWeighted { base: Box<DensityModel> },
    /// Samples read from a CSV file.
    Grid { path: String },
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn poly_at(coeffs: &[f64], sign: f64, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0);
    for &c in coeffs {
        zk *= z;
        acc += zk * (sign * c);
    }
    acc
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(GmiError::InvalidDensity("matrix must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

impl DensityModel {
    pub fn scalar_constant(value: f64) -> Self {
        DensityModel::Constant { matrix: vec![vec![value]] }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            DensityModel::Constant { matrix } => Some(matrix.len()),
            DensityModel::Zero { dim } | DensityModel::Rational { dim, .. } => Some(*dim),
            DensityModel::MatrixMa { coeffs } => coeffs.first().map(|m| m.len()),
            DensityModel::Fractional { base, .. } | DensityModel::IncrementWeighted { base } => {
                base.dim()
            }
            DensityModel::Grid { .. } => None,
        }
    }

    /// Samples the model on `grid`. `gm` is the problem's increment operator,
    /// needed only by the increment-weighted variant.
    pub fn evaluate(&self, grid: &FrequencyGrid, gm: Option<&GMIncrementSpec>) -> Result<DensityGrid> {
        let n = grid.len();
        match self {
            DensityModel::Constant { matrix } => DensityGrid::constant(&rows_to_matrix(matrix)?, n),
            DensityModel::Zero { dim } => Ok(DensityGrid::zeros(*dim, n)),
            DensityModel::Rational { ar, ma, variance, dim } => {
                if !(*variance >= 0.0) {
                    return Err(GmiError::InvalidDensity("variance must be non-negative".into()));
                }
                check_unit_circle(ar, n)?;
                let values = grid
                    .nodes()
                    .iter()
                    .map(|&l| {
                        let z = Complex64::from_polar(1.0, -l);
                        let v = variance * poly_at(ma, 1.0, z).norm_sqr()
                            / poly_at(ar, -1.0, z).norm_sqr();
                        CMat::from_diagonal_element(*dim, *dim, Complex64::new(v, 0.0))
                    })
                    .collect();
                DensityGrid::new(values)
            }
            DensityModel::MatrixMa { coeffs } => {
                let mats: Vec<DMatrix<f64>> =
                    coeffs.iter().map(|m| rows_to_matrix(m)).collect::<Result<_>>()?;
                let dim = mats.first().map(|m| m.nrows()).ok_or_else(|| {
                    GmiError::InvalidDensity("matrix moving average needs coefficients".into())
                })?;
                if mats.iter().any(|m| m.nrows() != dim) {
                    return Err(GmiError::InvalidDensity("coefficient sizes differ".into()));
                }
                let values = grid
                    .nodes()
                    .iter()
                    .map(|&l| {
                        let mut theta = CMat::zeros(dim, dim);
                        for (k, m) in mats.iter().enumerate() {
                            let z = Complex64::from_polar(1.0, -l * k as f64);
                            theta += m.map(|x| Complex64::new(x, 0.0)) * z;
                        }
                        &theta * theta.adjoint()
                    })
                    .collect();
                DensityGrid::new(values)
            }
            DensityModel::Fractional { spec, base } => {
                let base = base.evaluate(grid, gm)?;
                fm_density(spec, &base, grid)
            }
            DensityModel::IncrementWeighted { base } => {
                let gm = gm.ok_or_else(|| {
                    GmiError::InvalidDensity("increment-weighted density needs an increment spec".into())
                })?;
                let base = base.evaluate(grid, Some(gm))?;
                let sym = SymbolGrid::new(gm, grid);
                DensityGrid::new(base.map(|j, m| m * Complex64::new(sym.weight(j), 0.0)).values)
            }
            DensityModel::Grid { path } => DensityGrid::read_csv(Path::new(path), grid),
        }
    }
}

/// Rejects autoregressive polynomials with a root on (or numerically at)
/// the unit circle: scans a grid 16 times finer than the working one, which
/// includes 0 and pi, then refines around the smallest modulus.
fn check_unit_circle(ar: &[f64], n_grid: usize) -> Result<()> {
    if ar.is_empty() {
        return Ok(());
    }
    let modulus = |l: f64| poly_at(ar, -1.0, Complex64::from_polar(1.0, -l)).norm();
    let fine = 16 * n_grid;
    let step = 2.0 * PI / fine as f64;
    let (mut best, mut min_mod) = (0.0, f64::INFINITY);
    for j in 0..=fine {
        let l = -PI + j as f64 * step;
        let m = modulus(l);
        if m < min_mod {
            best = l;
            min_mod = m;
        }
    }
    let (mut lo, mut hi) = (best - step, best + step);
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if modulus(a) < modulus(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    min_mod = min_mod.min(modulus(0.5 * (lo + hi)));
    if min_mod <= 1e-8 {
        return Err(GmiError::InvalidDensity(format!(
            "autoregressive polynomial has a root on the unit circle (min modulus {min_mod:e})"
        )));
    }
    Ok(())
}

/// Fractional seasonal density
/// `|beta^{(R)}|^2 / |chi^{(R)}|^2 * prod_nu |(e^{-i nu} - e^{i lambda})(e^{i nu} - e^{i lambda})|^{-2 D~_nu} * base`.
pub fn fm_density(spec: &FMIncrementSpec, base: &DensityGrid, grid: &FrequencyGrid) -> Result<DensityGrid> {
    base.check_grid(grid)?;
    let report = classify_stationarity(spec);
    if !report.stationary {
        return Err(GmiError::NonStationary(report.conditions.join(", ")));
    }
    for (j, m) in base.values().iter().enumerate() {
        let ev = hermitian_eigenvalues(m);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < BASE_BOUNDS.0 || hi > BASE_BOUNDS.1 {
            return Err(GmiError::InvalidDensity(format!(
                "base density eigenvalues [{lo:e}, {hi:e}] at node {j} leave [{:e}, {:e}]",
                BASE_BOUNDS.0, BASE_BOUNDS.1
            )));
        }
    }
    let integer = match spec.integer_part() {
        Ok(gm) => Some(gm),
        Err(GmiError::DegenerateOperator) => None,
        Err(e) => return Err(e),
    };
    let fset = frequency_set(spec);
    let values = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let mut w = match &integer {
                Some(gm) => {
                    let (chi, beta) = symbols(gm, l);
                    beta.norm_sqr() / chi.norm_sqr()
                }
                None => 1.0,
            };
            let e = Complex64::from_polar(1.0, l);
            for entry in &fset.entries {
                let a = Complex64::from_polar(1.0, -entry.nu) - e;
                let b = Complex64::from_polar(1.0, entry.nu) - e;
                w *= (a * b).norm().powf(-2.0 * entry.d_tilde);
            }
            base.at(j) * Complex64::new(w, 0.0)
        })
        .collect();
    DensityGrid::new(values)
}

/// `p(lambda) = f(lambda) + |beta(i lambda)|^2 g(lambda)`.
pub fn combine(f: &DensityGrid, g: &DensityGrid, sym: &SymbolGrid) -> Result<DensityGrid> {
    if f.dim() != g.dim() {
        return Err(GmiError::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    if f.len() != g.len() || f.len() != sym.len() {
        return Err(GmiError::DimensionMismatch { expected: f.len(), got: g.len() });
    }
    Ok(f.map(|j, m| m + g.at(j) * Complex64::new(sym.beta2(j), 0.0)))
}
