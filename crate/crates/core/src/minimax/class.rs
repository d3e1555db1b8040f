use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};
use crate::increments::GMIncrementSpec;
use crate::spectra::{hermitian_eigenvalues, CMat, DensityGrid, DensityModel, FrequencyGrid, SymbolGrid};

/// Admissible set for the signal density `f`. Budgets are weighted by
/// `|chi|^2 / |beta|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum SignalClass {
    #[serde(rename = "D0_1")]
    D0Matrix { p: Vec<Vec<f64>> },
    #[serde(rename = "D0_2")]
    D0Trace { p: f64 },
    #[serde(rename = "D0_3")]
    D0Diagonal { p: Vec<f64> },
    #[serde(rename = "D0_4")]
    D0Weighted { b1: Vec<Vec<f64>>, p: f64 },
    #[serde(rename = "D1delta_1")]
    D1Trace { f1: DensityModel, delta: f64 },
    #[serde(rename = "D1delta_2")]
    D1Diagonal { f1: DensityModel, delta: Vec<f64> },
    #[serde(rename = "D1delta_3")]
    D1Weighted { f1: DensityModel, b1: Vec<Vec<f64>>, delta: f64 },
    #[serde(rename = "D1delta_4")]
    D1Entrywise { f1: DensityModel, delta: Vec<Vec<f64>> },
    #[serde(rename = "fixed")]
    Fixed { density: DensityModel },
}

/// Admissible set for the noise density `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum NoiseClass {
    #[serde(rename = "Deps_1")]
    EpsTrace { g1: DensityModel, eps: f64, q: f64 },
    #[serde(rename = "Deps_2")]
    EpsDiagonal { g1: DensityModel, eps: f64, q: Vec<f64> },
    #[serde(rename = "Deps_3")]
    EpsWeighted { g1: DensityModel, eps: f64, b2: Vec<Vec<f64>>, q: f64 },
    #[serde(rename = "Deps_4")]
    EpsMatrix { g1: DensityModel, eps: f64, q: Vec<Vec<f64>> },
    #[serde(rename = "DVU_1")]
    BandMatrix { v: DensityModel, u: DensityModel, q: Vec<Vec<f64>> },
    #[serde(rename = "DVU_2")]
    BandTrace { v: DensityModel, u: DensityModel, q: f64 },
    #[serde(rename = "DVU_3")]
    BandDiagonal { v: DensityModel, u: DensityModel, q: Vec<f64> },
    #[serde(rename = "DVU_4")]
    BandWeighted { v: DensityModel, u: DensityModel, b2: Vec<Vec<f64>>, q: f64 },
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "fixed")]
    Fixed { density: DensityModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityClassSpec {
    pub signal: SignalClass,
    pub noise: NoiseClass,
}

impl SignalClass {
    pub fn id(&self) -> &'static str {
        match self {
            Self::D0Matrix { .. } => "D0_1",
            Self::D0Trace { .. } => "D0_2",
            Self::D0Diagonal { .. } => "D0_3",
            Self::D0Weighted { .. } => "D0_4",
            Self::D1Trace { .. } => "D1delta_1",
            Self::D1Diagonal { .. } => "D1delta_2",
            Self::D1Weighted { .. } => "D1delta_3",
            Self::D1Entrywise { .. } => "D1delta_4",
            Self::Fixed { .. } => "fixed",
        }
    }
}

impl NoiseClass {
    pub fn id(&self) -> &'static str {
        match self {
            Self::EpsTrace { .. } => "Deps_1",
            Self::EpsDiagonal { .. } => "Deps_2",
            Self::EpsWeighted { .. } => "Deps_3",
            Self::EpsMatrix { .. } => "Deps_4",
            Self::BandMatrix { .. } => "DVU_1",
            Self::BandTrace { .. } => "DVU_2",
            Self::BandDiagonal { .. } => "DVU_3",
            Self::BandWeighted { .. } => "DVU_4",
            Self::Zero => "zero",
            Self::Fixed { .. } => "fixed",
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], dim: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(GmiError::DimensionMismatch { expected: dim, got: rows.len() });
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(GmiError::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(m)
}

fn positive_definite(rows: &[Vec<f64>], dim: usize, name: &str) -> Result<DMatrix<f64>> {
    let m = to_matrix(rows, dim, name)?;
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(GmiError::InvalidInput(format!("{name} must be symmetric")));
    }
    if m.clone().symmetric_eigenvalues().min() <= 0.0 {
        return Err(GmiError::InvalidInput(format!("{name} must be positive definite")));
    }
    Ok(m)
}

fn check_vec(v: &[f64], dim: usize, name: &str, positive: bool) -> Result<()> {
    if v.len() != dim {
        return Err(GmiError::DimensionMismatch { expected: dim, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite() || (positive && *x <= 0.0)) {
        return Err(GmiError::InvalidInput(format!("{name} must be finite and positive")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(GmiError::InvalidInput(format!("eps = {eps} outside [0, 1]")));
    }
    Ok(())
}

fn check_budget(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(GmiError::InvalidInput(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

/// Class constants with density parameters evaluated on a grid.
#[derive(Debug, Clone)]
pub struct ResolvedClass {
    pub spec: DensityClassSpec,
    pub dim: usize,
    /// Budget weight `|chi|^2 / |beta|^2` per node.
    pub rho: Vec<f64>,
    pub signal_center: Option<DensityGrid>,
    pub noise_lower: Option<DensityGrid>,
    pub noise_upper: Option<DensityGrid>,
    pub signal_fixed: Option<DensityGrid>,
    pub noise_fixed: Option<DensityGrid>,
    pub b1: Option<DMatrix<f64>>,
    pub b2: Option<DMatrix<f64>>,
}

impl DensityClassSpec {
    pub fn id(&self) -> String {
        format!("{} x {}", self.signal.id(), self.noise.id())
    }

    /// Validates the class constants and evaluates density parameters.
    pub fn resolve(&self, dim: usize, spec: &GMIncrementSpec, grid: &FrequencyGrid) -> Result<ResolvedClass> {
        let sym = SymbolGrid::new(spec, grid);
        let rho: Vec<f64> = (0..grid.len()).map(|j| 1.0 / sym.weight(j)).collect();
        let eval = |m: &DensityModel| -> Result<DensityGrid> {
            let d = m.evaluate(grid, Some(spec))?;
            if d.dim() != dim {
                return Err(GmiError::DimensionMismatch { expected: dim, got: d.dim() });
            }
            Ok(d)
        };
        let mut out = ResolvedClass {
            spec: self.clone(),
            dim,
            rho,
            signal_center: None,
            noise_lower: None,
            noise_upper: None,
            signal_fixed: None,
            noise_fixed: None,
            b1: None,
            b2: None,
        };
        match &self.signal {
            SignalClass::D0Matrix { p } => {
                positive_definite(p, dim, "P")?;
            }
            SignalClass::D0Trace { p } => check_budget(*p, "p")?,
            SignalClass::D0Diagonal { p } => check_vec(p, dim, "p_k", true)?,
            SignalClass::D0Weighted { b1, p } => {
                out.b1 = Some(positive_definite(b1, dim, "B1")?);
                check_budget(*p, "p")?;
            }
            SignalClass::D1Trace { f1, delta } => {
                check_budget(*delta, "delta")?;
                out.signal_center = Some(eval(f1)?);
            }
            SignalClass::D1Diagonal { f1, delta } => {
                check_vec(delta, dim, "delta_k", true)?;
                out.signal_center = Some(eval(f1)?);
            }
            SignalClass::D1Weighted { f1, b1, delta } => {
                check_budget(*delta, "delta")?;
                out.b1 = Some(positive_definite(b1, dim, "B1")?);
                out.signal_center = Some(eval(f1)?);
            }
            SignalClass::D1Entrywise { f1, delta } => {
                let m = to_matrix(delta, dim, "delta_ij")?;
                if m.iter().any(|x| *x <= 0.0) {
                    return Err(GmiError::InvalidInput("delta_ij must be positive".into()));
                }
                out.signal_center = Some(eval(f1)?);
            }
            SignalClass::Fixed { density } => out.signal_fixed = Some(eval(density)?),
        }
        match &self.noise {
            NoiseClass::EpsTrace { g1, eps, q } => {
                check_eps(*eps)?;
                check_budget(*q, "q")?;
                out.noise_lower = Some(eval(g1)?.scaled(1.0 - eps));
            }
            NoiseClass::EpsDiagonal { g1, eps, q } => {
                check_eps(*eps)?;
                check_vec(q, dim, "q_k", true)?;
                out.noise_lower = Some(eval(g1)?.scaled(1.0 - eps));
            }
            NoiseClass::EpsWeighted { g1, eps, b2, q } => {
                check_eps(*eps)?;
                check_budget(*q, "q")?;
                out.b2 = Some(positive_definite(b2, dim, "B2")?);
                out.noise_lower = Some(eval(g1)?.scaled(1.0 - eps));
            }
            NoiseClass::EpsMatrix { g1, eps, q } => {
                check_eps(*eps)?;
                positive_definite(q, dim, "Q")?;
                out.noise_lower = Some(eval(g1)?.scaled(1.0 - eps));
            }
            NoiseClass::BandMatrix { v, u, q } => {
                positive_definite(q, dim, "Q")?;
                out.noise_lower = Some(eval(v)?);
                out.noise_upper = Some(eval(u)?);
            }
            NoiseClass::BandTrace { v, u, q } => {
                check_budget(*q, "q")?;
                out.noise_lower = Some(eval(v)?);
                out.noise_upper = Some(eval(u)?);
            }
            NoiseClass::BandDiagonal { v, u, q } => {
                check_vec(q, dim, "q_k", true)?;
                out.noise_lower = Some(eval(v)?);
                out.noise_upper = Some(eval(u)?);
            }
            NoiseClass::BandWeighted { v, u, b2, q } => {
                check_budget(*q, "q")?;
                out.b2 = Some(positive_definite(b2, dim, "B2")?);
                out.noise_lower = Some(eval(v)?);
                out.noise_upper = Some(eval(u)?);
            }
            NoiseClass::Zero => out.noise_fixed = Some(DensityGrid::zeros(dim, grid.len())),
            NoiseClass::Fixed { density } => out.noise_fixed = Some(eval(density)?),
        }
        if let (Some(v), Some(u)) = (&out.noise_lower, &out.noise_upper) {
            for j in 0..grid.len() {
                let gap = u.at(j) - v.at(j);
                if hermitian_eigenvalues(&gap)[0] < -1e-12 * u.at(j).norm().max(1.0) {
                    return Err(GmiError::InvalidInput(format!(
                        "V <= U violated at lambda = {:.6}",
                        grid.lambda(j)
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// Violations of the class constraints by a candidate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// Largest deviation of an integral constraint (equality) or its excess (inequality).
    pub signal_budget: f64,
    pub noise_budget: f64,
    /// Largest pointwise violation (PSD order, bounds, fixed values).
    pub signal_pointwise: f64,
    pub noise_pointwise: f64,
}

impl MembershipReport {
    pub fn max(&self) -> f64 {
        self.signal_budget.max(self.noise_budget).max(self.signal_pointwise).max(self.noise_pointwise)
    }
}

fn weighted_mean(grid: &FrequencyGrid, rho: Option<&[f64]>, vals: impl Fn(usize) -> f64) -> f64 {
    let v: Vec<f64> = (0..grid.len()).map(|j| rho.map_or(1.0, |r| r[j]) * vals(j)).collect();
    grid.mean(&v)
}

fn inner(b: &DMatrix<f64>, m: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            acc += b[(i, j)] * m[(j, i)].re;
        }
    }
    acc
}

fn trace(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

fn min_eig_violation(m: &CMat) -> f64 {
    (-hermitian_eigenvalues(m)[0]).max(0.0)
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

impl ResolvedClass {
    /// Constraint violations of `(f, g)`; zero for an admissible pair.
    pub fn membership(&self, f: &DensityGrid, g: &DensityGrid, grid: &FrequencyGrid) -> MembershipReport {
        let n = grid.len();
        let dim = self.dim;
        let rho = Some(self.rho.as_slice());
        let mut rep = MembershipReport { signal_budget: 0.0, noise_budget: 0.0, signal_pointwise: 0.0, noise_pointwise: 0.0 };
        for j in 0..n {
            rep.signal_pointwise = rep.signal_pointwise.max(min_eig_violation(f.at(j)));
            rep.noise_pointwise = rep.noise_pointwise.max(min_eig_violation(g.at(j)));
        }
        let entry_means = |d: &DensityGrid, r: Option<&[f64]>| -> DMatrix<f64> {
            DMatrix::from_fn(dim, dim, |a, b| weighted_mean(grid, r, |j| d.at(j)[(a, b)].re))
        };
        match &self.spec.signal {
            SignalClass::D0Matrix { p } => {
                let m = entry_means(f, rho);
                rep.signal_budget = (m - DMatrix::from_fn(dim, dim, |a, b| p[a][b])).amax();
            }
            SignalClass::D0Trace { p } => {
                rep.signal_budget = (weighted_mean(grid, rho, |j| trace(f.at(j))) - p).abs();
            }
            SignalClass::D0Diagonal { p } => {
                let m = entry_means(f, rho);
                rep.signal_budget = (0..dim).map(|k| (m[(k, k)] - p[k]).abs()).fold(0.0, f64::max);
            }
            SignalClass::D0Weighted { p, .. } => {
                let b1 = self.b1.as_ref().expect("resolved");
                rep.signal_budget = (weighted_mean(grid, rho, |j| inner(b1, f.at(j))) - p).abs();
            }
            SignalClass::D1Trace { delta, .. } => {
                let c = self.signal_center.as_ref().expect("resolved");
                let used = weighted_mean(grid, rho, |j| (trace(f.at(j)) - trace(c.at(j))).abs());
                rep.signal_budget = (used - delta).max(0.0);
            }
            SignalClass::D1Diagonal { delta, .. } => {
                let c = self.signal_center.as_ref().expect("resolved");
                rep.signal_budget = (0..dim)
                    .map(|k| {
                        let used = weighted_mean(grid, rho, |j| (f.at(j)[(k, k)].re - c.at(j)[(k, k)].re).abs());
                        (used - delta[k]).max(0.0)
                    })
                    .fold(0.0, f64::max);
            }
            SignalClass::D1Weighted { delta, .. } => {
                let c = self.signal_center.as_ref().expect("resolved");
                let b1 = self.b1.as_ref().expect("resolved");
                let used = weighted_mean(grid, rho, |j| (inner(b1, f.at(j)) - inner(b1, c.at(j))).abs());
                rep.signal_budget = (used - delta).max(0.0);
            }
            SignalClass::D1Entrywise { delta, .. } => {
                let c = self.signal_center.as_ref().expect("resolved");
                for a in 0..dim {
                    for b in 0..dim {
                        let used = weighted_mean(grid, rho, |j| (f.at(j)[(a, b)] - c.at(j)[(a, b)]).norm());
                        rep.signal_budget = rep.signal_budget.max((used - delta[a][b]).max(0.0));
                    }
                }
            }
            SignalClass::Fixed { .. } => {
                let d = self.signal_fixed.as_ref().expect("resolved");
                for j in 0..n {
                    rep.signal_pointwise = rep.signal_pointwise.max(max_diff(f.at(j), d.at(j)));
                }
            }
        }
        let lower = self.noise_lower.as_ref();
        let upper = self.noise_upper.as_ref();
        match &self.spec.noise {
            NoiseClass::EpsTrace { q, .. } | NoiseClass::BandTrace { q, .. } => {
                rep.noise_budget = (weighted_mean(grid, None, |j| trace(g.at(j))) - q).abs();
                for j in 0..n {
                    let t = trace(g.at(j));
                    rep.noise_pointwise = rep.noise_pointwise.max(trace(lower.expect("resolved").at(j)) - t);
                    if let Some(u) = upper {
                        rep.noise_pointwise = rep.noise_pointwise.max(t - trace(u.at(j)));
                    }
                }
            }
            NoiseClass::EpsDiagonal { q, .. } | NoiseClass::BandDiagonal { q, .. } => {
                let m = entry_means(g, None);
                rep.noise_budget = (0..dim).map(|k| (m[(k, k)] - q[k]).abs()).fold(0.0, f64::max);
                for j in 0..n {
                    for k in 0..dim {
                        let x = g.at(j)[(k, k)].re;
                        rep.noise_pointwise =
                            rep.noise_pointwise.max(lower.expect("resolved").at(j)[(k, k)].re - x);
                        if let Some(u) = upper {
                            rep.noise_pointwise = rep.noise_pointwise.max(x - u.at(j)[(k, k)].re);
                        }
                    }
                }
            }
            NoiseClass::EpsWeighted { q, .. } | NoiseClass::BandWeighted { q, .. } => {
                let b2 = self.b2.as_ref().expect("resolved");
                rep.noise_budget = (weighted_mean(grid, None, |j| inner(b2, g.at(j))) - q).abs();
                for j in 0..n {
                    let x = inner(b2, g.at(j));
                    rep.noise_pointwise = rep.noise_pointwise.max(inner(b2, lower.expect("resolved").at(j)) - x);
                    if let Some(u) = upper {
                        rep.noise_pointwise = rep.noise_pointwise.max(x - inner(b2, u.at(j)));
                    }
                }
            }
            NoiseClass::EpsMatrix { q, .. } | NoiseClass::BandMatrix { q, .. } => {
                let m = entry_means(g, None);
                rep.noise_budget = (m - DMatrix::from_fn(dim, dim, |a, b| q[a][b])).amax();
                for j in 0..n {
                    let lo = lower.expect("resolved").at(j);
                    rep.noise_pointwise = rep.noise_pointwise.max(min_eig_violation(&(g.at(j) - lo)));
                    if let Some(u) = upper {
                        rep.noise_pointwise = rep.noise_pointwise.max(min_eig_violation(&(u.at(j) - g.at(j))));
                    }
                }
            }
            NoiseClass::Zero | NoiseClass::Fixed { .. } => {
                let d = self.noise_fixed.as_ref().expect("resolved");
                for j in 0..n {
                    rep.noise_pointwise = rep.noise_pointwise.max(max_diff(g.at(j), d.at(j)));
                }
            }
        }
        rep
    }

    /// Scalar reduction of the signal constraints.
    pub(crate) fn signal_set(&self) -> Result<ScalarSet> {
        self.require_scalar()?;
        let scalar_b1 = self.b1.as_ref().map_or(1.0, |b| b[(0, 0)]);
        let weight: Vec<f64> = self.rho.iter().map(|r| r * scalar_b1).collect();
        let n = self.rho.len();
        Ok(match &self.spec.signal {
            SignalClass::D0Matrix { p } => ScalarSet::budget(weight, vec![0.0; n], None, p[0][0]),
            SignalClass::D0Trace { p } | SignalClass::D0Weighted { p, .. } => {
                ScalarSet::budget(weight, vec![0.0; n], None, *p)
            }
            SignalClass::D0Diagonal { p } => ScalarSet::budget(weight, vec![0.0; n], None, p[0]),
            SignalClass::D1Trace { delta, .. } | SignalClass::D1Weighted { delta, .. } => {
                ScalarSet::Ball { center: self.scalar_values(self.signal_center.as_ref()), weight, radius: *delta, floor: 0.0 }
            }
            SignalClass::D1Diagonal { delta, .. } => {
                ScalarSet::Ball { center: self.scalar_values(self.signal_center.as_ref()), weight, radius: delta[0], floor: 0.0 }
            }
            SignalClass::D1Entrywise { delta, .. } => ScalarSet::Ball {
                center: self.scalar_values(self.signal_center.as_ref()),
                weight,
                radius: delta[0][0],
                floor: 0.0,
            },
            SignalClass::Fixed { .. } => ScalarSet::Fixed(self.scalar_values(self.signal_fixed.as_ref())),
        })
    }

    /// Scalar reduction of the noise constraints.
    pub(crate) fn noise_set(&self) -> Result<ScalarSet> {
        self.require_scalar()?;
        let scalar_b2 = self.b2.as_ref().map_or(1.0, |b| b[(0, 0)]);
        let n = self.rho.len();
        let weight = vec![scalar_b2; n];
        if self.noise_fixed.is_some() {
            return Ok(ScalarSet::Fixed(self.scalar_values(self.noise_fixed.as_ref())));
        }
        let lower = self.scalar_values(self.noise_lower.as_ref());
        let upper = self.noise_upper.as_ref().map(|u| self.scalar_values(Some(u)));
        Ok(match &self.spec.noise {
            NoiseClass::EpsTrace { q, .. }
            | NoiseClass::EpsWeighted { q, .. }
            | NoiseClass::BandTrace { q, .. }
            | NoiseClass::BandWeighted { q, .. } => ScalarSet::budget(weight, lower, upper, *q),
            NoiseClass::EpsDiagonal { q, .. } | NoiseClass::BandDiagonal { q, .. } => {
                ScalarSet::budget(weight, lower, upper, q[0])
            }
            NoiseClass::EpsMatrix { q, .. } | NoiseClass::BandMatrix { q, .. } => {
                ScalarSet::budget(weight, lower, upper, q[0][0])
            }
            NoiseClass::Zero | NoiseClass::Fixed { .. } => {
                ScalarSet::Fixed(self.scalar_values(self.noise_fixed.as_ref()))
            }
        })
    }

    fn scalar_values(&self, d: Option<&DensityGrid>) -> Vec<f64> {
        let d = d.expect("resolved density");
        (0..d.len()).map(|j| d.scalar(j)).collect()
    }

    fn require_scalar(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(GmiError::InvalidInput(format!(
                "minimax ascent supports scalar problems only (T = {}); use membership and mse_functional for T > 1",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Nodewise constraint set for a scalar density sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ScalarSet {
    /// `lower <= x <= upper`, `mean(weight * x) = total`.
    Budget { weight: Vec<f64>, lower: Vec<f64>, upper: Option<Vec<f64>>, total: f64 },
    /// `x >= floor`, `mean(weight * |x - center|) <= radius`.
    Ball { center: Vec<f64>, weight: Vec<f64>, radius: f64, floor: f64 },
    Fixed(Vec<f64>),
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Bisection for a decreasing function crossing `target`, on a bracket that
/// is widened until it contains the root.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    while f(hi) > target {
        hi = if hi == 0.0 { 1.0 } else { hi * 2.0 };
    }
    while f(lo) < target {
        lo = if lo == 0.0 { -1.0 } else { lo * 2.0 };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl ScalarSet {
    fn budget(weight: Vec<f64>, lower: Vec<f64>, upper: Option<Vec<f64>>, total: f64) -> Self {
        Self::Budget { weight, lower, upper, total }
    }

    /// Raises the pointwise lower bound to at least `floor`.
    pub fn with_floor(self, min: f64) -> Self {
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let lower = lower.into_iter().map(|l| l.max(min)).collect();
                Self::Budget { weight, lower, upper, total }
            }
            Self::Ball { center, weight, radius, floor } => Self::Ball { center, weight, radius, floor: floor.max(min) },
            other => other,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed(_))
    }

    /// Lower pointwise bound, used to judge invertibility of `p`.
    pub fn floor(&self) -> Vec<f64> {
        match self {
            Self::Budget { lower, .. } => lower.clone(),
            Self::Ball { center, floor, .. } => vec![*floor; center.len()],
            Self::Fixed(x) => x.clone(),
        }
    }

    pub fn check_feasible(&self) -> Result<()> {
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let n = weight.len();
                let lo = mean(weight.iter().zip(lower).map(|(w, x)| w * x), n);
                if lo > total * (1.0 + 1e-12) {
                    return Err(GmiError::Infeasible(format!("lower bounds already use {lo:e} > budget {total:e}")));
                }
                if let Some(u) = upper {
                    let hi = mean(weight.iter().zip(u).map(|(w, x)| w * x), n);
                    if hi < total * (1.0 - 1e-12) {
                        return Err(GmiError::Infeasible(format!("upper bounds allow {hi:e} < budget {total:e}")));
                    }
                }
                Ok(())
            }
            Self::Ball { center, .. } => {
                if center.iter().any(|x| *x < 0.0) {
                    return Err(GmiError::Infeasible("ball center is not a density".into()));
                }
                Ok(())
            }
            Self::Fixed(_) => Ok(()),
        }
    }

    /// The natural feasible point: lower bound plus a uniform share of the
    /// budget, or the ball center.
    pub fn start(&self) -> Vec<f64> {
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let n = weight.len();
                let base = mean(weight.iter().zip(lower).map(|(w, x)| w * x), n);
                match upper {
                    Some(u) => {
                        let room = mean(weight.iter().zip(u).zip(lower).map(|((w, h), l)| w * (h - l)), n);
                        let t = if room > 0.0 { ((total - base) / room).clamp(0.0, 1.0) } else { 0.0 };
                        lower.iter().zip(u).map(|(l, h)| l + t * (h - l)).collect()
                    }
                    None => {
                        let s = (total - base) / mean(weight.iter().copied(), n);
                        lower.iter().map(|l| l + s).collect()
                    }
                }
            }
            Self::Ball { center, .. } => center.clone(),
            Self::Fixed(x) => x.clone(),
        }
    }

    /// Projection of `y` in the metric `sum (x - y)^2 / scale`.
    pub fn project(&self, y: &[f64], scale: &[f64]) -> Vec<f64> {
        let n = y.len();
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let at = |tau: f64| -> Vec<f64> {
                    (0..n)
                        .map(|j| {
                            let x = (y[j] - tau * weight[j] * scale[j]).max(lower[j]);
                            upper.as_ref().map_or(x, |u| x.min(u[j]))
                        })
                        .collect()
                };
                let used = |tau: f64| mean(at(tau).iter().zip(weight).map(|(x, w)| x * w), n);
                let tau = bisect(-1.0, 1.0, *total, used);
                let mut x = at(tau);
                // remove the last rounding-level budget error on free nodes
                let err = mean(x.iter().zip(weight).map(|(v, w)| v * w), n) - total;
                let free: Vec<usize> = (0..n)
                    .filter(|&j| x[j] > lower[j] && upper.as_ref().is_none_or(|u| x[j] < u[j]))
                    .collect();
                let free_w: f64 = free.iter().map(|&j| weight[j] * weight[j] * scale[j]).sum::<f64>() / n as f64;
                if free_w > 0.0 {
                    for &j in &free {
                        x[j] -= err * weight[j] * scale[j] / free_w;
                    }
                }
                x
            }
            Self::Ball { center, weight, radius, floor } => {
                let at = |tau: f64| -> Vec<f64> {
                    (0..n)
                        .map(|j| {
                            let d = y[j] - center[j];
                            let shrink = (d.abs() - tau * weight[j] * scale[j]).max(0.0);
                            (center[j] + d.signum() * shrink).max(*floor)
                        })
                        .collect()
                };
                let used = |tau: f64| -> f64 {
                    mean(at(tau).iter().zip(center).zip(weight).map(|((x, c), w)| w * (x - c).abs()), n)
                };
                if used(0.0) <= *radius {
                    return at(0.0);
                }
                let mut hi = 1.0;
                while used(hi) > *radius {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if used(mid) > *radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                at(hi)
            }
            Self::Fixed(x) => x.clone(),
        }
    }

    /// Maximizer of `mean(grad * s)` over the set (the linear maximization oracle).
    pub fn linear_max(&self, grad: &[f64]) -> Vec<f64> {
        let n = grad.len();
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let mut s = lower.clone();
                let mut remaining = (total - mean(weight.iter().zip(lower).map(|(w, x)| w * x), n)) * n as f64;
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| (grad[b] / weight[b]).total_cmp(&(grad[a] / weight[a])));
                for j in order {
                    if remaining <= 0.0 {
                        break;
                    }
                    let cap = upper.as_ref().map_or(f64::INFINITY, |u| (u[j] - lower[j]) * weight[j]);
                    let take = remaining.min(cap);
                    s[j] += take / weight[j];
                    remaining -= take;
                }
                s
            }
            Self::Ball { center, weight, radius, floor } => {
                let mut s = center.clone();
                let mut remaining = radius * n as f64;
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| (grad[b].abs() / weight[b]).total_cmp(&(grad[a].abs() / weight[a])));
                for j in order {
                    if remaining <= 0.0 || grad[j] == 0.0 {
                        break;
                    }
                    if grad[j] > 0.0 {
                        s[j] += remaining / weight[j];
                        remaining = 0.0;
                    } else {
                        let take = remaining.min((center[j] - floor).max(0.0) * weight[j]);
                        s[j] -= take / weight[j];
                        remaining -= take;
                    }
                }
                s
            }
            Self::Fixed(x) => x.clone(),
        }
    }

    /// Constraint violation of `x` (pointwise and integral).
    pub fn violation(&self, x: &[f64]) -> (f64, f64) {
        let n = x.len();
        match self {
            Self::Budget { weight, lower, upper, total } => {
                let budget = (mean(weight.iter().zip(x).map(|(w, v)| w * v), n) - total).abs();
                let mut point = 0.0f64;
                for j in 0..n {
                    point = point.max(lower[j] - x[j]);
                    if let Some(u) = upper {
                        point = point.max(x[j] - u[j]);
                    }
                }
                (budget, point)
            }
            Self::Ball { center, weight, radius, floor } => {
                let used = mean((0..n).map(|j| weight[j] * (x[j] - center[j]).abs()), n);
                let point = x.iter().fold(0.0f64, |a, v| a.max(floor - v));
                ((used - radius).max(0.0), point)
            }
            Self::Fixed(v) => (0.0, x.iter().zip(v).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()))),
        }
    }
}

pub(crate) fn scalar_grid(x: &[f64]) -> DensityGrid {
    DensityGrid::new_unchecked(x.iter().map(|v| CMat::from_element(1, 1, Complex64::new(*v, 0.0))).collect())
        .expect("non-empty scalar grid")
}
