use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};
use crate::increments::{expand_operator, inverse_series, to_f64, GMIncrementSpec};

/// Target functional `A_N xi = sum_{k=0}^{N} a(k)^T xi(k)` over vector values
/// of dimension `T`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawFunctional")]
pub struct FunctionalSpec {
    a: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawFunctional {
    #[serde(default)]
    n: Option<usize>,
    a: Vec<Vec<f64>>,
}

impl TryFrom<RawFunctional> for FunctionalSpec {
    type Error = GmiError;

    fn try_from(raw: RawFunctional) -> Result<Self> {
        if let Some(n) = raw.n {
            if n + 1 != raw.a.len() {
                return Err(GmiError::DimensionMismatch { expected: n + 1, got: raw.a.len() });
            }
        }
        FunctionalSpec::new(raw.a)
    }
}

impl Serialize for FunctionalSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FunctionalSpec", 2)?;
        st.serialize_field("n", &self.horizon())?;
        st.serialize_field("a", &self.a)?;
        st.end()
    }
}

impl FunctionalSpec {
    pub fn new(a: Vec<Vec<f64>>) -> Result<Self> {
        let dim = a.first().map(|v| v.len()).unwrap_or(0);
        if a.is_empty() || dim == 0 {
            return Err(GmiError::InvalidInput("functional needs at least one non-empty weight".into()));
        }
        if let Some(v) = a.iter().find(|v| v.len() != dim) {
            return Err(GmiError::DimensionMismatch { expected: dim, got: v.len() });
        }
        if a.iter().flatten().any(|x| !x.is_finite()) {
            return Err(GmiError::InvalidInput("functional weights must be finite".into()));
        }
        Ok(Self { a })
    }

    pub fn scalar(a: &[f64]) -> Result<Self> {
        Self::new(a.iter().map(|&x| vec![x]).collect())
    }

    /// Horizon `N`; the unknown values are `xi(0..=N)`.
    pub fn horizon(&self) -> usize {
        self.a.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.a[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { a: self.a.iter().map(|v| v.iter().map(|x| alpha * x).collect()).collect() }
    }
}

/// Scalar functional `A_M theta = sum_{k=0}^{M} a(k) theta(k)` of a
/// periodically stationary sequence with period `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFunctionalSpec {
    pub period: usize,
    pub a: Vec<f64>,
}

impl PeriodicFunctionalSpec {
    pub fn new(period: usize, a: Vec<f64>) -> Result<Self> {
        if period == 0 || a.is_empty() {
            return Err(GmiError::InvalidInput("period and weights must be non-empty".into()));
        }
        Ok(Self { period, a })
    }

    pub fn horizon(&self) -> usize {
        self.a.len() - 1
    }
}

/// Blocks a periodic scalar functional into vector form:
/// `a_p(m) = a(m T + p - 1)`, zero beyond `M`, with `N = [M / T]`.
pub fn lift_periodic(p: &PeriodicFunctionalSpec) -> Result<FunctionalSpec> {
    let t = p.period;
    let n = p.horizon() / t;
    let a = (0..=n)
        .map(|m| (0..t).map(|q| p.a.get(m * t + q).copied().unwrap_or(0.0)).collect())
        .collect();
    FunctionalSpec::new(a)
}

fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += alpha * v;
    }
}

/// `b(k) = sum_{m=k}^{N} d_mu(m - k) a(m)`.
pub fn transform_b(spec: &GMIncrementSpec, fspec: &FunctionalSpec) -> Result<Vec<Vec<f64>>> {
    let n = fspec.horizon();
    let d = to_f64(&inverse_series(spec, n)?);
    let a = fspec.weights();
    Ok((0..=n)
        .map(|k| {
            let mut acc = vec![0.0; fspec.dim()];
            for m in k..=n {
                axpy(&mut acc, d[m - k], &a[m]);
            }
            acc
        })
        .collect())
}

/// `a_mu(m) = sum_{l} e(l - m + n_gamma) a(l)` for `m = 0..=N + n_gamma`,
/// the sum running over `max(m - n_gamma, 0) <= l <= min(m, N)`.
pub fn coeffs_a_mu(spec: &GMIncrementSpec, fspec: &FunctionalSpec) -> Result<Vec<Vec<f64>>> {
    let e = to_f64(&expand_operator(spec)?);
    let ng = spec.n_gamma();
    let n = fspec.horizon();
    let a = fspec.weights();
    Ok((0..=n + ng)
        .map(|m| {
            let mut acc = vec![0.0; fspec.dim()];
            for l in m.saturating_sub(ng)..=m.min(n) {
                axpy(&mut acc, e[l + ng - m], &a[l]);
            }
            acc
        })
        .collect())
}

/// Initial-value weights `v(k) = sum_{l=0}^{min(N, k + n_gamma)} e(l - k) b(l)`
/// for `k = -n_gamma..=-1`, returned in ascending `k`.
pub fn v_coeffs(spec: &GMIncrementSpec, b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let e = to_f64(&expand_operator(spec)?);
    let ng = spec.n_gamma() as i64;
    let n = b.len() as i64 - 1;
    let dim = b.first().map_or(0, |v| v.len());
    Ok((-ng..=-1)
        .map(|k| {
            let mut acc = vec![0.0; dim];
            for l in 0..=n.min(k + ng) {
                axpy(&mut acc, e[(l - k) as usize], &b[l as usize]);
            }
            acc
        })
        .collect())
}
