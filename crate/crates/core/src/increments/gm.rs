use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};

/// Generalized multiple increment operator `prod_i (1 - B^{mu_i s_i})^{d_i}`.
///
/// Steps are restricted to positive integers; a negative step in a serialized
/// spec is rejected at parse time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGmSpec")]
pub struct GMIncrementSpec {
    s: Vec<u32>,
    mu: Vec<u32>,
    d: Vec<u32>,
}

#[derive(Deserialize)]
struct RawGmSpec {
    s: Vec<i64>,
    mu: Vec<i64>,
    d: Vec<i64>,
}

impl TryFrom<RawGmSpec> for GMIncrementSpec {
    type Error = GmiError;

    fn try_from(raw: RawGmSpec) -> Result<Self> {
        if raw.mu.iter().any(|&m| m < 0) {
            return Err(GmiError::InvalidSpec(
                "negative steps are not supported; use positive steps mu >= 1".into(),
            ));
        }
        let conv = |v: Vec<i64>, what: &str| -> Result<Vec<u32>> {
            v.into_iter()
                .map(|x| {
                    u32::try_from(x).map_err(|_| {
                        GmiError::InvalidSpec(format!("{what} entry {x} out of range"))
                    })
                })
                .collect()
        };
        GMIncrementSpec::new(conv(raw.s, "s")?, conv(raw.mu, "mu")?, conv(raw.d, "d")?)
    }
}

impl GMIncrementSpec {
    pub fn new(s: Vec<u32>, mu: Vec<u32>, d: Vec<u32>) -> Result<Self> {
        let r = s.len();
        if r == 0 {
            return Err(GmiError::InvalidSpec("at least one factor is required".into()));
        }
        if mu.len() != r || d.len() != r {
            return Err(GmiError::InvalidSpec(format!(
                "factor vectors must have equal length (s: {}, mu: {}, d: {})",
                r,
                mu.len(),
                d.len()
            )));
        }
        if s.contains(&0) {
            return Err(GmiError::InvalidSpec("seasonal periods must be >= 1".into()));
        }
        if mu.contains(&0) {
            return Err(GmiError::InvalidSpec("steps must be >= 1".into()));
        }
        if d.iter().all(|&x| x == 0) {
            return Err(GmiError::DegenerateOperator);
        }
        Ok(Self { s, mu, d })
    }

    /// Single factor `(1 - B^{mu s})^d`.
    pub fn single(s: u32, mu: u32, d: u32) -> Result<Self> {
        Self::new(vec![s], vec![mu], vec![d])
    }

    pub fn r(&self) -> usize {
        self.s.len()
    }

    pub fn s(&self) -> &[u32] {
        &self.s
    }

    pub fn mu(&self) -> &[u32] {
        &self.mu
    }

    pub fn d(&self) -> &[u32] {
        &self.d
    }

    /// Total differencing order `sum d_i`.
    pub fn total_order(&self) -> u32 {
        self.d.iter().sum()
    }

    /// Degree of the operator polynomial, `n(gamma) = sum mu_i s_i d_i`.
    pub fn n_gamma(&self) -> usize {
        self.factors().map(|(lag, d)| lag * d as usize).sum()
    }

    /// Same seasonal structure with a different step vector.
    pub fn with_steps(&self, mu: &[u32]) -> Result<Self> {
        Self::new(self.s.clone(), mu.to_vec(), self.d.clone())
    }

    /// `(lag, order)` pairs with `lag = mu_i s_i`.
    pub(crate) fn factors(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.s
            .iter()
            .zip(&self.mu)
            .zip(&self.d)
            .map(|((&s, &mu), &d)| (s as usize * mu as usize, d))
    }
}

fn checked_mul_add(acc: i128, a: i128, b: i128, index: usize) -> Result<i128> {
    a.checked_mul(b)
        .and_then(|p| acc.checked_add(p))
        .ok_or(GmiError::Overflow { index })
}

/// Multiplies `poly` in place by `(1 - x^lag)`, truncating at `len`.
fn mul_one_minus(poly: &mut [i128], lag: usize) -> Result<()> {
    for k in (lag..poly.len()).rev() {
        poly[k] = poly[k]
            .checked_sub(poly[k - lag])
            .ok_or(GmiError::Overflow { index: k })?;
    }
    Ok(())
}

/// Multiplies `series` in place by `1 / (1 - x^lag)`, truncating at `len`.
fn div_one_minus(series: &mut [i128], lag: usize) -> Result<()> {
    for k in lag..series.len() {
        series[k] = series[k]
            .checked_add(series[k - lag])
            .ok_or(GmiError::Overflow { index: k })?;
    }
    Ok(())
}

/// Coefficients `e_gamma(0..=n_gamma)` of the increment operator polynomial.
pub fn expand_operator(spec: &GMIncrementSpec) -> Result<Vec<i128>> {
    let n = spec.n_gamma();
    let mut poly = vec![0i128; n + 1];
    poly[0] = 1;
    for (lag, d) in spec.factors() {
        for _ in 0..d {
            mul_one_minus(&mut poly, lag)?;
        }
    }
    Ok(poly)
}

/// Power-series coefficients `d_mu(0..=length)` of the inverse operator
/// `prod_i (1 - x^{mu_i s_i})^{-d_i}`.
pub fn inverse_series(spec: &GMIncrementSpec, length: usize) -> Result<Vec<i128>> {
    let mut series = vec![0i128; length + 1];
    series[0] = 1;
    for (lag, d) in spec.factors() {
        for _ in 0..d {
            div_one_minus(&mut series, lag)?;
        }
    }
    Ok(series)
}

/// Exact truncated product of two integer series.
pub fn convolve_exact(a: &[i128], b: &[i128], len: usize) -> Result<Vec<i128>> {
    let mut out = vec![0i128; len];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0i128;
        for l in 0..=k {
            if l < a.len() && k - l < b.len() {
                acc = checked_mul_add(acc, a[l], b[k - l], k)?;
            }
        }
        *slot = acc;
    }
    Ok(out)
}

pub fn to_f64(v: &[i128]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_simple_operators() {
        let e = expand_operator(&GMIncrementSpec::single(1, 1, 1).unwrap()).unwrap();
        assert_eq!(e, vec![1, -1]);
        let e = expand_operator(&GMIncrementSpec::single(2, 1, 2).unwrap()).unwrap();
        assert_eq!(e, vec![1, 0, -2, 0, 1]);
        let spec = GMIncrementSpec::new(vec![2, 3], vec![1, 1], vec![1, 1]).unwrap();
        assert_eq!(expand_operator(&spec).unwrap(), vec![1, 0, -1, -1, 0, 1]);
    }

    #[test]
    fn degenerate_operator_rejected() {
        let err = GMIncrementSpec::new(vec![1, 2], vec![1, 1], vec![0, 0]).unwrap_err();
        assert!(matches!(err, GmiError::DegenerateOperator));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(GMIncrementSpec::new(vec![], vec![], vec![]).is_err());
        assert!(GMIncrementSpec::new(vec![0], vec![1], vec![1]).is_err());
        assert!(GMIncrementSpec::new(vec![1], vec![0], vec![1]).is_err());
        assert!(GMIncrementSpec::new(vec![1, 2], vec![1], vec![1]).is_err());
    }

    #[test]
    fn negative_step_rejected_when_parsing() {
        let err = serde_json::from_str::<GMIncrementSpec>(r#"{"s":[1],"mu":[-1],"d":[1]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("negative steps"));
        let ok: GMIncrementSpec =
            serde_json::from_str(r#"{"s":[12],"mu":[1],"d":[1]}"#).unwrap();
        assert_eq!(ok.n_gamma(), 12);
    }

    #[test]
    fn inverse_series_examples() {
        let geo = inverse_series(&GMIncrementSpec::single(1, 1, 1).unwrap(), 4).unwrap();
        assert_eq!(geo, vec![1, 1, 1, 1, 1]);
        let lin = inverse_series(&GMIncrementSpec::single(1, 1, 2).unwrap(), 4).unwrap();
        assert_eq!(lin, vec![1, 2, 3, 4, 5]);
        let spec = GMIncrementSpec::new(vec![2, 3], vec![1, 1], vec![1, 1]).unwrap();
        assert_eq!(inverse_series(&spec, 7).unwrap(), vec![1, 0, 1, 1, 1, 1, 2, 1]);
    }

    #[test]
    fn steps_scale_the_lag() {
        let spec = GMIncrementSpec::single(1, 2, 1).unwrap();
        assert_eq!(expand_operator(&spec).unwrap(), vec![1, 0, -1]);
        assert_eq!(spec.n_gamma(), 2);
    }
}
