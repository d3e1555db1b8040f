use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GmiError, Result};
use crate::increments::gm::GMIncrementSpec;

/// One seasonal factor `(1 - B^s)^{R + D}` of a fractional multiple increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmFactor {
    pub s: u32,
    pub r: u32,
    pub d: f64,
}

/// Fractional multiple increment operator
/// `(1 - B)^{R0 + D0} prod_j (1 - B^{s_j})^{R_j + D_j}` with unit steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFmSpec")]
pub struct FMIncrementSpec {
    r0: u32,
    d0: f64,
    factors: Vec<FmFactor>,
}

#[derive(Deserialize)]
struct RawFmSpec {
    #[serde(default)]
    r0: u32,
    #[serde(default)]
    d0: f64,
    #[serde(default)]
    factors: Vec<FmFactor>,
}

impl TryFrom<RawFmSpec> for FMIncrementSpec {
    type Error = GmiError;

    fn try_from(raw: RawFmSpec) -> Result<Self> {
        FMIncrementSpec::new(raw.r0, raw.d0, raw.factors)
    }
}

impl FMIncrementSpec {
    pub fn new(r0: u32, d0: f64, factors: Vec<FmFactor>) -> Result<Self> {
        if !d0.is_finite() || factors.iter().any(|f| !f.d.is_finite()) {
            return Err(GmiError::InvalidSpec("fractional orders must be finite".into()));
        }
        if factors.iter().any(|f| f.s <= 1) {
            return Err(GmiError::InvalidSpec("seasonal periods must exceed 1".into()));
        }
        if factors.windows(2).any(|w| w[0].s >= w[1].s) {
            return Err(GmiError::InvalidSpec(
                "seasonal periods must be strictly increasing".into(),
            ));
        }
        Ok(Self { r0, d0, factors })
    }

    pub fn r0(&self) -> u32 {
        self.r0
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn factors(&self) -> &[FmFactor] {
        &self.factors
    }

    /// Whether the integrating factor `(1 - B)^{R0 + D0}` is present.
    pub fn has_integrating_factor(&self) -> bool {
        self.r0 > 0 || self.d0 != 0.0
    }

    /// The integer-order operator `(1 - B)^{R0} prod (1 - B^{s_j})^{R_j}`,
    /// dropping factors of order zero.
    pub fn integer_part(&self) -> Result<GMIncrementSpec> {
        let mut s = Vec::new();
        let mut d = Vec::new();
        if self.r0 > 0 {
            s.push(1);
            d.push(self.r0);
        }
        for f in &self.factors {
            if f.r > 0 {
                s.push(f.s);
                d.push(f.r);
            }
        }
        if s.is_empty() {
            return Err(GmiError::DegenerateOperator);
        }
        let mu = vec![1; s.len()];
        GMIncrementSpec::new(s, mu, d)
    }

    /// `(period, fractional order, label)` for every present factor; the
    /// integrating factor is labelled `D0` and seasonal factor `j` is `Dj`.
    fn labelled_orders(&self) -> Vec<(u32, f64, String)> {
        let mut out = Vec::new();
        if self.has_integrating_factor() {
            out.push((1, self.d0, "D0".to_string()));
        }
        for (j, f) in self.factors.iter().enumerate() {
            out.push((f.s, f.d, format!("D{}", j + 1)));
        }
        out
    }
}

/// One singular frequency `nu = 2 pi k / s` with its aggregated orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub nu: f64,
    /// `nu / (2 pi)` as a reduced fraction `(numerator, denominator)`.
    pub fraction: (u32, u32),
    pub d_nu: f64,
    pub d_tilde: f64,
    /// Labels of the fractional orders summed into `d_nu`.
    pub contributors: Vec<String>,
}

impl FrequencyEntry {
    pub fn is_boundary(&self) -> bool {
        self.fraction.0 == 0 || (self.fraction.0 * 2 == self.fraction.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub entries: Vec<FrequencyEntry>,
}

impl FrequencySet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds a set directly from `(nu as fraction of 2 pi, D_nu)` pairs.
    pub fn from_orders(orders: &[((u32, u32), f64)]) -> Self {
        let mut entries: Vec<FrequencyEntry> = orders
            .iter()
            .map(|&((num, den), d_nu)| {
                let (num, den) = reduce(num, den);
                make_entry(num, den, d_nu, Vec::new())
            })
            .collect();
        entries.sort_by(|a, b| a.nu.total_cmp(&b.nu));
        Self { entries }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduce(num: u32, den: u32) -> (u32, u32) {
    if num == 0 {
        return (0, 1);
    }
    let g = gcd(num, den);
    (num / g, den / g)
}

fn make_entry(num: u32, den: u32, d_nu: f64, contributors: Vec<String>) -> FrequencyEntry {
    let boundary = num == 0 || num * 2 == den;
    FrequencyEntry {
        nu: 2.0 * PI * num as f64 / den as f64,
        fraction: (num, den),
        d_nu,
        d_tilde: if boundary { d_nu / 2.0 } else { d_nu },
        contributors,
    }
}

/// Singular frequencies `M = U_j {2 pi k / s_j : k = 0..[s_j/2]}` with
/// `D_nu = sum_j D_j 1{nu in M_j}`.
pub fn frequency_set(spec: &FMIncrementSpec) -> FrequencySet {
    // keyed by the reduced fraction so that 2*pi*1/2 and 2*pi*2/4 coincide
    let mut acc: Vec<((u32, u32), f64, Vec<String>)> = Vec::new();
    for (s, d, label) in spec.labelled_orders() {
        for k in 0..=s / 2 {
            let key = reduce(k, s);
            match acc.iter_mut().find(|(f, _, _)| *f == key) {
                Some(entry) => {
                    entry.1 += d;
                    entry.2.push(label.clone());
                }
                None => acc.push((key, d, vec![label.clone()])),
            }
        }
    }
    let mut entries: Vec<FrequencyEntry> = acc
        .into_iter()
        .map(|((num, den), d, labels)| make_entry(num, den, d, labels))
        .collect();
    entries.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    FrequencySet { entries }
}

/// Gegenbauer coefficient `C_n^{(d)}(u)` from its explicit finite sum, with
/// `Gamma(d - k + n) / Gamma(d)` taken as the rising product
/// `d (d + 1) ... (d + n - k - 1)`, which stays finite for every real `d`.
pub fn gegenbauer(d: f64, u: f64, n: usize) -> Result<f64> {
    check_gegenbauer_args(d, u)?;
    let mut sum = 0.0;
    for k in 0..=n / 2 {
        let m = n - 2 * k;
        // (d)_{n-k} / (k! (n-2k)!) split into two running products
        let mut coef = 1.0;
        for i in 0..m {
            coef *= (d + i as f64) / (i + 1) as f64;
        }
        for j in 0..k {
            coef *= (d + (m + j) as f64) / (j + 1) as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (2.0 * u).powi(m as i32) * coef;
    }
    Ok(sum)
}

fn check_gegenbauer_args(d: f64, u: f64) -> Result<()> {
    if !d.is_finite() || !u.is_finite() {
        return Err(GmiError::InvalidInput("gegenbauer arguments must be finite".into()));
    }
    if !(-1.0..=1.0).contains(&u) {
        return Err(GmiError::InvalidInput(format!("gegenbauer argument u = {u} outside [-1, 1]")));
    }
    Ok(())
}

/// `C_0^{(d)}(u) .. C_len^{(d)}(u)` by the three-term recurrence.
pub fn gegenbauer_coefficients(d: f64, u: f64, len: usize) -> Result<Vec<f64>> {
    check_gegenbauer_args(d, u)?;
    let mut c = Vec::with_capacity(len + 1);
    c.push(1.0);
    if len >= 1 {
        c.push(2.0 * d * u);
    }
    for n in 2..=len {
        let nf = n as f64;
        let next = (2.0 * u * (nf + d - 1.0) * c[n - 1] - (nf + 2.0 * d - 2.0) * c[n - 2]) / nf;
        c.push(next);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSign {
    /// Coefficients of the inverse operator, built from `C^{(+D~)}`.
    Plus,
    /// Coefficients of the operator itself, built from `C^{(-D~)}`.
    Minus,
}

/// Truncated series `G^{+/-}(0..=length)` as the convolution over `nu` of the
/// per-frequency Gegenbauer streams `C_n^{(+/- D~_nu)}(cos nu)`.
pub fn gm_series(fset: &FrequencySet, sign: SeriesSign, length: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; length + 1];
    acc[0] = 1.0;
    for entry in &fset.entries {
        let order = match sign {
            SeriesSign::Plus => entry.d_tilde,
            SeriesSign::Minus => -entry.d_tilde,
        };
        let stream = gegenbauer_coefficients(order, entry.nu.cos().clamp(-1.0, 1.0), length)?;
        acc = convolve_truncated(&acc, &stream, length + 1);
    }
    Ok(acc)
}

pub(crate) fn convolve_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub nu: f64,
    pub fraction: (u32, u32),
    pub d_nu: f64,
    pub d_tilde: f64,
    pub condition: String,
    pub stationary: bool,
    pub long_memory: bool,
    pub invertible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub stationary: bool,
    pub long_memory: bool,
    /// True when every frequency satisfies `-1/2 < D_nu < 0`.
    pub invertible: bool,
    pub invertible_frequencies: Vec<f64>,
    /// Distinct stationarity conditions in frequency order, e.g. `|D0+D1| < 1/2`.
    pub conditions: Vec<String>,
    pub per_nu: Vec<FrequencyReport>,
}

/// Stationarity, long memory and invertibility of the fractional part.
pub fn classify_stationarity(spec: &FMIncrementSpec) -> StationarityReport {
    let fset = frequency_set(spec);
    let mut per_nu = Vec::with_capacity(fset.len());
    let mut conditions: Vec<String> = Vec::new();
    for e in &fset.entries {
        let condition = format!("|{}| < 1/2", e.contributors.join("+"));
        if !conditions.contains(&condition) {
            conditions.push(condition.clone());
        }
        per_nu.push(FrequencyReport {
            nu: e.nu,
            fraction: e.fraction,
            d_nu: e.d_nu,
            d_tilde: e.d_tilde,
            condition,
            stationary: e.d_nu > -0.5 && e.d_nu < 0.5,
            long_memory: e.d_nu > 0.0 && e.d_nu < 0.5,
            invertible: e.d_nu > -0.5 && e.d_nu < 0.0,
        });
    }
    let stationary = per_nu.iter().all(|r| r.stationary);
    StationarityReport {
        stationary,
        long_memory: stationary && per_nu.iter().any(|r| r.long_memory),
        invertible: !per_nu.is_empty() && per_nu.iter().all(|r| r.invertible),
        invertible_frequencies: per_nu.iter().filter(|r| r.invertible).map(|r| r.nu).collect(),
        conditions,
        per_nu,
    }
}
