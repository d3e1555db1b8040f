use num_complex::Complex64;

use crate::increments::GMIncrementSpec;
use crate::spectra::grid::FrequencyGrid;

/// `chi(e^{-i lambda}) = prod_j (1 - e^{-i lambda mu_j s_j})^{d_j}` and
/// `beta(i lambda) = prod_j prod_{|k| <= [s_j/2]} (i lambda - 2 pi i k / s_j)^{d_j}`.
pub fn symbols(spec: &GMIncrementSpec, lambda: f64) -> (Complex64, Complex64) {
    let mut chi = Complex64::new(1.0, 0.0);
    let mut beta = Complex64::new(1.0, 0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    for ((&s, &mu), &d) in spec.s().iter().zip(spec.mu()).zip(spec.d()) {
        let lag = (s as f64) * (mu as f64);
        let factor = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -lambda * lag);
        let half = (s / 2) as i64;
        let mut b = Complex64::new(1.0, 0.0);
        for k in -half..=half {
            b *= Complex64::new(0.0, lambda - two_pi * k as f64 / s as f64);
        }
        chi *= factor.powu(d);
        beta *= b.powu(d);
    }
    (chi, beta)
}

/// Symbol values sampled once per grid node.
#[derive(Debug, Clone)]
pub struct SymbolGrid {
    pub chi: Vec<Complex64>,
    pub beta: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn new(spec: &GMIncrementSpec, grid: &FrequencyGrid) -> Self {
        let (chi, beta) = grid.nodes().iter().map(|&l| symbols(spec, l)).unzip();
        Self { chi, beta }
    }

    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn beta2(&self, j: usize) -> f64 {
        self.beta[j].norm_sqr()
    }

    pub fn chi2(&self, j: usize) -> f64 {
        self.chi[j].norm_sqr()
    }

    /// `|beta|^2 / |chi|^2` at node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        self.beta2(j) / self.chi2(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn first_difference_at_pi() {
        let spec = GMIncrementSpec::single(1, 1, 1).unwrap();
        let (chi, beta) = symbols(&spec, PI);
        assert_abs_diff_eq!(chi.re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(beta.re, 0.0);
        assert_abs_diff_eq!(beta.im, PI);
    }

    #[test]
    fn ratio_limits_at_zero() {
        let spec = GMIncrementSpec::single(1, 1, 1).unwrap();
        let (chi, beta) = symbols(&spec, 1e-5);
        assert_abs_diff_eq!(beta.norm_sqr() / chi.norm_sqr(), 1.0, epsilon = 1e-8);

        let spec = GMIncrementSpec::single(2, 1, 1).unwrap();
        let lam = 1e-4;
        let (chi, beta) = symbols(&spec, lam);
        let ratio = beta.norm_sqr() / chi.norm_sqr();
        let direct = (lam * (lam - PI) * (lam + PI)).powi(2)
            / (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -2.0 * lam)).norm_sqr();
        assert_abs_diff_eq!(ratio, direct, epsilon = 1e-9 * direct);
        assert!((ratio - PI.powi(4) / 4.0).abs() < 1e-5 * ratio);
    }

    #[test]
    fn beta_ignores_step() {
        let a = GMIncrementSpec::single(3, 1, 2).unwrap();
        let b = GMIncrementSpec::single(3, 2, 2).unwrap();
        let (_, ba) = symbols(&a, 0.7);
        let (_, bb) = symbols(&b, 0.7);
        assert_eq!(ba, bb);
    }
}
