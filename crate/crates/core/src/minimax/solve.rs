use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classical::{spectral_characteristic, Characteristic, ClassicalProblem, FunctionalSpec};
use crate::error::{GmiError, Result};
use crate::increments::GMIncrementSpec;
use crate::minimax::class::{scalar_grid, DensityClassSpec, MembershipReport, ResolvedClass, ScalarSet};
use crate::spectra::{DensityGrid, FrequencyGrid, SymbolGrid};

/// Relative position above a bound below which a node counts as active.
const ACTIVE_TOL: f64 = 1e-8;
/// Lower bound on `f` used when the noise class cannot keep `p` invertible.
const SIGNAL_FLOOR: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
/// Relative rounding level of a single error evaluation.
const ROUNDING: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimaxOptions {
    pub tol: f64,
    /// Stop once the duality gap, which bounds every saddle violation, is
    /// below `gap_tol * delta`.
    pub gap_tol: f64,
    pub max_iter: usize,
    pub saddle_samples: usize,
    pub seed: u64,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self { tol: 1e-7, gap_tol: 1e-6, max_iter: 500, saddle_samples: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta: f64,
    /// Upper bound on `max over the class - delta`.
    pub gap: f64,
    pub step: f64,
}

/// Lagrange multipliers of the integral constraints, fitted on active nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub signal: Option<f64>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    /// Sup-norm relative mismatch on nodes where the slack must vanish.
    pub equation: f64,
    /// Largest relative violation of the slack sign conditions.
    pub slack_sign: f64,
    /// Residual of the integral constraint.
    pub budget: f64,
    pub active_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub signal: Option<EquationResidual>,
    pub noise: Option<EquationResidual>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub n_samples: usize,
    /// `max (Delta(h0; f, g) - delta0)` over sampled admissible pairs.
    pub max_violation: f64,
    pub relative_violation: f64,
    pub left_samples: usize,
    /// `min (Delta(h; f0, g0) - delta0)` over perturbed characteristics.
    pub left_min_excess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult {
    pub class_id: String,
    pub f0: DensityGrid,
    pub g0: DensityGrid,
    pub h0: Characteristic,
    pub c0: Vec<Vec<f64>>,
    pub delta0: f64,
    pub multipliers: Multipliers,
    pub residual_report: ResidualReport,
    pub saddle_report: SaddleReport,
    pub membership: MembershipReport,
    pub converged: bool,
    pub iterations: usize,
    pub gap: f64,
    pub trace: Vec<IterationRecord>,
}

/// `Delta(h(f0, g0); f, g)`: error of the estimate optimal at `(f0, g0)`
/// when the true densities are `(f, g)`.
#[allow(clippy::too_many_arguments)]
pub fn mse_functional(
    f0: &DensityGrid,
    g0: &DensityGrid,
    f: &DensityGrid,
    g: &DensityGrid,
    fspec: &FunctionalSpec,
    spec: &GMIncrementSpec,
    grid: &FrequencyGrid,
) -> Result<f64> {
    f.check_grid(grid)?;
    g.check_grid(grid)?;
    let prob = ClassicalProblem::new(spec, f0, g0, grid)?;
    let (c, _) = prob.coefficients(fspec)?;
    let (kf, kg) = prob.kernels(fspec, &c);
    let vals: Vec<f64> = (0..grid.len())
        .map(|j| (&kf[j] * f.at(j)).trace().re + (&kg[j] * g.at(j)).trace().re)
        .collect();
    Ok(grid.mean(&vals))
}

struct Point {
    delta: f64,
    kf: Vec<f64>,
    kg: Vec<f64>,
    c: Vec<Vec<f64>>,
}

fn evaluate(
    spec: &GMIncrementSpec,
    fspec: &FunctionalSpec,
    grid: &FrequencyGrid,
    xf: &[f64],
    xg: &[f64],
) -> Result<Point> {
    let prob = ClassicalProblem::new(spec, &scalar_grid(xf), &scalar_grid(xg), grid)?;
    let (c, _) = prob.coefficients(fspec)?;
    let (kf, kg) = prob.kernels(fspec, &c);
    let kf: Vec<f64> = kf.iter().map(|m| m[(0, 0)].re).collect();
    let kg: Vec<f64> = kg.iter().map(|m| m[(0, 0)].re).collect();
    let vals: Vec<f64> = (0..xf.len()).map(|j| kf[j] * xf[j] + kg[j] * xg[j]).collect();
    Ok(Point { delta: grid.mean(&vals), kf, kg, c })
}

fn dot_mean(a: &[f64], b: &[f64], base: &[f64]) -> f64 {
    a.iter().zip(b).zip(base).map(|((k, x), y)| k * (x - y)).sum::<f64>() / a.len() as f64
}

fn duality_gap(fset: &ScalarSet, gset: &ScalarSet, pt: &Point, xf: &[f64], xg: &[f64]) -> f64 {
    let sf = fset.linear_max(&pt.kf);
    let sg = gset.linear_max(&pt.kg);
    (dot_mean(&pt.kf, &sf, xf) + dot_mean(&pt.kg, &sg, xg)).max(0.0)
}

fn metric(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let tiny = 1e-6 * m.abs().max(f64::MIN_POSITIVE);
    x.iter().map(|v| v.abs().max(tiny).powi(2)).collect()
}

struct Sets {
    signal: ScalarSet,
    noise: ScalarSet,
}

fn scalar_sets(class: &ResolvedClass, spec: &GMIncrementSpec, grid: &FrequencyGrid) -> Result<Sets> {
    let signal = class.signal_set()?;
    let noise = class.noise_set()?;
    signal.check_feasible()?;
    noise.check_feasible()?;
    let sym = SymbolGrid::new(spec, grid);
    let g_floor = noise.floor();
    let noise_keeps_invertible = g_floor.iter().enumerate().all(|(j, g)| sym.beta2(j) * g > 0.0);
    let signal = if noise_keeps_invertible || signal.is_fixed() {
        signal
    } else {
        let start = signal.start();
        let level = start.iter().sum::<f64>() / start.len() as f64;
        signal.with_floor(SIGNAL_FLOOR * level)
    };
    Ok(Sets { signal, noise })
}

/// Least-favorable pair in `class` by monotone projected ascent on the
/// concave map `(f, g) -> Delta(f, g)`, stopped by the duality gap.
pub fn solve_minimax(
    class: &DensityClassSpec,
    fspec: &FunctionalSpec,
    spec: &GMIncrementSpec,
    grid: &FrequencyGrid,
    options: &MinimaxOptions,
) -> Result<MinimaxResult> {
    let resolved = class.resolve(fspec.dim(), spec, grid)?;
    let sets = scalar_sets(&resolved, spec, grid)?;
    let mut xf = sets.signal.start();
    let mut xg = sets.noise.start();
    let scale_f = metric(&xf);
    let scale_g = metric(&xg);
    let mut pt = evaluate(spec, fspec, grid, &xf, &xg)?;

    let first_step = xf
        .iter()
        .zip(&pt.kf)
        .chain(xg.iter().zip(&pt.kg))
        .map(|(x, k)| (x * k).abs())
        .fold(0.0f64, f64::max);
    let mut t = if first_step > 0.0 { 0.1 / first_step } else { 1.0 };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut gap = duality_gap(&sets.signal, &sets.noise, &pt, &xf, &xg);
    for it in 0..=options.max_iter {
        trace.push(IterationRecord { iteration: it, delta: pt.delta, gap, step: t });
        let gap_ok = gap <= options.gap_tol * pt.delta.abs().max(f64::MIN_POSITIVE);
        if gap_ok && (it == 0 || last_change < options.tol) {
            converged = true;
            break;
        }
        if it == options.max_iter {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let yf: Vec<f64> = (0..xf.len()).map(|j| xf[j] + t * scale_f[j] * pt.kf[j]).collect();
            let yg: Vec<f64> = (0..xg.len()).map(|j| xg[j] + t * scale_g[j] * pt.kg[j]).collect();
            let nf = sets.signal.project(&yf, &scale_f);
            let ng = sets.noise.project(&yg, &scale_g);
            if nf == xf && ng == xg {
                break;
            }
            let predicted = dot_mean(&pt.kf, &nf, &xf) + dot_mean(&pt.kg, &ng, &xg);
            if let Ok(np) = evaluate(spec, fspec, grid, &nf, &ng) {
                // concavity: Delta(new) >= Delta(old) + <grad Delta(new), new - old>
                let certified = dot_mean(&np.kf, &nf, &xf) + dot_mean(&np.kg, &ng, &xg) > 0.0
                    && np.delta >= pt.delta - ROUNDING * pt.delta.abs();
                if np.delta >= pt.delta + ARMIJO * predicted.max(0.0) || certified {
                    accepted = Some((nf, ng, np));
                    break;
                }
            }
            t *= 0.25;
        }
        let Some((nf, ng, np)) = accepted else {
            break;
        };
        // Barzilai-Borwein step in the scaled metric
        let mut ss = 0.0;
        let mut sy = 0.0;
        for j in 0..xf.len() {
            let s = nf[j] - xf[j];
            ss += s * s / scale_f[j];
            sy += s * (np.kf[j] - pt.kf[j]);
            let s = ng[j] - xg[j];
            ss += s * s / scale_g[j];
            sy += s * (np.kg[j] - pt.kg[j]);
        }
        t = if sy < 0.0 && ss > 0.0 { ss / -sy } else { t * 4.0 };
        last_change = (np.delta - pt.delta).abs() / np.delta.abs().max(f64::MIN_POSITIVE);
        xf = nf;
        xg = ng;
        pt = np;
        gap = duality_gap(&sets.signal, &sets.noise, &pt, &xf, &xg);
    }
    if !pt.delta.is_finite() {
        return Err(GmiError::Inconsistent("ascent produced a non-finite error value".into()));
    }

    let f0 = scalar_grid(&xf);
    let g0 = scalar_grid(&xg);
    let (signal_res, signal_mult) = set_residual(&sets.signal, &pt.kf, &xf);
    let (noise_res, noise_mult) = set_residual(&sets.noise, &pt.kg, &xg);
    let h0 = spectral_characteristic(spec, &f0, &g0, &pt.c, fspec, grid)?;
    let mut result = MinimaxResult {
        class_id: class.id(),
        membership: resolved.membership(&f0, &g0, grid),
        f0,
        g0,
        h0,
        c0: pt.c,
        delta0: pt.delta,
        multipliers: Multipliers { signal: signal_mult, noise: noise_mult },
        residual_report: ResidualReport { signal: signal_res, noise: noise_res },
        saddle_report: SaddleReport {
            n_samples: 0,
            max_violation: 0.0,
            relative_violation: 0.0,
            left_samples: 0,
            left_min_excess: 0.0,
            passed: true,
        },
        converged,
        iterations: trace.len() - 1,
        gap,
        trace,
    };
    result.saddle_report = saddle_check(&result, class, fspec, spec, grid, options.saddle_samples, options.seed)?;
    Ok(result)
}

fn least_squares_ratio(k: &[f64], w: &[f64], nodes: &[usize]) -> Option<f64> {
    let num: f64 = nodes.iter().map(|&j| k[j] * w[j]).sum();
    let den: f64 = nodes.iter().map(|&j| w[j] * w[j]).sum();
    (den > 0.0).then(|| num / den)
}

/// Multiplier fit and stationarity residuals of one side, in the kernel
/// form `K = theta * weight + slack`.
fn set_residual(set: &ScalarSet, k: &[f64], x: &[f64]) -> (Option<EquationResidual>, Option<f64>) {
    let n = x.len();
    match set {
        ScalarSet::Fixed(_) => (None, None),
        ScalarSet::Budget { weight, lower, upper, .. } => {
            let level = x.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            let tol = ACTIVE_TOL * level.max(f64::MIN_POSITIVE);
            let at_lower = |j: usize| x[j] <= lower[j] + tol;
            let at_upper = |j: usize| upper.as_ref().is_some_and(|u| x[j] >= u[j] - tol);
            let free: Vec<usize> = (0..n).filter(|&j| !at_lower(j) && !at_upper(j)).collect();
            let theta = least_squares_ratio(k, weight, &free).unwrap_or_else(|| {
                // every node is at a bound: any theta between the bound ratios works
                let lo = (0..n).filter(|&j| at_upper(j)).map(|j| k[j] / weight[j]).fold(f64::INFINITY, f64::min);
                let hi = (0..n).filter(|&j| at_lower(j)).map(|j| k[j] / weight[j]).fold(f64::NEG_INFINITY, f64::max);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo,
                    (false, true) => hi,
                    _ => 0.0,
                }
            });
            let norm = theta.abs().max(f64::MIN_POSITIVE);
            let equation =
                free.iter().map(|&j| (k[j] / weight[j] - theta).abs() / norm).fold(0.0, f64::max);
            let mut slack_sign = 0.0f64;
            for j in 0..n {
                let r = k[j] / weight[j] - theta;
                if at_lower(j) && !at_upper(j) {
                    slack_sign = slack_sign.max(r / norm);
                } else if at_upper(j) && !at_lower(j) {
                    slack_sign = slack_sign.max(-r / norm);
                }
            }
            let budget = set.violation(x).0;
            (Some(EquationResidual { equation, slack_sign, budget, active_nodes: free.len() }), Some(theta))
        }
        ScalarSet::Ball { center, weight, floor, .. } => {
            let level = center.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            let tol = ACTIVE_TOL * level.max(f64::MIN_POSITIVE);
            let raised: Vec<usize> = (0..n).filter(|&j| x[j] > center[j] + tol).collect();
            let lowered: Vec<usize> = (0..n).filter(|&j| x[j] < center[j] - tol && x[j] > floor + tol).collect();
            let moved: Vec<usize> = raised.iter().chain(&lowered).copied().collect();
            let signed: Vec<f64> = (0..n).map(|j| if x[j] < center[j] - tol { -k[j] } else { k[j] }).collect();
            let Some(beta2) = least_squares_ratio(&signed, weight, &moved) else {
                return (None, None);
            };
            let norm = beta2.abs().max(f64::MIN_POSITIVE);
            let equation =
                moved.iter().map(|&j| (signed[j] / weight[j] - beta2).abs() / norm).fold(0.0, f64::max);
            let slack_sign = (0..n)
                .filter(|&j| (x[j] - center[j]).abs() <= tol)
                .map(|j| (k[j].abs() / weight[j] - beta2) / norm)
                .fold(0.0, f64::max);
            let used = (0..n).map(|j| weight[j] * (x[j] - center[j]).abs()).sum::<f64>() / n as f64;
            let ScalarSet::Ball { radius, .. } = set else { unreachable!() };
            let budget = (used - radius).abs();
            (Some(EquationResidual { equation, slack_sign, budget, active_nodes: moved.len() }), Some(beta2))
        }
    }
}

/// Sampled check of both saddle inequalities at a computed optimum.
pub fn saddle_check(
    result: &MinimaxResult,
    class: &DensityClassSpec,
    fspec: &FunctionalSpec,
    spec: &GMIncrementSpec,
    grid: &FrequencyGrid,
    n_samples: usize,
    seed: u64,
) -> Result<SaddleReport> {
    if n_samples == 0 {
        return Ok(SaddleReport {
            n_samples: 0,
            max_violation: 0.0,
            relative_violation: 0.0,
            left_samples: 0,
            left_min_excess: 0.0,
            passed: true,
        });
    }
    let resolved = class.resolve(fspec.dim(), spec, grid)?;
    let sets = scalar_sets(&resolved, spec, grid)?;
    let f0: Vec<f64> = (0..grid.len()).map(|j| result.f0.scalar(j)).collect();
    let g0: Vec<f64> = (0..grid.len()).map(|j| result.g0.scalar(j)).collect();
    let prob = ClassicalProblem::new(spec, &result.f0, &result.g0, grid)?;
    let (c, _) = prob.coefficients(fspec)?;
    let (kf, kg) = prob.kernels(fspec, &c);
    let kf: Vec<f64> = kf.iter().map(|m| m[(0, 0)].re).collect();
    let kg: Vec<f64> = kg.iter().map(|m| m[(0, 0)].re).collect();
    let value = |f: &[f64], g: &[f64]| -> f64 {
        (0..f.len()).map(|j| kf[j] * f[j] + kg[j] * g[j]).sum::<f64>() / f.len() as f64
    };
    let delta0 = value(&f0, &g0);
    let scale_f = metric(&f0);
    let scale_g = metric(&g0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let yf: Vec<f64> = f0.iter().map(|x| x * (1.0 + rng.random_range(-0.1..0.1))).collect();
        let yg: Vec<f64> = g0.iter().map(|x| x * (1.0 + rng.random_range(-0.1..0.1))).collect();
        let pf = sets.signal.project(&yf, &scale_f);
        let pg = sets.noise.project(&yg, &scale_g);
        max_violation = max_violation.max(value(&pf, &pg) - delta0);
    }

    // left inequality: add observable terms (chi / beta) x(k) e^{i lambda k}
    let horizon = (fspec.horizon() + spec.n_gamma()) as i64;
    let observed: Vec<i64> = (-3..=-1).chain(horizon + 1..=horizon + 3).collect();
    let base = prob.characteristic_mse(fspec, &result.h0.h)?;
    let sym = SymbolGrid::new(spec, grid);
    let amp = 0.1 * result.c0.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    let left_samples = 10;
    let mut left_min_excess = f64::INFINITY;
    for _ in 0..left_samples {
        let x: Vec<f64> = observed.iter().map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
        let h: Vec<Vec<Complex64>> = (0..grid.len())
            .map(|j| {
                let lam = grid.lambda(j);
                let shift: Complex64 =
                    observed.iter().zip(&x).map(|(k, xk)| Complex64::from_polar(*xk, lam * *k as f64)).sum();
                let extra = shift * sym.chi[j] / sym.beta[j];
                result.h0.h[j].iter().map(|hj| hj + extra).collect()
            })
            .collect();
        left_min_excess = left_min_excess.min(prob.characteristic_mse(fspec, &h)? - base);
    }
    let scale = delta0.abs().max(f64::MIN_POSITIVE);
    let relative_violation = max_violation.max(0.0) / scale;
    Ok(SaddleReport {
        n_samples,
        max_violation,
        relative_violation,
        left_samples,
        left_min_excess,
        passed: relative_violation <= 1e-6 && left_min_excess >= -1e-10 * scale,
    })
}

/// Residuals of the class stationarity equations at a result.
pub fn extremal_residuals(
    result: &MinimaxResult,
    class: &DensityClassSpec,
    fspec: &FunctionalSpec,
    spec: &GMIncrementSpec,
    grid: &FrequencyGrid,
) -> Result<ResidualReport> {
    let resolved = class.resolve(fspec.dim(), spec, grid)?;
    let sets = scalar_sets(&resolved, spec, grid)?;
    let prob = ClassicalProblem::new(spec, &result.f0, &result.g0, grid)?;
    let (c, _) = prob.coefficients(fspec)?;
    let (kf, kg) = prob.kernels(fspec, &c);
    let kf: Vec<f64> = kf.iter().map(|m| m[(0, 0)].re).collect();
    let kg: Vec<f64> = kg.iter().map(|m| m[(0, 0)].re).collect();
    let xf: Vec<f64> = (0..grid.len()).map(|j| result.f0.scalar(j)).collect();
    let xg: Vec<f64> = (0..grid.len()).map(|j| result.g0.scalar(j)).collect();
    Ok(ResidualReport {
        signal: set_residual(&sets.signal, &kf, &xf).0,
        noise: set_residual(&sets.noise, &kg, &xg).0,
    })
}
