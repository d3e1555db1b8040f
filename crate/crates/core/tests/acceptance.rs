//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use gmi_core::classical::{interpolate, lift_periodic, ClassicalProblem, FunctionalSpec, PeriodicFunctionalSpec};
use gmi_core::increments::{
    classify_stationarity, convolve_exact, expand_operator, gegenbauer_coefficients, gm_series, inverse_series,
    FMIncrementSpec, FmFactor, FrequencySet, GMIncrementSpec, SeriesSign,
};
use gmi_core::minimax::{solve_minimax, DensityClassSpec, MinimaxOptions, NoiseClass, SignalClass};
use gmi_core::oracle::{convergence_table, DEFAULT_SCHEDULE};
use gmi_core::spectra::{DensityGrid, DensityModel, FrequencyGrid, SymbolGrid};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> std::result::Result<(), String> {
    let e = t.elapsed();
    ensure(e < limit, format!("{what} took {e:?}, limit {limit:?}"))
}

fn random_gm(rng: &mut ChaCha20Rng) -> GMIncrementSpec {
    loop {
        let r = rng.random_range(1..=3);
        let s = (0..r).map(|_| rng.random_range(1..=12)).collect();
        let mu = (0..r).map(|_| rng.random_range(1..=4)).collect();
        let d = (0..r).map(|_| rng.random_range(0..=3)).collect();
        if let Ok(spec) = GMIncrementSpec::new(s, mu, d) {
            return spec;
        }
    }
}

fn coefficient_identities() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for case in 0..50 {
        let spec = random_gm(&mut rng);
        let e = expand_operator(&spec).map_err(|e| e.to_string())?;
        let d = inverse_series(&spec, 64).map_err(|e| e.to_string())?;
        let conv = convolve_exact(&e, &d, 65).map_err(|e| e.to_string())?;
        let delta = conv.iter().enumerate().all(|(k, &x)| x == i128::from(k == 0));
        ensure(delta, format!("case {case} {spec:?}: not a delta sequence"))?;
    }
    within(t, Duration::from_secs(1), "50 specs")?;
    Ok(format!("50 specs exact on 0..64 in {:?}", t.elapsed()))
}

fn example_operators(a: f64, b: f64) -> [FMIncrementSpec; 3] {
    [
        FMIncrementSpec::new(1, a, vec![FmFactor { s: 2, r: 1, d: b }]).unwrap(),
        FMIncrementSpec::new(0, 0.0, vec![FmFactor { s: 2, r: 1, d: a }, FmFactor { s: 3, r: 1, d: b }]).unwrap(),
        FMIncrementSpec::new(0, 0.0, vec![FmFactor { s: 2, r: 1, d: a }, FmFactor { s: 4, r: 1, d: b }]).unwrap(),
    ]
}

fn gegenbauer_identity() -> Check {
    let mut worst: f64 = 0.0;
    for (a, b) in [(0.2, 0.2), (-0.3, 0.1), (0.1, -0.35), (0.25, 0.2)] {
        for op in example_operators(a, b) {
            let fset = gmi_core::increments::frequency_set(&op);
            ensure(
                fset.entries.iter().all(|e| e.d_tilde.abs() <= 0.45),
                format!("fixture {op:?} leaves |D~| <= 0.45"),
            )?;
            let orders: Vec<((u32, u32), f64)> = fset.entries.iter().map(|e| (e.fraction, e.d_nu)).collect();
            let fset = FrequencySet::from_orders(&orders);
            let plus = gm_series(&fset, SeriesSign::Plus, 512).map_err(|e| e.to_string())?;
            let minus = gm_series(&fset, SeriesSign::Minus, 512).map_err(|e| e.to_string())?;
            for m in 0..=512 {
                let v: f64 = (0..=m).map(|k| plus[k] * minus[m - k]).sum();
                worst = worst.max((v - f64::from(u8::from(m == 0))).abs());
            }
        }
    }
    ensure(worst <= 1e-6, format!("identity residual {worst:e}"))?;
    let z: f64 = 0.3;
    let mut gen_worst: f64 = 0.0;
    for d in [-0.45, -0.2, 0.1, 0.45] {
        for u in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let c = gegenbauer_coefficients(d, u, 60).map_err(|e| e.to_string())?;
            let partial: f64 = c.iter().rev().fold(0.0, |acc, cn| acc * z + cn);
            gen_worst = gen_worst.max((partial - (1.0 - 2.0 * u * z + z * z).powf(-d)).abs());
        }
    }
    ensure(gen_worst <= 1e-8, format!("generating function residual {gen_worst:e}"))?;
    Ok(format!("identity residual {worst:.1e}, generating function {gen_worst:.1e}"))
}

fn stationarity_classifier() -> Check {
    let expected: [&[&str]; 3] = [
        &["|D0+D1|<1/2", "|D1|<1/2"],
        &["|D1+D2|<1/2", "|D2|<1/2", "|D1|<1/2"],
        &["|D1+D2|<1/2", "|D2|<1/2"],
    ];
    for (op, want) in example_operators(0.1, 0.1).iter().zip(expected) {
        let got: Vec<String> =
            classify_stationarity(op).conditions.iter().map(|c| c.split_whitespace().collect()).collect();
        ensure(got == want, format!("{got:?} != {want:?}"))?;
    }
    let r = classify_stationarity(&example_operators(0.2, 0.2)[0]);
    ensure(r.stationary && r.long_memory, "D0 = D1 = 0.2 should be stationary long memory")?;
    let r = classify_stationarity(&example_operators(0.4, 0.2)[0]);
    ensure(!r.stationary, "D0 = 0.4, D1 = 0.2 should be non-stationary")?;
    let r = classify_stationarity(&example_operators(-0.3, 0.1)[1]);
    ensure(r.stationary && r.long_memory && !r.invertible, "D1 = -0.3, D2 = 0.1 misclassified")?;
    Ok("three condition sets reproduced".into())
}

/// Coefficients of `1 / prod (1 - x^{mu s})^d` by long division in floating point.
fn inverse_by_division(spec: &GMIncrementSpec, len: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for i in 0..spec.r() {
        let lag = (spec.mu()[i] * spec.s()[i]) as usize;
        for _ in 0..spec.d()[i] {
            let mut next = vec![0.0; poly.len() + lag];
            for (k, &c) in poly.iter().enumerate() {
                next[k] += c;
                next[k + lag] -= c;
            }
            poly = next;
        }
    }
    let mut inv = vec![0.0; len + 1];
    for k in 0..=len {
        let acc: f64 = (1..=k.min(poly.len() - 1)).map(|l| poly[l] * inv[k - l]).sum();
        inv[k] = (f64::from(u8::from(k == 0)) - acc) / poly[0];
    }
    inv
}

fn closed_form_collapse() -> Check {
    let t = Instant::now();
    let grid = FrequencyGrid::new(1 << 12).unwrap();
    let specs = [
        GMIncrementSpec::single(1, 1, 1).unwrap(),
        GMIncrementSpec::single(4, 1, 1).unwrap(),
        GMIncrementSpec::new(vec![1, 3], vec![2, 1], vec![1, 1]).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for spec in &specs {
        let sym = SymbolGrid::new(spec, &grid);
        let f = DensityGrid::from_scalar(&(0..grid.len()).map(|j| sym.weight(j)).collect::<Vec<_>>()).unwrap();
        let g = DensityGrid::zeros(1, grid.len());
        let prob = ClassicalProblem::new(spec, &f, &g, &grid).map_err(|e| e.to_string())?;
        for a in [vec![1.0], vec![1.0, -0.7], vec![0.5, 1.0, -2.0, 0.25]] {
            let n = a.len() - 1;
            let blocks = prob.blocks(n);
            let eye = DMatrix::<f64>::identity(blocks.p.nrows(), blocks.p.ncols());
            let perr = (&blocks.p - eye).amax();
            ensure(perr <= 1e-8, format!("P differs from I by {perr:e}"))?;
            let d = inverse_by_division(spec, n);
            let b: Vec<f64> = (0..=n).map(|k| (k..=n).map(|m| d[m - k] * a[m]).sum()).collect();
            let norm2: f64 = b.iter().map(|x| x * x).sum();
            let out = prob.solve(&FunctionalSpec::scalar(&a).unwrap()).map_err(|e| e.to_string())?;
            ensure(out.solution.c.len() == n + spec.n_gamma() + 1, "c has wrong length")?;
            for (k, ck) in out.solution.c.iter().enumerate() {
                let want = b.get(k).copied().unwrap_or(0.0);
                worst = worst.max((ck[0] - want).abs());
            }
            let derr = (out.solution.delta - norm2).abs();
            ensure(derr <= 1e-8 * norm2.max(1.0), format!("delta {} vs {norm2}", out.solution.delta))?;
            worst = worst.max(derr);
        }
    }
    ensure(worst <= 1e-8, format!("coefficient error {worst:e}"))?;
    within(t, Duration::from_secs(10), "collapse fixtures")?;
    Ok(format!("9 fixtures, max error {worst:.1e}"))
}

fn random_fixture(rng: &mut ChaCha20Rng, dim: usize, grid: &FrequencyGrid) -> (GMIncrementSpec, DensityGrid, DensityGrid, FunctionalSpec) {
    let spec = match rng.random_range(0..3) {
        0 => GMIncrementSpec::single(1, 1, 1).unwrap(),
        1 => GMIncrementSpec::single(rng.random_range(2..=4), 1, 1).unwrap(),
        _ => GMIncrementSpec::single(1, rng.random_range(1..=2), 2).unwrap(),
    };
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let (f, g) = if dim == 1 {
        let f = DensityModel::Rational { ar: vec![u(-0.6, 0.6)], ma: vec![u(-0.5, 0.5)], variance: u(0.5, 2.0), dim: 1 };
        (f, DensityModel::scalar_constant(u(0.1, 1.0)))
    } else {
        let c0 = vec![vec![u(0.8, 1.5), u(-0.3, 0.3)], vec![u(-0.3, 0.3), u(0.8, 1.5)]];
        let c1 = vec![vec![u(-0.4, 0.4), u(-0.4, 0.4)], vec![u(-0.4, 0.4), u(-0.4, 0.4)]];
        let off = u(-0.05, 0.05);
        let g = DensityModel::Constant { matrix: vec![vec![u(0.1, 0.5), off], vec![off, u(0.1, 0.5)]] };
        (DensityModel::MatrixMa { coeffs: vec![c0, c1] }, g)
    };
    let n = rng.random_range(0..=3);
    let a = (0..=n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // with steps above one, chi has zeros beta does not cancel; a bounded
    // increment density keeps the problem minimal
    let f = if spec.mu().iter().any(|&m| m > 1) { DensityModel::IncrementWeighted { base: Box::new(f) } } else { f };
    (
        spec.clone(),
        f.evaluate(grid, Some(&spec)).unwrap(),
        g.evaluate(grid, None).unwrap(),
        FunctionalSpec::new(a).unwrap(),
    )
}

fn dual_route_mse() -> Check {
    let grid = FrequencyGrid::new(1 << 14).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let dim = if case < 10 { 1 } else { 2 };
        let (spec, f, g, fspec) = random_fixture(&mut rng, dim, &grid);
        let out = interpolate(&spec, &f, &g, &fspec, &grid).map_err(|e| format!("case {case}: {e}"))?;
        let m = out.solution.mse;
        let rel = m.abs_diff / m.algebraic.abs().max(f64::MIN_POSITIVE);
        ensure(rel <= 1e-6, format!("case {case}: {} vs {}", m.spectral, m.algebraic))?;
        worst = worst.max(rel);
    }
    Ok(format!("20 fixtures, max relative gap {worst:.1e}"))
}

fn oracle_convergence() -> Check {
    let grid = FrequencyGrid::new(1 << 12).unwrap();
    let fixtures = [
        (GMIncrementSpec::single(1, 1, 1).unwrap(), vec![0.5], 0.5, vec![1.0]),
        (GMIncrementSpec::single(1, 1, 1).unwrap(), vec![-0.3], 0.2, vec![1.0, 0.5]),
        (GMIncrementSpec::single(1, 1, 2).unwrap(), vec![0.2], 0.4, vec![1.0, -1.0]),
        (GMIncrementSpec::single(2, 1, 1).unwrap(), vec![0.4], 0.3, vec![0.5, 1.0, 0.5]),
        (GMIncrementSpec::new(vec![1, 2], vec![1, 1], vec![1, 1]).unwrap(), vec![0.1], 0.5, vec![1.0]),
    ];
    let mut worst: f64 = 0.0;
    for (i, (spec, ar, noise, a)) in fixtures.iter().enumerate() {
        let t = Instant::now();
        let f = DensityModel::Rational { ar: ar.clone(), ma: vec![], variance: 1.0, dim: 1 }.evaluate(&grid, None).unwrap();
        let g = DensityGrid::from_scalar(&vec![*noise; grid.len()]).unwrap();
        let fspec = FunctionalSpec::scalar(a).unwrap();
        let classical = interpolate(spec, &f, &g, &fspec, &grid).map_err(|e| e.to_string())?.solution.delta;
        let rows = convergence_table(spec, &f, &g, &fspec, &grid, &DEFAULT_SCHEDULE, classical)
            .map_err(|e| format!("fixture {i}: {e}"))?;
        for w in rows.windows(2) {
            ensure(
                w[1].delta <= w[0].delta * (1.0 + 1e-12),
                format!("fixture {i}: delta rises from L={} to L={}", w[0].half_length, w[1].half_length),
            )?;
        }
        for r in &rows {
            ensure(r.delta >= classical - 1e-6, format!("fixture {i}: L={} below classical", r.half_length))?;
        }
        let last = rows.iter().find(|r| r.half_length == 200).ok_or("schedule lacks L=200")?;
        ensure(last.rel_gap <= 0.02, format!("fixture {i}: gap {:.3e} at L=200", last.rel_gap))?;
        worst = worst.max(last.rel_gap);
        within(t, Duration::from_secs(120), &format!("fixture {i}"))?;
    }
    Ok(format!("5 fixtures, worst gap at L=200 {worst:.2e}"))
}

fn periodic_lifting() -> Check {
    let grid = FrequencyGrid::new(1 << 12).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for t in [2usize, 3] {
        for m in [t - 1, 5, 8, 11] {
            let a: Vec<f64> = (0..=m).map(|_| rng.random_range(-1.0..1.0)).collect();
            // blocked by hand: scalar index i sits in block i / t, component i % t
            let blocks = m / t + 1;
            let mut hand = vec![vec![0.0; t]; blocks];
            for (i, &ai) in a.iter().enumerate() {
                hand[i / t][i % t] = ai;
            }
            let hand = FunctionalSpec::new(hand).unwrap();
            let lifted = lift_periodic(&PeriodicFunctionalSpec::new(t, a).unwrap()).map_err(|e| e.to_string())?;
            let c0 = DMatrix::from_fn(t, t, |r, c| if r == c { 1.0 } else { rng.random_range(-0.3..0.3) });
            let c1 = DMatrix::from_fn(t, t, |_, _| rng.random_range(-0.3..0.3));
            let rows = |m: &DMatrix<f64>| (0..t).map(|r| m.row(r).iter().copied().collect()).collect::<Vec<Vec<f64>>>();
            let f = DensityModel::MatrixMa { coeffs: vec![rows(&c0), rows(&c1)] }.evaluate(&grid, None).unwrap();
            let g = DensityGrid::constant(&DMatrix::from_diagonal_element(t, t, 0.2), grid.len()).unwrap();
            let spec = GMIncrementSpec::single(1, 1, 1).unwrap();
            let x = interpolate(&spec, &f, &g, &lifted, &grid).map_err(|e| e.to_string())?.solution.delta;
            let y = interpolate(&spec, &f, &g, &hand, &grid).map_err(|e| e.to_string())?.solution.delta;
            let rel = (x - y).abs() / y.abs().max(1e-300);
            ensure(rel <= 1e-10, format!("T={t} M={m}: {x} vs {y}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("8 problems, max relative difference {worst:.1e}"))
}

/// Largest classical error over `p_chi = p (1 + x cos l + y cos 2l)`.
fn two_atom_search(spec: &GMIncrementSpec, fspec: &FunctionalSpec, grid: &FrequencyGrid, p: f64) -> f64 {
    let sym = SymbolGrid::new(spec, grid);
    let zero = DensityGrid::zeros(1, grid.len());
    let steps = 16;
    let mut best = f64::NEG_INFINITY;
    for ix in -steps..=steps {
        for iy in -steps..=steps {
            let (x, y) = (0.95 * ix as f64 / steps as f64, 0.95 * iy as f64 / steps as f64);
            if x.abs() + y.abs() >= 0.95 {
                continue;
            }
            let f: Vec<f64> = (0..grid.len())
                .map(|j| {
                    let l = grid.lambda(j);
                    p * (1.0 + x * l.cos() + y * (2.0 * l).cos()) * sym.weight(j)
                })
                .collect();
            let f = DensityGrid::from_scalar(&f).unwrap();
            if let Ok(out) = interpolate(spec, &f, &zero, fspec, grid) {
                best = best.max(out.solution.delta);
            }
        }
    }
    best
}

fn minimax_suite() -> Check {
    let grid = FrequencyGrid::new(1024).unwrap();
    let spec = GMIncrementSpec::single(1, 1, 1).unwrap();
    let opts = MinimaxOptions { saddle_samples: 100, ..Default::default() };
    let fixtures = [
        (
            DensityClassSpec { signal: SignalClass::D0Trace { p: 1.5 }, noise: NoiseClass::Zero },
            FunctionalSpec::scalar(&[1.0]).unwrap(),
            true,
        ),
        (
            DensityClassSpec {
                signal: SignalClass::D1Diagonal {
                    f1: DensityModel::Rational { ar: vec![0.5], ma: vec![], variance: 1.0, dim: 1 },
                    delta: vec![0.2],
                },
                noise: NoiseClass::BandTrace {
                    v: DensityModel::scalar_constant(0.1),
                    u: DensityModel::scalar_constant(1.0),
                    q: 0.3,
                },
            },
            FunctionalSpec::scalar(&[1.0, 0.5]).unwrap(),
            false,
        ),
    ];
    let mut lines = Vec::new();
    for (class, fspec, searchable) in fixtures {
        let t = Instant::now();
        let id = class.id();
        let r = solve_minimax(&class, &fspec, &spec, &grid, &opts).map_err(|e| format!("{id}: {e}"))?;
        ensure(r.converged, format!("{id}: not converged, gap {:e}", r.gap))?;
        let n = r.trace.len();
        let change = if n >= 2 {
            (r.trace[n - 1].delta - r.trace[n - 2].delta).abs() / r.delta0
        } else {
            0.0
        };
        ensure(change < 1e-7, format!("{id}: last relative change {change:e}"))?;
        let sr = &r.saddle_report;
        ensure(sr.n_samples == 100, format!("{id}: {} saddle samples", sr.n_samples))?;
        ensure(sr.max_violation <= 1e-6 * r.delta0, format!("{id}: saddle violation {:e}", sr.relative_violation))?;
        ensure(sr.left_min_excess >= -1e-6 * r.delta0, format!("{id}: left inequality {:e}", sr.left_min_excess))?;
        ensure(r.membership.max() <= 1e-8, format!("{id}: budget residual {:?}", r.membership))?;
        if searchable {
            let searched = two_atom_search(&spec, &fspec, &grid, 1.5);
            let rel = (r.delta0 - searched) / r.delta0;
            ensure(rel.abs() <= 1e-3, format!("{id}: delta0 {} vs grid search {searched}", r.delta0))?;
        }
        within(t, Duration::from_secs(300), &id)?;
        lines.push(format!("{id}: {} iterations, saddle {:.1e}", r.iterations, sr.relative_violation));
    }
    Ok(lines.join("; "))
}

fn quadrature_stability() -> Check {
    let coarse = FrequencyGrid::new(1 << 13).unwrap();
    let fine = FrequencyGrid::new(1 << 14).unwrap();
    let bounded = [
        (GMIncrementSpec::single(1, 1, 1).unwrap(), DensityModel::Rational { ar: vec![0.5], ma: vec![], variance: 1.0, dim: 1 }, 0.3),
        (GMIncrementSpec::single(4, 1, 1).unwrap(), DensityModel::Rational { ar: vec![-0.4], ma: vec![0.3], variance: 1.0, dim: 1 }, 0.1),
        (GMIncrementSpec::single(1, 1, 2).unwrap(), DensityModel::scalar_constant(1.0), 0.5),
    ];
    let fspec = FunctionalSpec::scalar(&[1.0, -0.5, 0.25]).unwrap();
    let delta = |spec: &GMIncrementSpec, f: &DensityModel, noise: f64, grid: &FrequencyGrid| -> std::result::Result<f64, String> {
        let fg = f.evaluate(grid, Some(spec)).map_err(|e| e.to_string())?;
        let g = DensityGrid::from_scalar(&vec![noise; grid.len()]).unwrap();
        Ok(interpolate(spec, &fg, &g, &fspec, grid).map_err(|e| e.to_string())?.solution.delta)
    };
    let mut worst_bounded: f64 = 0.0;
    for (spec, f, noise) in &bounded {
        let (x, y) = (delta(spec, f, *noise, &coarse)?, delta(spec, f, *noise, &fine)?);
        let rel = (x - y).abs() / y;
        ensure(rel < 0.005, format!("bounded {spec:?}: {x} vs {y}"))?;
        worst_bounded = worst_bounded.max(rel);
    }
    let long_memory = [
        FMIncrementSpec::new(1, 0.3, vec![]).unwrap(),
        FMIncrementSpec::new(1, 0.2, vec![FmFactor { s: 2, r: 0, d: 0.2 }]).unwrap(),
        FMIncrementSpec::new(0, 0.0, vec![FmFactor { s: 2, r: 1, d: 0.1 }, FmFactor { s: 3, r: 0, d: 0.3 }]).unwrap(),
    ];
    let mut worst_long: f64 = 0.0;
    for fm in &long_memory {
        let fset = gmi_core::increments::frequency_set(fm);
        ensure(fset.entries.iter().all(|e| e.d_tilde.abs() <= 0.3), format!("{fm:?} leaves |D~| <= 0.3"))?;
        let spec = fm.integer_part().map_err(|e| e.to_string())?;
        let model = DensityModel::Fractional { spec: fm.clone(), base: Box::new(DensityModel::scalar_constant(1.0)) };
        let (x, y) = (delta(&spec, &model, 0.2, &coarse)?, delta(&spec, &model, 0.2, &fine)?);
        let rel = (x - y).abs() / y;
        ensure(rel < 0.02, format!("long memory {fm:?}: {x} vs {y}"))?;
        worst_long = worst_long.max(rel);
    }
    Ok(format!("bounded {worst_bounded:.1e}, long memory {worst_long:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("coefficient identities", coefficient_identities),
        ("gegenbauer identity", gegenbauer_identity),
        ("stationarity classifier", stationarity_classifier),
        ("closed-form collapse", closed_form_collapse),
        ("dual-route mse", dual_route_mse),
        ("oracle convergence", oracle_convergence),
        ("periodic lifting", periodic_lifting),
        ("minimax scalar suite", minimax_suite),
        ("quadrature stability", quadrature_stability),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{:.2?}]", i + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}) [{:.2?}]", i + 1, t.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
