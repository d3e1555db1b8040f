use gmi_core::classical::{lift_periodic, transform_b, v_coeffs, FunctionalSpec, PeriodicFunctionalSpec};
use gmi_core::increments::{
    convolve_exact, expand_operator, gegenbauer_coefficients, gm_series, inverse_series, to_f64, FrequencySet,
    GMIncrementSpec, SeriesSign,
};
use gmi_core::oracle::{toeplitz_min_eigenvalue, CovarianceModel};
use gmi_core::spectra::{DensityGrid, DensityModel, FrequencyGrid};
use proptest::prelude::*;

fn gm_spec() -> impl Strategy<Value = GMIncrementSpec> {
    prop::collection::vec((1u32..=12, 1u32..=4, 0u32..=3), 1..=3).prop_filter_map("degenerate", |factors| {
        let (s, (mu, d)): (Vec<u32>, (Vec<u32>, Vec<u32>)) =
            factors.into_iter().map(|(s, m, d)| (s, (m, d))).unzip();
        GMIncrementSpec::new(s, mu, d).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_and_inverse_convolve_to_delta(spec in gm_spec(), len in 1usize..=64) {
        let e = expand_operator(&spec).unwrap();
        let d = inverse_series(&spec, len).unwrap();
        let conv = convolve_exact(&e, &d, len + 1).unwrap();
        prop_assert_eq!(conv[0], 1);
        prop_assert!(conv[1..].iter().all(|&x| x == 0));
    }

    #[test]
    fn operator_annihilates_constants_and_has_full_degree(spec in gm_spec()) {
        let e = expand_operator(&spec).unwrap();
        prop_assert_eq!(e.iter().sum::<i128>(), 0);
        let last = e.iter().rposition(|&x| x != 0).unwrap();
        prop_assert_eq!(last, spec.n_gamma());
        let sign = if spec.total_order() % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(e[spec.n_gamma()], sign);
    }

    #[test]
    fn integer_orders_reproduce_the_operator(
        d0 in 0u32..=2,
        seasonal in prop::collection::btree_map(2u32..=6, 0u32..=2, 0..=2),
    ) {
        let mut s = vec![1];
        let mut d = vec![d0];
        s.extend(seasonal.keys());
        d.extend(seasonal.values());
        prop_assume!(d.iter().any(|&x| x > 0));
        let spec = GMIncrementSpec::new(s.clone(), vec![1; s.len()], d.clone()).unwrap();
        let mut orders: Vec<((u32, u32), f64)> = Vec::new();
        for (&sj, &dj) in s.iter().zip(&d) {
            for k in 0..=sj / 2 {
                orders.push(((k, sj), dj as f64));
            }
        }
        // merge equal frequencies
        let mut merged: Vec<((u32, u32), f64)> = Vec::new();
        for ((k, sj), dj) in orders {
            let nu = k as f64 / sj as f64;
            match merged.iter_mut().find(|((a, b), _)| (*a as f64 / *b as f64 - nu).abs() < 1e-12) {
                Some(entry) => entry.1 += dj,
                None => merged.push(((k, sj), dj)),
            }
        }
        let fset = FrequencySet::from_orders(&merged);
        let ng = spec.n_gamma();
        let series = gm_series(&fset, SeriesSign::Minus, ng).unwrap();
        let e = to_f64(&expand_operator(&spec).unwrap());
        let scale = e.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for k in 0..=ng {
            prop_assert!((series[k] - e[k]).abs() <= 1e-9 * scale, "k={} {} vs {}", k, series[k], e[k]);
        }
    }

    #[test]
    fn gegenbauer_generating_function(d in -0.45f64..=0.45, u in -0.9f64..=0.9) {
        let z: f64 = 0.3;
        let c = gegenbauer_coefficients(d, u, 60).unwrap();
        let partial: f64 = c.iter().enumerate().map(|(n, cn)| cn * z.powi(n as i32)).sum();
        let exact = (1.0 - 2.0 * u * z + z * z).powf(-d);
        prop_assert!((partial - exact).abs() <= 1e-8);
    }

    #[test]
    fn plus_and_minus_series_are_inverse(
        orders in prop::collection::btree_map((0u32..=6, 12u32..=12), -0.45f64..=0.45, 1..=3),
    ) {
        let orders: Vec<((u32, u32), f64)> = orders.into_iter().collect();
        let fset = FrequencySet::from_orders(&orders);
        let plus = gm_series(&fset, SeriesSign::Plus, 200).unwrap();
        let minus = gm_series(&fset, SeriesSign::Minus, 200).unwrap();
        for m in 0..=20 {
            let v: f64 = (0..=m).map(|k| plus[k] * minus[m - k]).sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            prop_assert!((v - target).abs() <= 1e-10);
        }
    }

    #[test]
    fn functional_decomposition_holds_for_any_sequence(
        spec in gm_spec(),
        a in prop::collection::vec(-2.0f64..2.0, 1..=5),
        seed in prop::collection::vec(-3.0f64..3.0, 64),
    ) {
        prop_assume!(spec.n_gamma() <= 24);
        let fspec = FunctionalSpec::scalar(&a).unwrap();
        let n = a.len() - 1;
        let ng = spec.n_gamma() as i64;
        let zeta = |k: i64| seed[((k + 40).rem_euclid(64)) as usize] + 0.1 * k as f64;
        let e = to_f64(&expand_operator(&spec).unwrap());
        let b = transform_b(&spec, &fspec).unwrap();
        let v = v_coeffs(&spec, &b).unwrap();
        let lhs: f64 = (0..=n).map(|k| a[k] * zeta(k as i64)).sum();
        let bchi: f64 = (0..=n)
            .map(|k| b[k][0] * e.iter().enumerate().map(|(l, el)| el * zeta(k as i64 - l as i64)).sum::<f64>())
            .sum();
        let vz: f64 = (-ng..=-1).map(|k| v[(k + ng) as usize][0] * zeta(k)).sum();
        let scale = 1.0 + lhs.abs() + bchi.abs();
        prop_assert!((lhs - (bchi - vz)).abs() <= 1e-9 * scale);
    }

    #[test]
    fn lifting_preserves_weights(period in 2usize..=4, a in prop::collection::vec(-1.0f64..1.0, 1..=11)) {
        let p = PeriodicFunctionalSpec::new(period, a.clone()).unwrap();
        let lifted = lift_periodic(&p).unwrap();
        prop_assert_eq!(lifted.dim(), period);
        let flat: Vec<f64> = lifted.weights().iter().flatten().copied().collect();
        prop_assert_eq!(&flat[..a.len()], &a[..]);
        prop_assert!(flat[a.len()..].iter().all(|x| *x == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn matrix_densities_are_hermitian_and_paired(
        c0 in prop::collection::vec(-1.0f64..1.0, 4),
        c1 in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let grid = FrequencyGrid::new(1024).unwrap();
        let model = DensityModel::MatrixMa {
            coeffs: vec![vec![vec![1.0 + c0[0].abs(), c0[1]], vec![c0[2], 1.0 + c0[3].abs()]], vec![vec![c1[0], c1[1]], vec![c1[2], c1[3]]]],
        };
        let f = model.evaluate(&grid, None).unwrap();
        for j in 0..grid.len() {
            let m = f.at(j);
            prop_assert!((m - m.adjoint()).norm() <= 1e-10 * m.norm().max(1.0));
            let pair = f.at(grid.pair(j));
            prop_assert!((pair - m.transpose()).norm() <= 1e-10 * m.norm().max(1.0));
        }
    }

    #[test]
    fn increment_covariance_is_positive_semidefinite(
        c in prop::collection::vec(-0.8f64..0.8, 4),
        noise in 0.0f64..1.0,
        s in 1u32..=3,
    ) {
        let grid = FrequencyGrid::new(1024).unwrap();
        let spec = GMIncrementSpec::single(s, 1, 1).unwrap();
        let f = DensityModel::MatrixMa {
            coeffs: vec![vec![vec![1.0, c[0]], vec![c[1], 1.0]], vec![vec![c[2], 0.0], vec![0.0, c[3]]]],
        }
        .evaluate(&grid, None)
        .unwrap();
        let g = DensityGrid::constant(&nalgebra::DMatrix::from_diagonal_element(2, 2, noise), grid.len()).unwrap();
        let fspec = FunctionalSpec::new(vec![vec![1.0, 0.0]]).unwrap();
        let model = CovarianceModel::new(&spec, &f, &g, &fspec, &grid).unwrap();
        let scale = model.increment_covariance(0).norm().max(1.0);
        prop_assert!(toeplitz_min_eigenvalue(&model, 10) >= -1e-8 * scale);
    }

    #[test]
    fn rational_densities_are_even(ar in -0.8f64..0.8, ma in -0.9f64..0.9, var in 0.1f64..3.0) {
        let grid = FrequencyGrid::new(1024).unwrap();
        let f = DensityModel::Rational { ar: vec![ar], ma: vec![ma], variance: var, dim: 1 }.evaluate(&grid, None).unwrap();
        for j in 0..grid.len() {
            prop_assert!((f.scalar(j) - f.scalar(grid.pair(j))).abs() <= 1e-10 * f.scalar(j));
            prop_assert!(f.scalar(j) > 0.0);
        }
    }
}
