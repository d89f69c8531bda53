mod common;

use common::*;
use nsgrf::analytics::correlation_rows;
use nsgrf::grid::{Boundary, GridGeometry};
use nsgrf::sar::{assemble_sar, ParamFields};
use nsgrf::simulator::{
    simulate_with_system, solve_sar, standardize_pixelwise, FieldEnsemble, Standardization,
};
use nsgrf::{simulate_ensemble, Error};
use proptest::prelude::*;

#[test]
fn empirical_correlation_matches_dense_inverse_on_small_grid() {
    let (h, w) = (8, 8);
    let params = ParamFields::constant(h, w, 0.3, 3.0, 0.5);
    let sys = assemble_sar(&params, &GridGeometry::truncated(h, w).unwrap()).unwrap();
    let b = sys.matrix().to_dense();
    let corr = cov_to_corr(&dense_inverse(&matmul_tn(&b, &b)));
    let ens = standardize_pixelwise(&simulate_with_system(&sys, 10_000, 17).unwrap()).unwrap();
    let anchors: Vec<(usize, usize)> = (0..h).flat_map(|i| (0..w).map(move |j| (i, j))).collect();
    let rows = correlation_rows(&ens, &anchors).unwrap();
    let mut worst: f64 = 0.0;
    for (a, oracle) in corr.iter().enumerate() {
        for (x, y) in rows.row(a).iter().zip(oracle) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 0.05, "max correlation error {worst}");
}

#[test]
fn periodic_boundary_wraps_correlation() {
    let (h, w) = (6, 10);
    let params = ParamFields::constant(h, w, 0.2, 1.0, 0.0);
    let g = GridGeometry::new(h, w, Boundary::PeriodicX).unwrap();
    let ens = simulate_ensemble(&params, &g, 4000, 9).unwrap();
    let rows = correlation_rows(&ens, &[(3, 0)]).unwrap();
    // column 0 and column w-1 are neighbours under x-periodicity
    let wrap = rows.get(0, 3, w - 1);
    let inner = rows.get(0, 3, 1);
    assert!((wrap - inner).abs() < 0.06, "{wrap} vs {inner}");
    assert!(wrap > 0.3);
}

#[test]
fn residual_bound_on_heterogeneous_field() {
    let (h, w) = (20, 17);
    let params = ParamFields::new(
        nsgrf::Field::from_fn(h, w, |i, _| if i < 10 { 1e-4 } else { 2.0 }),
        nsgrf::Field::from_fn(h, w, |_, j| 1.0 + 6.0 * j as f64 / 16.0),
        nsgrf::Field::from_fn(h, w, |i, j| ((i * j) as f64 * 0.1).sin() * 1.5),
    )
    .unwrap();
    let sys = assemble_sar(&params, &GridGeometry::truncated(h, w).unwrap()).unwrap();
    let e: Vec<f64> = (0..h * w).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
    let y = solve_sar(&sys, &e).unwrap();
    let by = sys.matrix().mul_vec(&y).unwrap();
    let resid = by
        .iter()
        .zip(&e)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = e.iter().map(|v| v.abs()).fold(1.0, f64::max);
    assert!(resid / scale < 1e-8);
}

#[test]
fn seeds_change_fields_not_operator() {
    let params = ParamFields::constant(12, 9, 0.5, 2.0, -0.4);
    let g = GridGeometry::truncated(12, 9).unwrap();
    let a = simulate_ensemble(&params, &g, 3, 1).unwrap();
    let b = simulate_ensemble(&params, &g, 3, 2).unwrap();
    assert_ne!(a.as_slice(), b.as_slice());
    let sa = assemble_sar(&params, &g).unwrap();
    let sb = assemble_sar(&params, &g).unwrap();
    assert_eq!(sa.matrix(), sb.matrix());
    assert_eq!(a, simulate_ensemble(&params, &g, 3, 1).unwrap());
}

#[test]
fn prefix_of_larger_ensemble_is_smaller_ensemble() {
    let params = ParamFields::constant(10, 10, 0.5, 2.0, 0.3);
    let g = GridGeometry::truncated(10, 10).unwrap();
    let small = simulate_ensemble(&params, &g, 5, 8).unwrap();
    let large = simulate_ensemble(&params, &g, 70, 8).unwrap();
    assert_eq!(small.as_slice(), &large.as_slice()[..5 * 100]);
}

#[test]
fn degenerate_pixel_is_named() {
    let mut data = vec![0.0; 3 * 4];
    for m in 0..3 {
        for r in 0..4 {
            data[m * 4 + r] = if r == 2 {
                5.0
            } else {
                (m * r) as f64 + m as f64
            };
        }
    }
    let ens = FieldEnsemble::from_vec(3, 2, 2, data).unwrap();
    match standardize_pixelwise(&ens) {
        Err(Error::DegeneratePixel { row, col }) => assert_eq!((row, col), (1, 0)),
        other => panic!("expected degenerate pixel, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standardized_pixels_have_zero_mean_unit_sd(seed in 0u64..10_000, m in 2usize..12) {
        let params = ParamFields::constant(5, 4, 0.7, 2.5, 0.2);
        let ens = simulate_ensemble(&params, &GridGeometry::truncated(5, 4).unwrap(), m, seed).unwrap();
        let st = standardize_pixelwise(&ens).unwrap();
        prop_assert_eq!(st.standardization, Standardization::Pixelwise);
        for r in 0..20 {
            let v: Vec<f64> = st.pixel_series(r).collect();
            let mean = v.iter().sum::<f64>() / m as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
        let again = standardize_pixelwise(&st).unwrap();
        for (a, b) in again.as_slice().iter().zip(st.as_slice()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn replicate_order_does_not_change_standardization(seed in 0u64..1000) {
        let params = ParamFields::constant(4, 4, 0.3, 1.5, 1.0);
        let ens = simulate_ensemble(&params, &GridGeometry::truncated(4, 4).unwrap(), 4, seed).unwrap();
        let order = [2, 0, 3, 1];
        let a = standardize_pixelwise(&ens.select(&order).unwrap()).unwrap();
        let b = standardize_pixelwise(&ens).unwrap().select(&order).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
