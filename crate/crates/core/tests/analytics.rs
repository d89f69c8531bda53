mod common;

use common::{bessel_k1_quadrature, ttest_oracle};
use nsgrf::analytics::{
    bessel_k1, correlation_rows, cov_rmse, covariance_analysis, paired_ttest, param_metrics,
    param_metrics_with, psnr, sample_anchors, ssim, whittle_correlation, CorrelationRows,
    MetricsOptions, SsimConstants, PSNR_CAP,
};
use nsgrf::simulator::simulate_ensemble;
use nsgrf::{Boundary, Field, FieldEnsemble, GridGeometry, ParamFields, ParamKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[test]
fn ttest_reference_examples() {
    let down = paired_ttest(&[-1.0, -2.0, -3.0]).unwrap();
    assert!((down.t + 3.464).abs() < 1e-3);
    assert_eq!(down.df, 2);
    assert!((down.p_value - 0.0371).abs() < 1e-3);
    let closed = 0.5 * (1.0 - down.t.abs() / (down.t * down.t + 2.0).sqrt());
    assert!((down.p_value - closed).abs() < 1e-12);

    let up = paired_ttest(&[1.0, 2.0, 3.0]).unwrap();
    assert!((up.p_value - 0.9629).abs() < 1e-3);

    let zero = paired_ttest(&[-1.0, 0.0, 1.0]).unwrap();
    assert_eq!(zero.t, 0.0);
    assert!((zero.p_value - 0.5).abs() < 1e-12);
}

#[test]
fn ttest_matches_oracle_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let shift = rng.random_range(-1.0..1.0);
        let d: Vec<f64> = normal_vec(&mut rng, n)
            .into_iter()
            .map(|v| v + shift)
            .collect();
        let got = paired_ttest(&d).unwrap();
        let (t, p) = ttest_oracle(&d);
        assert!(
            (got.t - t).abs() <= 1e-10 * t.abs().max(1.0),
            "t {} vs {}",
            got.t,
            t
        );
        assert!(
            (got.p_value - p).abs() < 1e-8,
            "n={n}: p {} vs {}",
            got.p_value,
            p
        );
        assert_eq!(got.reject, got.p_value < 0.01);
        assert!(got.upper_bound > got.mean);
    }
}

#[test]
fn ttest_rejects_degenerate_input() {
    assert!(paired_ttest(&[1.0]).is_err());
    assert!(paired_ttest(&[0.5, 0.5, 0.5]).is_err());
    assert!(paired_ttest(&[0.5, f64::NAN]).is_err());
}

#[test]
fn bessel_k1_matches_quadrature() {
    for k in 1..=300 {
        let x = 0.05 * k as f64;
        let (got, want) = (bessel_k1(x), bessel_k1_quadrature(x));
        assert!((got - want).abs() <= 1e-10 * want, "x={x}: {got} vs {want}");
    }
    assert!((bessel_k1(1.0) - 0.6019).abs() < 1e-4);
}

#[test]
fn whittle_curve_shape() {
    assert_eq!(whittle_correlation(0.5, 0.0), 1.0);
    assert!((whittle_correlation(1.0, 1.0) - bessel_k1(1.0)).abs() < 1e-15);
    let mut prev = 1.0;
    for k in 1..=100 {
        let c = whittle_correlation(0.7, 0.1 * k as f64);
        assert!(c < prev && c > 0.0);
        prev = c;
    }
}

#[test]
fn correlation_rows_are_symmetric_between_anchors() {
    let geo = GridGeometry::new(9, 11, Boundary::Truncate).unwrap();
    let p = ParamFields::new(
        Field::filled(9, 11, 0.3),
        Field::filled(9, 11, 2.5),
        Field::filled(9, 11, 0.7),
    )
    .unwrap();
    let ens = simulate_ensemble(&p, &geo, 40, 9).unwrap();
    let anchors = sample_anchors(9, 11, 12, 4).unwrap();
    let rows = correlation_rows(&ens, &anchors).unwrap();
    for (a, &(ia, ja)) in anchors.iter().enumerate() {
        assert_eq!(rows.get(a, ia, ja), 1.0);
        for (b, &(ib, jb)) in anchors.iter().enumerate() {
            assert!((rows.get(a, ib, jb) - rows.get(b, ia, ja)).abs() < 1e-14);
        }
    }
}

#[test]
fn linear_dependence_gives_unit_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = 20;
    let mut data = Vec::new();
    for _ in 0..m {
        let v: f64 = rng.sample(StandardNormal);
        data.extend([v, 2.0 * v, -v + 3.0]);
    }
    let ens = FieldEnsemble::from_vec(m, 1, 3, data).unwrap();
    let rows = correlation_rows(&ens, &[(0, 0)]).unwrap();
    assert!((rows.get(0, 0, 1) - 1.0).abs() < 1e-14);
    assert!((rows.get(0, 0, 2) + 1.0).abs() < 1e-14);
}

#[test]
fn iid_noise_has_small_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let (m, h, w) = (1000, 10, 10);
    let ens = FieldEnsemble::from_vec(m, h, w, normal_vec(&mut rng, m * h * w)).unwrap();
    let anchors = sample_anchors(h, w, 20, 6).unwrap();
    let rows = correlation_rows(&ens, &anchors).unwrap();
    let (mut small, mut total) = (0usize, 0usize);
    for (a, &(i, j)) in anchors.iter().enumerate() {
        for (r, v) in rows.row(a).iter().enumerate() {
            if r != i * w + j {
                total += 1;
                small += (v.abs() < 0.1) as usize;
            }
        }
    }
    assert!(small as f64 >= 0.99 * total as f64, "{small}/{total}");
}

#[test]
fn cov_rmse_examples() {
    let rows = |data: Vec<f64>| CorrelationRows::from_rows(vec![(0, 0)], 1, 3, data).unwrap();
    let a = rows(vec![1.0, 0.5, 0.2]);
    assert_eq!(cov_rmse(&a, &a).unwrap(), vec![0.0]);
    let shifted = rows(vec![1.1, 0.6, 0.3]);
    assert!((cov_rmse(&a, &shifted).unwrap()[0] - 0.1).abs() < 1e-12);
    let hand = rows(vec![1.0, 0.3, 0.4]);
    assert!((cov_rmse(&a, &hand).unwrap()[0] - (0.08f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((cov_rmse(&a, &hand).unwrap()[0] - 0.1633).abs() < 1e-4);
    let undefined = rows(vec![1.0, f64::NAN, 0.4]);
    assert!((cov_rmse(&a, &undefined).unwrap()[0] - 0.02f64.sqrt()).abs() < 1e-12);
    assert!(CorrelationRows::from_rows(vec![(0, 0)], 2, 2, vec![0.0; 3]).is_err());
}

#[test]
fn covariance_analysis_prefers_the_right_model() {
    let geo = GridGeometry::new(12, 12, Boundary::Truncate).unwrap();
    let stat = |r: f64, t: f64| {
        ParamFields::new(
            Field::filled(12, 12, 0.2),
            Field::filled(12, 12, r),
            Field::filled(12, 12, t),
        )
        .unwrap()
    };
    let truth = simulate_ensemble(&stat(4.0, 0.6), &geo, 200, 1).unwrap();
    let good = simulate_ensemble(&stat(4.0, 0.6), &geo, 200, 2).unwrap();
    let bad = simulate_ensemble(&stat(1.0, 0.0), &geo, 200, 3).unwrap();
    let report = covariance_analysis(&truth, &good, Some(&bad), 30, 8).unwrap();
    assert_eq!(report.anchors.len(), 30);
    let t = report.ttest.unwrap();
    assert!(t.mean < 0.0 && t.reject, "{t:?}");
    assert!(report.to_text().contains("mean RMSE"));
    let again = covariance_analysis(&truth, &good, None, 30, 8).unwrap();
    assert_eq!(again.rmse, report.rmse);
    assert!(again.ttest.is_none());
}

fn params(h: usize, w: usize, k: f64, r: f64, t: f64) -> ParamFields {
    ParamFields::new(
        Field::filled(h, w, k),
        Field::filled(h, w, r),
        Field::filled(h, w, t),
    )
    .unwrap()
}

#[test]
fn metric_examples() {
    let truth = ParamFields::new(
        Field::from_vec(16, 16, (0..256).map(|v| 0.1 + v as f64 / 300.0).collect()).unwrap(),
        Field::from_vec(
            16,
            16,
            (0..256).map(|v| 1.0 + (v % 16) as f64 / 4.0).collect(),
        )
        .unwrap(),
        Field::from_vec(
            16,
            16,
            (0..256).map(|v| -1.0 + (v / 16) as f64 / 8.0).collect(),
        )
        .unwrap(),
    )
    .unwrap();
    let same = param_metrics(&truth, &truth).unwrap();
    for c in &same.channels {
        assert_eq!(c.rmse, 0.0);
        assert_eq!(c.mae, 0.0);
        assert!((c.ssim - 1.0).abs() < 1e-12);
        assert_eq!(c.psnr, PSNR_CAP);
    }

    let shift = |f: &Field, by: f64| {
        Field::from_vec(16, 16, f.as_slice().iter().map(|v| v + by).collect()).unwrap()
    };
    let moved = ParamFields::new(
        shift(&truth.kappa2, 0.5),
        shift(&truth.rho, 0.5),
        shift(&truth.theta, 0.5),
    )
    .unwrap();
    let rep = param_metrics(&moved, &truth).unwrap();
    for c in &rep.channels {
        assert!((c.rmse - 0.5).abs() < 1e-12);
        assert!((c.mae - 0.5).abs() < 1e-12);
        let (lo, hi) = c.param.support();
        assert!((c.nrmse - 0.5 / (hi - lo)).abs() < 1e-12);
        assert!((c.psnr - (20.0 * (hi - lo).log10() - 10.0 * 0.25f64.log10())).abs() < 1e-9);
    }

    let mut flipped = truth.theta.clone();
    flipped.set(3, 4, truth.theta.get(3, 4) + PI);
    let est = ParamFields::new(truth.kappa2.clone(), truth.rho.clone(), flipped).unwrap();
    let raw = param_metrics(&est, &truth).unwrap();
    assert!((raw.channel(ParamKind::Theta).rmse - (PI * PI / 256.0).sqrt()).abs() < 1e-12);
    let wrapped = param_metrics_with(
        &est,
        &truth,
        &MetricsOptions {
            ssim: None,
            wrap_theta: true,
        },
    )
    .unwrap();
    assert!(wrapped.channel(ParamKind::Theta).rmse < 1e-12);
    assert!(raw.to_text().contains("theta"));
}

#[test]
fn metrics_reject_mismatched_grids() {
    assert!(param_metrics(&params(4, 4, 0.5, 2.0, 0.0), &params(4, 5, 0.5, 2.0, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn self_similarity_is_perfect(
        h in 1usize..20,
        w in 1usize..20,
        vals in proptest::collection::vec(-1e3f64..1e3, 400),
    ) {
        let f = Field::from_vec(h, w, vals[..h * w].to_vec()).unwrap();
        let s = ssim(&f, &f, 2.0, &SsimConstants::default());
        prop_assert!((s - 1.0).abs() < 1e-9, "ssim {}", s);
        prop_assert_eq!(psnr(0.0, 2.0), PSNR_CAP);
    }
}
