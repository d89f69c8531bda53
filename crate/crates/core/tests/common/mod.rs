//! Independent reference implementations used by the integration tests and
//! the acceptance suite. Everything here is deliberately naive and dense.

#![allow(dead_code, clippy::needless_range_loop)]

use nsgrf::grid::Boundary;

pub type Dense = Vec<Vec<f64>>;

/// `Rᵀ diag(rho, 1/rho) R` with `R` the rotation by `theta`, by explicit
/// 2x2 products.
pub fn dispersion_oracle(rho: f64, theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let r = [[c, -s], [s, c]];
    let lam = [[rho, 0.0], [0.0, 1.0 / rho]];
    let mut lr = [[0.0; 2]; 2];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                lr[i][j] += lam[i][k] * r[k][j];
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += r[k][i] * lr[k][j];
            }
        }
    }
    out
}

/// Stencil weight at row offset `di` (y) and column offset `dj` (x) in the
/// printed layout: top row (di = +1) `d12/2, -d22, -d12/2`, bottom row
/// (di = -1) `-d12/2, -d22, d12/2`.
pub fn stencil_oracle(kappa2: f64, d: [[f64; 2]; 2], di: i64, dj: i64) -> f64 {
    let (d11, d12, d22) = (d[0][0], d[0][1], d[1][1]);
    match (di, dj) {
        (0, 0) => kappa2 + 2.0 * d11 + 2.0 * d22,
        (0, _) => -d11,
        (_, 0) => -d22,
        (1, -1) | (-1, 1) => 0.5 * d12,
        (1, 1) | (-1, -1) => -0.5 * d12,
        _ => unreachable!(),
    }
}

/// Dense `B` from per-cell weights `weight(i, j, di, dj)`.
pub fn dense_sar(
    h: usize,
    w: usize,
    boundary: Boundary,
    weight: impl Fn(usize, usize, i64, i64) -> f64,
) -> Dense {
    let n = h * w;
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..h {
        for j in 0..w {
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    let ni = i as i64 + di;
                    let mut nj = j as i64 + dj;
                    if ni < 0 || ni >= h as i64 {
                        continue;
                    }
                    if nj < 0 || nj >= w as i64 {
                        match boundary {
                            Boundary::Truncate => continue,
                            Boundary::PeriodicX => nj = nj.rem_euclid(w as i64),
                        }
                    }
                    let col = ni as usize * w + nj as usize;
                    b[i * w + j][col] += weight(i, j, di, dj);
                }
            }
        }
    }
    b
}

pub fn matmul_tn(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; a[0].len()];
    for k in 0..n {
        for i in 0..a[0].len() {
            if a[k][i] == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += a[k][i] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// `log |det A|` by Gaussian elimination with partial pivoting.
pub fn dense_log_abs_det(a: &Dense) -> f64 {
    let mut m = a.clone();
    let n = m.len();
    let mut total = 0.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| m[x][k].abs().total_cmp(&m[y][k].abs()))
            .unwrap();
        m.swap(k, p);
        let piv = m[k][k];
        assert!(piv != 0.0, "singular matrix");
        total += piv.abs().ln();
        for r in k + 1..n {
            let f = m[r][k] / piv;
            if f != 0.0 {
                for c in k..n {
                    m[r][c] -= f * m[k][c];
                }
            }
        }
    }
    total
}

/// Gauss–Jordan inverse.
pub fn dense_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| m[x][k].abs().total_cmp(&m[y][k].abs()))
            .unwrap();
        m.swap(k, p);
        let piv = m[k][k];
        for c in 0..2 * n {
            m[k][c] /= piv;
        }
        for r in 0..n {
            if r != k {
                let f = m[r][k];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[k][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Stationary windowed log-likelihood by dense algebra.
pub fn dense_loglik(
    fields: &[Vec<f64>],
    h: usize,
    w: usize,
    kappa2: f64,
    rho: f64,
    theta: f64,
) -> f64 {
    let d = dispersion_oracle(rho, theta);
    let b = dense_sar(h, w, Boundary::Truncate, |_, _, di, dj| {
        stencil_oracle(kappa2, d, di, dj)
    });
    let q = matmul_tn(&b, &b);
    let logdet = dense_log_abs_det(&b);
    let n = (h * w) as f64;
    fields
        .iter()
        .map(|y| {
            let qy = matvec(&q, y);
            let quad: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
            logdet - 0.5 * quad - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
        })
        .sum()
}

/// Student-t CDF for integer degrees of freedom from the closed-form
/// trigonometric series.
pub fn t_cdf_integer_df(t: f64, df: usize) -> f64 {
    use std::f64::consts::PI;
    assert!(df >= 1);
    let nu = df as f64;
    let th = (t / nu.sqrt()).atan();
    let (s, c) = th.sin_cos();
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            let mut k = 1;
            while 2 * k + 1 < df {
                term *= c * c * (2 * k) as f64 / (2 * k + 1) as f64;
                sum += term;
                k += 1;
            }
        }
        2.0 / PI * (th + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while 2 * k < df {
            term *= c * c * (2 * k - 1) as f64 / (2 * k) as f64;
            sum += term;
            k += 1;
        }
        s * sum
    };
    0.5 * (1.0 + a)
}

/// Textbook paired t statistic and lower-tail p-value.
pub fn ttest_oracle(d: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
    let t = mean / ((ss / (n - 1.0)).sqrt() / n.sqrt());
    (t, t_cdf_integer_df(t, d.len() - 1))
}

/// `K₁(x) = ∫₀^∞ exp(−x cosh u) cosh u du` by the trapezoid rule, which is
/// spectrally accurate for this even, doubly decaying integrand.
pub fn bessel_k1_quadrature(x: f64) -> f64 {
    let h = 1e-3;
    let mut total = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        let v = (-x * u.cosh()).exp() * u.cosh();
        total += v;
        if v < 1e-300 || (v < 1e-30 * total && u > 1.0) {
            break;
        }
        k += 1;
    }
    total * h
}

/// Pearson correlation matrix of a dense covariance.
pub fn cov_to_corr(cov: &Dense) -> Dense {
    let sd: Vec<f64> = (0..cov.len()).map(|i| cov[i][i].sqrt()).collect();
    cov.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| v / (sd[i] * sd[j]))
                .collect()
        })
        .collect()
}
