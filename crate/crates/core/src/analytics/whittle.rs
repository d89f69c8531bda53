//! Whittle (Matérn, smoothness 1) correlation `c(d) = κd K₁(κd)`.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_FROM: f64 = 20.0;

/// `x K₁(x)` for `x ≥ 0`, with the limit 1 at 0.
pub fn x_bessel_k1(x: f64) -> f64 {
    assert!(x >= 0.0, "x K1(x) needs x >= 0, got {x}");
    if x == 0.0 {
        1.0
    } else if x <= SERIES_LIMIT {
        x_k1_series(x)
    } else {
        x * bessel_k1(x)
    }
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1(x) needs x > 0, got {x}");
    if x <= SERIES_LIMIT {
        x_k1_series(x) / x
    } else if x < ASYMPTOTIC_FROM {
        k1_continued_fraction(x)
    } else {
        k1_asymptotic(x)
    }
}

// x K₁(x) = 1 + x ln(x/2) I₁(x) − (x²/4) Σₖ (ψ(k+1) + ψ(k+2)) (x²/4)ᵏ / (k! (k+1)!)
fn x_k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (x²/4)^k / (k! (k+1)!)
    let mut psi1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut i1 = 0.0;
    let mut tail = 0.0;
    for k in 0..200 {
        i1 += term;
        tail += (psi1 + psi2) * term;
        let kf = k as f64;
        psi1 += 1.0 / (kf + 1.0);
        psi2 += 1.0 / (kf + 2.0);
        term *= q / ((kf + 1.0) * (kf + 2.0));
        if term < 1e-17 * i1 {
            break;
        }
    }
    // I₁(x) = (x/2) Σ term
    1.0 + x * (0.5 * x).ln() * (0.5 * x * i1) - q * tail
}

// Steed's continued fraction for K₀ followed by the ratio K₁/K₀; converges
// quickly for x > 2.
fn k1_continued_fraction(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - h) / x
}

// K₁(x) ~ sqrt(π / 2x) e^{−x} Σₖ aₖ / (8x)ᵏ with aₖ = Πⱼ (4 − (2j−1)²) / k!
fn k1_asymptotic(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (4.0 - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// Correlation at distance `d` for inverse range `kappa`.
pub fn whittle_correlation(kappa: f64, d: f64) -> f64 {
    assert!(
        kappa > 0.0 && kappa.is_finite(),
        "kappa must be finite and > 0, got {kappa}"
    );
    assert!(d >= 0.0, "distance must be >= 0, got {d}");
    x_bessel_k1(kappa * d)
}
