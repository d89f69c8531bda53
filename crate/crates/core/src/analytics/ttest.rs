//! One-sided paired t-test of `H₀: μ_d = 0` against `H₁: μ_d < 0`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub t: f64,
    pub df: usize,
    /// `P(T_df ≤ t)`.
    pub p_value: f64,
    /// Upper end of the one-sided `(−∞, upper]` interval at level `1 − α`.
    pub upper_bound: f64,
    pub alpha: f64,
    pub reject: bool,
}

pub fn paired_ttest(d: &[f64]) -> Result<TTestResult> {
    let n = d.len();
    if n < 2 {
        return Err(Error::DegenerateTest(format!(
            "need at least two differences, got {n}"
        )));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateTest("differences must be finite".into()));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateTest(
            "differences have zero variance".into(),
        ));
    }
    let se = sd / nf.sqrt();
    let t = mean / se;
    let df = n - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::DegenerateTest(format!("t distribution: {e}")))?;
    let p_value = dist.cdf(t).clamp(0.0, 1.0);
    let upper_bound = mean + dist.inverse_cdf(1.0 - ALPHA) * se;
    Ok(TTestResult {
        n,
        mean,
        sd,
        t,
        df,
        p_value,
        upper_bound,
        alpha: ALPHA,
        reject: p_value < ALPHA,
    })
}
