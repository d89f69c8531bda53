//! One-sided paired t-test on per-anchor error differences.

use nsgrf::analytics::paired_ttest;

fn main() -> nsgrf::Result<()> {
    for d in [
        vec![-1.0, -2.0, -3.0],
        vec![1.0, 2.0, 3.0],
        vec![-0.02, 0.01, -0.03, -0.015, 0.005, -0.01],
    ] {
        let r = paired_ttest(&d)?;
        println!(
            "d = {d:?}\n  t = {:.4}, df = {}, p = P(T <= t) = {:.4}, 99% bound (-inf, {:.4}], reject H0: {}",
            r.t, r.df, r.p_value, r.upper_bound, r.reject
        );
    }
    Ok(())
}
