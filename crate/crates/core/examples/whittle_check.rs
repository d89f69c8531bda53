//! Empirical lag correlation of an isotropic field against the Whittle
//! curve `c(d) = kappa d K1(kappa d)`.

use nsgrf::analytics::{mean_lag_correlation, whittle_correlation};
use nsgrf::sar::ParamFields;
use nsgrf::simulator::simulate_ensemble;
use nsgrf::GridGeometry;

fn main() -> nsgrf::Result<()> {
    let (n, kappa2) = (64, 0.25);
    let ens = simulate_ensemble(
        &ParamFields::constant(n, n, kappa2, 1.0, 0.0),
        &GridGeometry::truncated(n, n)?,
        2000,
        5,
    )?;
    println!("{:>3} {:>10} {:>10}", "d", "empirical", "whittle");
    for d in 1..=8 {
        let emp = mean_lag_correlation(&ens, d, 16)?;
        println!(
            "{d:>3} {emp:>10.4} {:>10.4}",
            whittle_correlation(kappa2.sqrt(), d as f64)
        );
    }
    Ok(())
}
