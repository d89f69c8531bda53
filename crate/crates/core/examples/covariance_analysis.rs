//! Anchor correlation rows of an emulated ensemble against the truth, with
//! a paired t-test against a misspecified baseline.

use nsgrf::analytics::covariance_analysis;
use nsgrf::sar::ParamFields;
use nsgrf::simulator::simulate_ensemble;
use nsgrf::{Field, GridGeometry};

fn main() -> nsgrf::Result<()> {
    let (h, w) = (32, 32);
    let geometry = GridGeometry::truncated(h, w)?;
    let truth_params = ParamFields::new(
        Field::filled(h, w, 0.2),
        Field::from_fn(h, w, |i, j| {
            1.0 + 4.0 * ((i + j) as f64 / (h + w - 2) as f64)
        }),
        Field::filled(h, w, 0.8),
    )?;
    let truth = simulate_ensemble(&truth_params, &geometry, 300, 1)?;
    let emulated = simulate_ensemble(&truth_params, &geometry, 300, 2)?;
    let baseline = simulate_ensemble(
        &ParamFields::constant(h, w, 0.2, 1.0, 0.0),
        &geometry,
        300,
        3,
    )?;

    let report = covariance_analysis(&truth, &emulated, Some(&baseline), 25, 11)?;
    print!("{}", report.to_text());
    Ok(())
}
