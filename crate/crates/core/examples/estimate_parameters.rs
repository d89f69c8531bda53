//! Sliding-window likelihood estimates of a non-stationary parameter map,
//! scored against the truth.

use std::time::Instant;

use nsgrf::analytics::param_metrics;
use nsgrf::mle::{fit_window, sliding_window_estimate, FitOptions, WindowSpec};
use nsgrf::sar::ParamFields;
use nsgrf::simulator::simulate_ensemble;
use nsgrf::{Field, GridGeometry};

fn main() -> nsgrf::Result<()> {
    // One stationary window first.
    let geometry = GridGeometry::truncated(25, 25)?;
    let ens = simulate_ensemble(
        &ParamFields::constant(25, 25, 0.5, 3.0, 0.3),
        &geometry,
        30,
        1,
    )?;
    let fit = fit_window(&ens, &FitOptions::default())?;
    println!(
        "stationary window: kappa2 {:.3} (0.5), rho {:.3} (3), theta {:.3} (0.3), {:?} after {} evaluations",
        fit.kappa2, fit.rho, fit.theta, fit.status, fit.evaluations
    );

    let (h, w) = (40, 40);
    let truth = ParamFields::new(
        Field::filled(h, w, 0.4),
        Field::from_fn(h, w, |_, j| if j < w / 2 { 1.5 } else { 4.0 }),
        Field::from_fn(h, w, |i, _| -0.6 + 1.2 * i as f64 / (h - 1) as f64),
    )?;
    let ens = simulate_ensemble(&truth, &GridGeometry::truncated(h, w)?, 30, 2)?;
    let spec = WindowSpec::new(15)?.with_stride(4)?;
    let t = Instant::now();
    let est = sliding_window_estimate(&ens, &spec)?;
    println!(
        "{h}x{w} map, window {} stride {}: {:.1} s, {} non-converged pixels, {} weak-theta pixels",
        spec.size,
        spec.stride,
        t.elapsed().as_secs_f64(),
        est.n_failed(),
        est.weak_theta.iter().filter(|&&v| v == 1).count()
    );
    print!("{}", param_metrics(&est.params, &truth)?.to_text());
    Ok(())
}
