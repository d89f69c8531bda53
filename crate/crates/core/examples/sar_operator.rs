//! Dispersion tensor, 9-point stencil and the sparse SAR operator.

use nsgrf::sar::{assemble_sar, dispersion_at, precision, stencil_at, ParamFields, OFFSETS};
use nsgrf::{Field, GridGeometry};

fn main() -> nsgrf::Result<()> {
    let d = dispersion_at(2.0, std::f64::consts::FRAC_PI_4)?;
    println!(
        "D(rho=2, theta=pi/4) = [[{:.4}, {:.4}], [{:.4}, {:.4}]]",
        d.d11, d.d12, d.d12, d.d22
    );
    println!("det D = {:.15}", d.d11 * d.d22 - d.d12 * d.d12);

    let st = stencil_at(0.5, &d)?;
    for di in [1, 0, -1] {
        let row: Vec<String> = (-1..=1)
            .map(|dj| format!("{:>8.4}", st.weight(di, dj)))
            .collect();
        println!("  {}", row.join(" "));
    }
    println!(
        "weights sum to kappa2: {:.12}",
        OFFSETS.iter().map(|&(i, j)| st.weight(i, j)).sum::<f64>()
    );

    // A left-to-right rotation of the anisotropy direction.
    let (h, w) = (32, 48);
    let params = ParamFields::new(
        Field::filled(h, w, 0.3),
        Field::filled(h, w, 4.0),
        Field::from_fn(h, w, |_, j| -1.2 + 2.4 * j as f64 / (w - 1) as f64),
    )?;
    let sys = assemble_sar(&params, &GridGeometry::truncated(h, w)?)?;
    let q = precision(&sys);
    println!(
        "B: {}x{} with {} nonzeros, Q has {}, log|det B| = {:.4}",
        h * w,
        h * w,
        sys.matrix().nnz(),
        q.nnz(),
        sys.log_abs_det()?
    );
    Ok(())
}
