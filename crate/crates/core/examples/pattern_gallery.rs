//! One draw of every spatial pattern family for each parameter channel.

use nsgrf::patterns::{evaluate_pattern, sample_pattern_spec, PatternKind};
use nsgrf::rng::stream_rng;
use nsgrf::sar::ParamKind;
use nsgrf::GridGeometry;

fn main() -> nsgrf::Result<()> {
    let geometry = GridGeometry::truncated(64, 96)?;
    println!(
        "{:<16} {:<7} {:>10} {:>10} {:>10}",
        "family", "param", "min", "mean", "max"
    );
    for (k, kind) in PatternKind::ALL.into_iter().enumerate() {
        for param in ParamKind::ALL {
            let mut rng = stream_rng(7, (k * 3 + param.channel()) as u64);
            let spec = sample_pattern_spec(kind, param, &mut rng);
            let f = evaluate_pattern(&spec, &geometry);
            println!(
                "{:<16} {:<7} {:>10.4} {:>10.4} {:>10.4}",
                format!("{kind:?}"),
                param.name(),
                f.min(),
                f.mean(),
                f.max()
            );
        }
    }
    Ok(())
}
