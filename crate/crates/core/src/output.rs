//! Shared CSV formatting.

use std::io::Write;

use crate::frac::DerivativeRow;
use crate::timescale::Grid;

/// Fixed 17-significant-digit scientific notation, so output is reproducible
/// and round-trips to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `theta, caputo, rl, caputo_via_rl, abs_diff` rows.
pub fn write_comparison_csv<W: Write>(
    grid: &Grid,
    rows: &[DerivativeRow],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "caputo", "rl", "caputo_via_rl", "abs_diff"])?;
    for r in rows {
        w.write_record([
            format_float(grid.node(r.node)),
            format_float(r.caputo),
            format_float(r.rl),
            format_float(r.caputo_via_rl),
            format_float((r.caputo - r.caputo_via_rl).abs()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
