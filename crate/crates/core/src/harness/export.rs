//! Trajectory export as CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::Config;
use crate::dynamics::{trajectory_prefix, Trajectory};
use crate::error::Result;
use crate::phase::FullPoint;

use super::format_float;

/// `steps + 1` equally spaced times from `t0` to `t1`.
pub fn uniform_grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![t0];
    }
    (0..=steps)
        .map(|i| t0 + (t1 - t0) * (i as f64 / steps as f64))
        .collect()
}

/// CSV text with header `t,q_1..q_n,h_1..h_K,gauge_defect`; `q` columns are
/// the unwrapped eigenvalue phases.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = Vec::new();
    write_rows(&mut out, tr).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("ASCII output")
}

fn write_rows<W: Write>(w: &mut W, tr: &Trajectory) -> std::io::Result<()> {
    let n = tr.n();
    let kk = tr.conserved.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q_{i}")));
    header.extend((1..=kk).map(|i| format!("h_{i}")));
    header.push("gauge_defect".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..tr.len() {
        let mut row = vec![format_float(tr.times[i])];
        row.extend(tr.phases[i].iter().map(|&q| format_float(q)));
        row.extend(tr.conserved[i].iter().map(|&h| format_float(h)));
        row.push(format_float(tr.gauge_defects[i]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_trajectory_csv(tr: &Trajectory, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_rows(&mut w, tr)?;
    w.flush()?;
    Ok(())
}

/// Computes the trajectory of `x0` under the `k`-th flow and writes it to
/// `path`. If regularity is lost at some sample, the rows before it are
/// written and the error is returned.
pub fn export_trajectory(
    x0: &FullPoint,
    k: u32,
    t_grid: &[f64],
    path: &Path,
) -> Result<Trajectory> {
    let (tr, err) = trajectory_prefix(x0, k, t_grid, &Config::default());
    write_trajectory_csv(&tr, path)?;
    match err {
        Some(e) => Err(e),
        None => Ok(tr),
    }
}
