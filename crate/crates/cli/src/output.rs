//! File emission: atomic writes, CSV tables, JSON reports.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! crash mid-run never leaves a truncated result that looks finished. Floats
//! in CSV output use 17 significant digits so the tables round-trip to the
//! exact binary values.

use crate::Failure;
use gutbrain_core::{BodeData, SweepResult, TimeSeries};
use serde::Serialize;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write `bytes` to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Failure::usage(format!("output path {} has no file name", path.display())))?;
    let nonce = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp_name = format!(
        ".{}.{}.{nonce}.tmp",
        file_name.to_string_lossy(),
        std::process::id()
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.clone().into(),
    };
    let io_err = |stage: &str, e: std::io::Error| {
        Failure::domain(format!("{stage} {}: {e}", path.display()))
    };
    std::fs::write(&tmp_path, bytes).map_err(|e| io_err("writing", e))?;
    std::fs::rename(&tmp_path, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp_path);
        io_err("renaming into", e)
    })?;
    Ok(())
}

/// 17-significant-digit float formatting for CSV cells.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::domain(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn write_timeseries_csv(path: &Path, ts: &TimeSeries) -> Result<(), Failure> {
    let mut out = String::with_capacity(ts.len() * 200 + 64);
    out.push_str("t,P,T,S,A,C,L,u,E\n");
    for i in 0..ts.len() {
        out.push_str(&fmt(ts.times[i]));
        for value in ts.states[i].as_array() {
            out.push(',');
            out.push_str(&fmt(value));
        }
        out.push(',');
        out.push_str(&fmt(ts.inputs[i]));
        out.push(',');
        out.push_str(&fmt(ts.drives[i]));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn write_bode_csv(path: &Path, bode: &BodeData) -> Result<(), Failure> {
    let mut out = String::with_capacity(bode.points.len() * 120 + 64);
    out.push_str("omega,reH,imH,mag_db,phase_deg\n");
    for p in &bode.points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(p.omega),
            fmt(p.h_re),
            fmt(p.h_im),
            fmt(p.magnitude_db),
            fmt(p.phase_deg)
        ));
    }
    atomic_write(path, out.as_bytes())
}

pub fn write_bifurcation_csv(path: &Path, sweep: &SweepResult) -> Result<(), Failure> {
    let mut out = String::with_capacity(sweep.points.len() * 90 + 64);
    out.push_str("kleak,amplitude,mean_cortisol,regime\n");
    for p in &sweep.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(p.k_leak),
            fmt(p.amplitude),
            fmt(p.mean_cortisol),
            p.regime.as_str()
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Generic two-column CSV for sweep curves.
pub fn write_curve_csv(
    path: &Path,
    x_name: &str,
    y_name: &str,
    rows: &[(f64, f64)],
) -> Result<(), Failure> {
    let mut out = String::with_capacity(rows.len() * 60 + 32);
    out.push_str(x_name);
    out.push(',');
    out.push_str(y_name);
    out.push('\n');
    for (x, y) in rows {
        out.push_str(&format!("{},{}\n", fmt(*x), fmt(*y)));
    }
    atomic_write(path, out.as_bytes())
}
