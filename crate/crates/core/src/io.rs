//! Trace and grid serialization.
//!
//! Traces travel as two-column CSV (`axis,value`) with a one-line header
//! naming columns and units. Complex 2-D grids additionally have a compact
//! binary dump:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PAIRGRD2"
//! 8       4     format version (u32 LE, currently 1)
//! 12      8     axis0 length (u64 LE)
//! 20      8     axis1 length (u64 LE)
//! 28      8     axis0 start (f64 LE)   36  8  axis0 step (f64 LE)
//! 44      8     axis1 start (f64 LE)   52  8  axis1 step (f64 LE)
//! 60      16*n0*n1  row-major (re, im) f64 LE pairs
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use thiserror::Error;

use crate::fit::SweepRecord;
use crate::grid::{Axis, Grid2, GridError, Trace};
use crate::num::Scalar;

const GRID_MAGIC: &[u8; 8] = b"PAIRGRD2";
const GRID_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("not a grid dump (bad magic or version)")]
    BadHeader,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Write a real trace as CSV with a header line naming both columns.
pub fn write_trace_csv<T: Scalar>(trace: &Trace<T>, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", trace.axis.label, trace.value_label)?;
    for (x, v) in trace.iter() {
        writeln!(w, "{x},{v}")?;
    }
    Ok(())
}

/// Write several traces sharing one axis as a multi-column CSV.
pub fn write_multi_trace_csv<T: Scalar>(
    axis: &Axis<T>,
    columns: &[(&str, &[T])],
    path: &Path,
) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<&str> = std::iter::once(axis.label.as_str())
        .chain(columns.iter().map(|(name, _)| *name))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (k, x) in axis.values().enumerate() {
        write!(w, "{x}")?;
        for (_, vals) in columns {
            write!(w, ",{}", vals[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Read a two-column (or wider; extra columns ignored) CSV trace, tolerating
/// a header line.
pub fn read_trace_csv<T: Scalar>(path: &Path) -> Result<Trace<T>, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut xs: Vec<T> = Vec::new();
    let mut ys: Vec<T> = Vec::new();
    let mut labels = ("x".to_string(), "value".to_string());
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(IoError::Parse {
                line: idx + 1,
                reason: "expected at least two comma-separated columns".into(),
            });
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(T::of(x));
                ys.push(T::of(y));
            }
            _ if xs.is_empty() => {
                labels = (fields[0].to_string(), fields[1].to_string());
            }
            _ => {
                return Err(IoError::Parse {
                    line: idx + 1,
                    reason: "non-numeric row after data began".into(),
                })
            }
        }
    }
    if xs.len() < 2 {
        return Err(IoError::Parse {
            line: 0,
            reason: "need at least two samples".into(),
        });
    }
    let step = xs[1] - xs[0];
    let axis = Axis::new(xs[0], step, xs.len(), labels.0)?;
    // Enforce uniform sampling within a small tolerance.
    for (k, &x) in xs.iter().enumerate() {
        if (x - axis.value(k)).abs() > step.abs() * T::of(1e-6) {
            return Err(IoError::Parse {
                line: k + 1,
                reason: "axis is not uniformly sampled".into(),
            });
        }
    }
    Ok(Trace::new(axis, ys, labels.1)?)
}

/// Write a complex grid as CSV: `axis0,axis1,re,im`, row-major.
pub fn write_grid_csv<T: Scalar>(
    grid: &Grid2<T, Complex<T>>,
    path: &Path,
) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{},{},re_{},im_{}",
        grid.axis0.label, grid.axis1.label, grid.value_label, grid.value_label
    )?;
    for i in 0..grid.axis0.len() {
        let x0 = grid.axis0.value(i);
        for j in 0..grid.axis1.len() {
            let v = grid.at(i, j);
            writeln!(w, "{x0},{},{},{}", grid.axis1.value(j), v.re, v.im)?;
        }
    }
    Ok(())
}

/// Write the compact binary dump documented in the module header.
pub fn write_grid_binary<T: Scalar>(
    grid: &Grid2<T, Complex<T>>,
    path: &Path,
) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    w.write_all(&GRID_VERSION.to_le_bytes())?;
    w.write_all(&(grid.axis0.len() as u64).to_le_bytes())?;
    w.write_all(&(grid.axis1.len() as u64).to_le_bytes())?;
    for v in [
        grid.axis0.start(),
        grid.axis0.step(),
        grid.axis1.start(),
        grid.axis1.step(),
    ] {
        w.write_all(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
    }
    for v in grid.values() {
        w.write_all(&v.re.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
        w.write_all(&v.im.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
    }
    Ok(())
}

/// Read a binary grid dump back.
pub fn read_grid_binary<T: Scalar>(path: &Path) -> Result<Grid2<T, Complex<T>>, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    if &magic != GRID_MAGIC || u32::from_le_bytes(version) != GRID_VERSION {
        return Err(IoError::BadHeader);
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n0 = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let n1 = u64::from_le_bytes(u64buf) as usize;
    let mut f = [0u8; 8];
    let mut header = [0f64; 4];
    for h in &mut header {
        r.read_exact(&mut f)?;
        *h = f64::from_le_bytes(f);
    }
    let mut values = Vec::with_capacity(n0 * n1);
    for _ in 0..n0 * n1 {
        r.read_exact(&mut f)?;
        let re = f64::from_le_bytes(f);
        r.read_exact(&mut f)?;
        let im = f64::from_le_bytes(f);
        values.push(Complex::new(T::of(re), T::of(im)));
    }
    let axis0 = Axis::new(T::of(header[0]), T::of(header[1]), n0, "axis0")?;
    let axis1 = Axis::new(T::of(header[2]), T::of(header[3]), n1, "axis1")?;
    Ok(Grid2::new(axis0, axis1, values, "grid")?)
}

/// Write a sweep record in the interchange layout
/// `delta_p_hz,counts_per_s,reflection_ratio` (detuning stored as an
/// ordinary, not angular, frequency).
pub fn write_sweep_csv<T: Scalar>(sweep: &SweepRecord<T>, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "delta_p_hz,counts_per_s,reflection_ratio")?;
    for (k, dp) in sweep.detuning.values().enumerate() {
        writeln!(
            w,
            "{},{},{}",
            dp / T::tau(),
            sweep.counts[k],
            sweep.reflection[k]
        )?;
    }
    Ok(())
}

/// Ingest a sweep CSV in the layout written by [`write_sweep_csv`].
pub fn read_sweep_csv<T: Scalar>(path: &Path) -> Result<SweepRecord<T>, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut dps: Vec<T> = Vec::new();
    let mut counts: Vec<T> = Vec::new();
    let mut reflection: Vec<T> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(IoError::Parse {
                line: idx + 1,
                reason: "expected delta_p_hz,counts_per_s,reflection_ratio".into(),
            });
        }
        let parsed: Option<Vec<f64>> = fields[..3].iter().map(|s| s.parse().ok()).collect();
        match parsed {
            Some(v) => {
                dps.push(T::of(v[0]) * T::tau());
                counts.push(T::of(v[1]));
                reflection.push(T::of(v[2]));
            }
            None if dps.is_empty() => continue, // header line
            None => {
                return Err(IoError::Parse {
                    line: idx + 1,
                    reason: "non-numeric row after data began".into(),
                })
            }
        }
    }
    if dps.len() < 2 {
        return Err(IoError::Parse {
            line: 0,
            reason: "need at least two sweep points".into(),
        });
    }
    let step = dps[1] - dps[0];
    let axis = Axis::new(dps[0], step, dps.len(), "delta_p_rad_s")?;
    SweepRecord::new(axis, counts, reflection).map_err(|_| IoError::Parse {
        line: 0,
        reason: "sweep columns inconsistent".into(),
    })
}
