//! CSV writers shared by the simulator, observer and harness.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pde::SpatioTemporalField;
use crate::series::TimeSeries;

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// Header `t, z₀, z₁, …`, one row per `stride`-th time stamp (the last is always kept).
pub fn write_field(path: &Path, field: &SpatioTemporalField, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(field.z().iter().map(|&z| fmt(z)));
    w.write_record(&header)?;
    let last = field.n_times().saturating_sub(1);
    for (k, &t) in field.t().iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let mut rec = vec![fmt(t)];
        rec.extend(field.row(k).iter().map(|&v| fmt(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side series on a shared time grid; columns are `name1..nameN`
/// (plain `name` for scalar series).
pub fn write_series(path: &Path, columns: &[(&str, &TimeSeries)]) -> Result<()> {
    let n = columns.first().map_or(0, |(_, s)| s.len());
    if columns.iter().any(|(_, s)| s.len() != n) {
        return Err(Error::dim("series written side by side must share a time grid"));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for (name, s) in columns {
        if s.dim() == 1 {
            header.push(name.to_string());
        } else {
            header.extend((1..=s.dim()).map(|i| format!("{name}{i}")));
        }
    }
    w.write_record(&header)?;
    for k in 0..n {
        let mut rec = vec![fmt(columns[0].1.t()[k])];
        for (_, s) in columns {
            rec.extend(s.row(k).iter().map(|&v| fmt(v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
