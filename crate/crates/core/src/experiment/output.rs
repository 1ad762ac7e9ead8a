//! CSV writers. Floats use the shortest representation that round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::SwitchingDistribution;
use crate::error::Result;
use crate::propagator::TimeSeries;
use crate::state::WaveFunction;

pub const TIME_SERIES_HEADER: &str = "t,gamma,survival,norm_full,x_mean,flux_at_xstar";
pub const RATES_HEADER: &str = "gamma,rate_fitted,rate_wkb,residual_rms,window_lo,window_hi";
pub const SWITCHING_HEADER: &str = "gamma_bin_center,pdf,cumulative";
pub const PML_HEADER: &str = "k,A,l_ext,width,reflection";
pub const RELAXATION_HEADER: &str = "t,instantaneous_rate,ratio_to_asymptotic";
pub const MEASUREMENT_HEADER: &str =
    "gamma,t_measure,x_cut,survival_at_measure,rate_asymptotic,knee_time,rate_post_knee";
pub const STATE_HEADER: &str = "x,re,im";

/// First field of the row appended to a file whose run failed.
pub const ERROR_SENTINEL: &str = "ERROR";

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == 0.0 {
        "0".into()
    } else if v.abs() < 1e-4 || v.abs() >= 1e16 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Rows of floats under a single header line.
pub struct CsvTable {
    header: &'static str,
    rows: Vec<Vec<f64>>,
    error: Option<String>,
}

impl CsvTable {
    pub fn new(header: &'static str) -> Self {
        Self {
            header,
            rows: Vec::new(),
            error: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns());
        self.rows.push(row);
    }

    /// Marks the table as the partial output of a failed run.
    pub fn flag_error(&mut self, message: impl Into<String>) {
        self.error = Some(message.into());
    }

    fn columns(&self) -> usize {
        self.header.split(',').count()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", self.header)?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        if let Some(msg) = &self.error {
            let msg = msg.replace([',', '\n'], ";");
            let pad = ",".repeat(self.columns().saturating_sub(2));
            writeln!(out, "{ERROR_SENTINEL},{msg}{pad}")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn time_series_table(ts: &TimeSeries) -> CsvTable {
    let mut t = CsvTable::new(TIME_SERIES_HEADER);
    for i in 0..ts.len() {
        t.push(vec![
            ts.times[i],
            ts.gamma[i],
            ts.survival[i],
            ts.norm_full[i],
            ts.x_mean[i],
            ts.flux_at_xstar[i],
        ]);
    }
    t
}

pub fn switching_table(d: &SwitchingDistribution) -> CsvTable {
    let mut t = CsvTable::new(SWITCHING_HEADER);
    for i in 0..d.pdf.len() {
        t.push(vec![d.gamma_bins[i], d.pdf[i], d.cumulative[i]]);
    }
    t
}

pub fn state_table(psi: &WaveFunction) -> CsvTable {
    let mut t = CsvTable::new(STATE_HEADER);
    for (i, a) in psi.amplitudes().iter().enumerate() {
        t.push(vec![psi.grid().x(i), a.re, a.im]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e-7, -1e-300, 123456.789, 1e20, 0.0, 5e-324] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.45), "0.45");
        assert_eq!(fmt_f64(2e-5), "2e-5");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn sentinel_row_keeps_column_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut t = CsvTable::new(TIME_SERIES_HEADER);
        t.push(vec![0.0, 0.4, 1.0, 1.0, 0.4, 0.0]);
        t.flag_error("numerical blow-up at step 7, partial");
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("ERROR,numerical blow-up at step 7; partial"));
        assert_eq!(last.split(',').count(), 6);
    }
}
