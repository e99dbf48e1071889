//! Energy time series as CSV with CRLF line ends and 17 significant digits.

use std::io::Write;
use std::path::Path;

use crate::energy::{EnergyReport, SERIES_HEADER};
use crate::error::{NschError, Result};

pub fn header() -> String {
    SERIES_HEADER.join(",")
}

pub fn format_row(r: &EnergyReport) -> String {
    r.to_array().iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

pub fn to_csv(reports: &[EnergyReport]) -> String {
    let mut s = String::with_capacity(64 + reports.len() * 300);
    s.push_str(&header());
    s.push_str("\r\n");
    for r in reports {
        s.push_str(&format_row(r));
        s.push_str("\r\n");
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<EnergyReport>> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    match lines.next() {
        Some(h) if h == header() => {}
        Some(h) => return Err(NschError::MalformedSeries(format!("unexpected header {h:?}"))),
        None => return Err(NschError::MalformedSeries("empty file".into())),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| NschError::MalformedSeries(format!("row {}: {e}", k + 1)))?;
        let arr: [f64; 12] = vals
            .try_into()
            .map_err(|v: Vec<f64>| NschError::MalformedSeries(format!("row {} has {} columns", k + 1, v.len())))?;
        out.push(EnergyReport::from_array(arr));
    }
    Ok(out)
}

pub fn write_series(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    Ok(super::write_atomic(path, to_csv(reports).as_bytes())?)
}

pub fn read_series(path: &Path) -> Result<Vec<EnergyReport>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Appends rows as they are produced.
pub struct SeriesWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "{}\r\n", header())?;
        Ok(SeriesWriter { out })
    }

    pub fn push(&mut self, r: &EnergyReport) -> Result<()> {
        write!(self.out, "{}\r\n", format_row(r))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
