//! CSV outputs with fixed column order.

use std::fs::File;
use std::path::Path;

use mdn_core::lab::VarianceRow;

use crate::error::{HarnessError, Result};

pub const METRICS_HEADER: [&str; 9] = [
    "phase", "iter", "image_id", "sigma_n", "sigma_r", "scale", "loss", "psnr_db", "wall_ms",
];

pub const LAB_HEADER: [&str; 6] = ["M", "N", "sigma_n", "sigma_r", "var_empirical", "var_predicted"];

/// One line of a training or adaptation log. Missing values are written as
/// empty fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRow {
    pub phase: String,
    pub iter: usize,
    pub image_id: Option<String>,
    pub sigma_n: Option<f64>,
    pub sigma_r: Option<f64>,
    pub scale: Option<f64>,
    pub loss: Option<f64>,
    pub psnr_db: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl MetricsRow {
    pub fn new(phase: impl Into<String>, iter: usize) -> Self {
        Self {
            phase: phase.into(),
            iter,
            ..Default::default()
        }
    }

    fn fields(&self) -> [String; 9] {
        [
            self.phase.clone(),
            self.iter.to_string(),
            self.image_id.clone().unwrap_or_default(),
            opt(self.sigma_n),
            opt(self.sigma_r),
            opt(self.scale),
            opt(self.loss),
            opt(self.psnr_db),
            opt(self.wall_ms),
        ]
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header on creation, then one record per row.
pub struct CsvSink<W: std::io::Write> {
    inner: csv::Writer<W>,
}

impl CsvSink<File> {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        CsvSink::new(file, header)
    }
}

impl<W: std::io::Write> CsvSink<W> {
    pub fn new(writer: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn metrics(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.write_record(row.fields())?;
        Ok(())
    }

    pub fn lab(&mut self, row: &VarianceRow) -> Result<()> {
        self.inner.write_record([
            row.m.to_string(),
            row.n.to_string(),
            row.sigma_n255.to_string(),
            row.sigma_r255.to_string(),
            row.var_empirical.to_string(),
            row.var_predicted.to_string(),
        ])?;
        Ok(())
    }

    pub fn record<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| HarnessError::data(format!("csv flush: {e}")))?;
        self.inner
            .into_inner()
            .map_err(|e| HarnessError::data(format!("csv flush: {}", e.error())))
    }
}
