//! Report serialization: JSON (schema v1) and CSV with a fixed header row.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::DiffeoReport;

/// Output format for [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Stable on-disk form of a [`DiffeoReport`] (schema version 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub schema_version: u32,
    /// "nda" or "ndv".
    pub measure_kind: String,
    pub rank: usize,
    pub considered_points: usize,
    pub partially_defined_points: usize,
    pub central_nonpositive_count: usize,
    pub any_nonpositive_count: usize,
    pub central_nonpositive_pct: f64,
    pub any_nonpositive_pct: f64,
    pub measure_voxel: f64,
    pub measure_physical: f64,
    pub measure_pct: f64,
    pub mask_applied: bool,
    pub first_violation: Option<ViolationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    /// Rank-length grid indices.
    pub point: Vec<usize>,
    /// Variant string, e.g. "corner:++" or "star1".
    pub variant: String,
    pub value: f64,
}

pub const CSV_HEADER: &str = "schema_version,measure_kind,rank,considered_points,\
partially_defined_points,central_nonpositive_count,central_nonpositive_pct,\
any_nonpositive_count,any_nonpositive_pct,measure_voxel,measure_physical,\
measure_pct,mask_applied,first_violation_point,first_violation_variant,\
first_violation_value";

impl ReportRecord {
    pub fn from_report(report: &DiffeoReport) -> Self {
        Self {
            schema_version: 1,
            measure_kind: report.measure_kind.as_str().to_string(),
            rank: report.rank,
            considered_points: report.considered_points,
            partially_defined_points: report.partially_defined_points,
            central_nonpositive_count: report.central_nonpositive_count,
            any_nonpositive_count: report.any_nonpositive_count,
            central_nonpositive_pct: report.central_nonpositive_pct,
            any_nonpositive_pct: report.any_nonpositive_pct,
            measure_voxel: report.measure_voxel,
            measure_physical: report.measure_physical,
            measure_pct: report.measure_pct,
            mask_applied: report.mask_applied,
            first_violation: report.first_violation.map(|v| ViolationRecord {
                point: v.point.coords()[..report.rank].to_vec(),
                variant: v.variant.to_string(),
                value: v.value,
            }),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One CSV row matching [`CSV_HEADER`]. The violation point is written
    /// as semicolon-joined indices.
    pub fn to_csv_row(&self) -> String {
        let (vp, vv, vval) = match &self.first_violation {
            Some(v) => {
                let point: Vec<String> = v.point.iter().map(|i| i.to_string()).collect();
                (point.join(";"), v.variant.clone(), v.value.to_string())
            }
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.schema_version,
            self.measure_kind,
            self.rank,
            self.considered_points,
            self.partially_defined_points,
            self.central_nonpositive_count,
            self.central_nonpositive_pct,
            self.any_nonpositive_count,
            self.any_nonpositive_pct,
            self.measure_voxel,
            self.measure_physical,
            self.measure_pct,
            self.mask_applied,
            vp,
            vv,
            vval
        )
    }
}

/// JSON text for a report; byte-identical for identical reports.
pub fn report_json_string(report: &DiffeoReport) -> Result<String> {
    ReportRecord::from_report(report).to_json_string()
}

/// Writes a report atomically in the chosen format.
pub fn write_report(report: &DiffeoReport, path: &Path, format: ReportFormat) -> Result<()> {
    let record = ReportRecord::from_report(report);
    let bytes = match format {
        ReportFormat::Json => record.to_json_string()?.into_bytes(),
        ReportFormat::Csv => format!("{CSV_HEADER}\n{}\n", record.to_csv_row()).into_bytes(),
    };
    super::write_atomic(path, &bytes)
}

/// Parses a JSON report written by [`write_report`].
pub fn read_report_json(path: &Path) -> Result<ReportRecord> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}
