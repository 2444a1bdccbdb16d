//! File interchange for fields, masks, determinant/severity maps, and
//! reports.
//!
//! Volumes are NIfTI-1 single-file (`.nii`, optionally gzipped) or NPY
//! v1.0 (`.npy`); the container is detected from file content, gzip from
//! the leading magic bytes. Writers go through a temp-file-then-rename so
//! a failed run never leaves a partial output.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, VoxelMask};
use crate::jacobian::ScalarMap;

mod nifti;
mod npy;
pub mod report;

pub use nifti::NiftiHeaderSubset;
pub use report::{read_report_json, report_json_string, write_report, ReportFormat, ReportRecord};

/// How displacement component values in a file are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplacementUnits {
    /// Components are voxel offsets (the default).
    #[default]
    Voxel,
    /// Components are physical offsets; divided by the voxel spacing on load.
    Physical,
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn wants_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn is_npy_path(path: &Path) -> bool {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    name.ends_with(".npy") || name.ends_with(".npy.gz")
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    if wants_gzip(path) {
        let mut enc = GzEncoder::new(tmp.as_file_mut(), Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        tmp.write_all(bytes)?;
    }
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads a displacement field from NIfTI-1 or NPY, by content.
pub fn read_field(path: &Path, units: DisplacementUnits) -> Result<DisplacementField> {
    let bytes = load_bytes(path)?;
    if bytes.starts_with(npy::MAGIC) {
        npy::field_from_bytes(&bytes)
    } else {
        nifti::field_from_bytes(&bytes, units)
    }
}

/// Reads a voxel mask (nonzero means included) from NIfTI-1 or NPY.
pub fn read_mask(path: &Path) -> Result<VoxelMask> {
    let bytes = load_bytes(path)?;
    if bytes.starts_with(npy::MAGIC) {
        npy::mask_from_bytes(&bytes)
    } else {
        nifti::mask_from_bytes(&bytes)
    }
}

/// Writes a field as float64: NPY if the path ends in `.npy`, NIfTI-1
/// (`dim[5]` vector layout) otherwise. `.gz` suffixes gzip the output.
pub fn write_field(field: &DisplacementField, path: &Path) -> Result<()> {
    let bytes = if is_npy_path(path) {
        npy::field_to_bytes(field)
    } else {
        nifti::field_to_bytes(field)
    };
    write_atomic(path, &bytes)
}

/// Writes a scalar map as float32 NIfTI-1; undefined points become NaN.
pub fn write_map(map: &ScalarMap, path: &Path) -> Result<()> {
    write_atomic(path, &nifti::map_to_bytes(map))
}
