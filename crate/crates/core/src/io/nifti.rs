//! NIfTI-1 single-file subset: float32/float64 volumes, magic "n+1".
//!
//! Displacement fields are accepted with vector components in dim[5]
//! (dim[0] = 5, the intent-1007 layout) or in dim[4] (dim[0] = 4). Written
//! files always use the dim[5] layout. Extensions are skipped, never
//! interpreted; headers beyond this subset are ignored.

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridDims, VoxelMask};
use crate::jacobian::ScalarMap;

use super::DisplacementUnits;

const HEADER_SIZE: usize = 348;
const MAGIC_OFFSET: usize = 344;
pub(crate) const DT_UINT8: i16 = 2;
pub(crate) const DT_FLOAT32: i16 = 16;
pub(crate) const DT_FLOAT64: i16 = 64;
const INTENT_VECTOR: i16 = 1007;

/// The header fields this crate reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeaderSubset {
    pub dim: [i16; 8],
    pub intent_code: i16,
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub little_endian: bool,
}

impl NiftiHeaderSubset {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::CorruptHeader(format!(
                "file shorter than the {HEADER_SIZE}-byte header"
            )));
        }
        let little_endian = match LittleEndian::read_i32(&bytes[0..4]) {
            348 => true,
            _ if BigEndian::read_i32(&bytes[0..4]) == 348 => false,
            other => {
                return Err(Error::CorruptHeader(format!(
                    "header size field is {other}, expected 348"
                )))
            }
        };
        if &bytes[MAGIC_OFFSET..MAGIC_OFFSET + 4] != b"n+1\0" {
            return Err(Error::CorruptHeader(
                "magic is not \"n+1\" (only single-file NIfTI-1 is supported)".into(),
            ));
        }
        let header = if little_endian {
            Self::parse_fields::<LittleEndian>(bytes, true)
        } else {
            Self::parse_fields::<BigEndian>(bytes, false)
        };
        let ndim = header.dim[0];
        if !(1..=7).contains(&ndim) {
            return Err(Error::CorruptHeader(format!("dim[0] = {ndim} out of range")));
        }
        for a in 1..=ndim as usize {
            if header.dim[a] < 1 {
                return Err(Error::CorruptHeader(format!(
                    "dim[{a}] = {} is not positive",
                    header.dim[a]
                )));
            }
        }
        if (header.vox_offset as usize) < HEADER_SIZE || !header.vox_offset.is_finite() {
            return Err(Error::CorruptHeader(format!(
                "vox_offset {} precedes the header end",
                header.vox_offset
            )));
        }
        Ok(header)
    }

    fn parse_fields<E: ByteOrder>(bytes: &[u8], little_endian: bool) -> Self {
        let mut dim = [0i16; 8];
        for (i, d) in dim.iter_mut().enumerate() {
            *d = E::read_i16(&bytes[40 + 2 * i..]);
        }
        let mut pixdim = [0f32; 8];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = E::read_f32(&bytes[76 + 4 * i..]);
        }
        Self {
            dim,
            intent_code: E::read_i16(&bytes[68..]),
            datatype: E::read_i16(&bytes[70..]),
            bitpix: E::read_i16(&bytes[72..]),
            pixdim,
            vox_offset: E::read_f32(&bytes[108..]),
            scl_slope: E::read_f32(&bytes[112..]),
            scl_inter: E::read_f32(&bytes[116..]),
            little_endian,
        }
    }

    fn serialize(&self) -> Vec<u8> {
        // Written little-endian, followed by the 4-byte "no extensions" flag.
        let mut out = vec![0u8; HEADER_SIZE + 4];
        LittleEndian::write_i32(&mut out[0..], 348);
        for (i, &d) in self.dim.iter().enumerate() {
            LittleEndian::write_i16(&mut out[40 + 2 * i..], d);
        }
        LittleEndian::write_i16(&mut out[68..], self.intent_code);
        LittleEndian::write_i16(&mut out[70..], self.datatype);
        LittleEndian::write_i16(&mut out[72..], self.bitpix);
        for (i, &p) in self.pixdim.iter().enumerate() {
            LittleEndian::write_f32(&mut out[76 + 4 * i..], p);
        }
        LittleEndian::write_f32(&mut out[108..], self.vox_offset);
        LittleEndian::write_f32(&mut out[112..], self.scl_slope);
        LittleEndian::write_f32(&mut out[116..], self.scl_inter);
        out[MAGIC_OFFSET..MAGIC_OFFSET + 4].copy_from_slice(b"n+1\0");
        out
    }
}

fn datatype_name(code: i16) -> String {
    let name = match code {
        1 => "bool",
        2 => "uint8",
        4 => "int16",
        8 => "int32",
        16 => "float32",
        32 => "complex64",
        64 => "float64",
        256 => "int8",
        512 => "uint16",
        768 => "uint32",
        _ => return format!("code {code}"),
    };
    format!("{name} (code {code})")
}

fn read_values(bytes: &[u8], header: &NiftiHeaderSubset, count: usize) -> Result<Vec<f64>> {
    let elem = match header.datatype {
        DT_UINT8 => 1,
        DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(Error::UnsupportedDatatype(datatype_name(other))),
    };
    let start = header.vox_offset as usize;
    let need = count.checked_mul(elem).ok_or_else(|| {
        Error::CorruptHeader("element count overflows".into())
    })?;
    if bytes.len() < start + need {
        return Err(Error::CorruptHeader(format!(
            "data truncated: need {need} bytes at offset {start}, file has {}",
            bytes.len()
        )));
    }
    let data = &bytes[start..start + need];
    let mut values = vec![0.0f64; count];
    match (header.datatype, header.little_endian) {
        (DT_UINT8, _) => {
            for (v, &b) in values.iter_mut().zip(data) {
                *v = b as f64;
            }
        }
        (DT_FLOAT32, true) => {
            for (i, v) in values.iter_mut().enumerate() {
                *v = LittleEndian::read_f32(&data[4 * i..]) as f64;
            }
        }
        (DT_FLOAT32, false) => {
            for (i, v) in values.iter_mut().enumerate() {
                *v = BigEndian::read_f32(&data[4 * i..]) as f64;
            }
        }
        (DT_FLOAT64, true) => LittleEndian::read_f64_into(data, &mut values),
        (DT_FLOAT64, false) => BigEndian::read_f64_into(data, &mut values),
        _ => unreachable!(),
    }
    let slope = header.scl_slope;
    let inter = header.scl_inter;
    if slope != 0.0 && !(slope == 1.0 && inter == 0.0) {
        for v in values.iter_mut() {
            *v = *v * slope as f64 + inter as f64;
        }
    }
    Ok(values)
}

fn sanitized_spacings(header: &NiftiHeaderSubset, rank: usize) -> Vec<f64> {
    (0..rank)
        .map(|a| {
            let s = header.pixdim[a + 1] as f64;
            if s.is_finite() && s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Rank and spatial extents of a vector field per the accepted layouts.
fn field_geometry(header: &NiftiHeaderSubset) -> Result<(usize, Vec<usize>)> {
    let dim = &header.dim;
    let (rank, spatial): (usize, [i16; 3]) = match dim[0] {
        5 => {
            if dim[4] != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "dim[4] = {} (time axis must be 1 for a field)",
                    dim[4]
                )));
            }
            (dim[5] as usize, [dim[1], dim[2], dim[3]])
        }
        4 => (dim[4] as usize, [dim[1], dim[2], dim[3]]),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "dim[0] = {other}; a field needs 4 or 5 dimensions"
            )))
        }
    };
    if rank != 2 && rank != 3 {
        return Err(Error::ShapeMismatch(format!(
            "component dimension is {rank}, expected 2 or 3"
        )));
    }
    if rank == 2 {
        if spatial[2] != 1 {
            return Err(Error::ShapeMismatch(format!(
                "2-component field on a {}-slice grid",
                spatial[2]
            )));
        }
        Ok((2, vec![spatial[0] as usize, spatial[1] as usize]))
    } else {
        if spatial[2] < 2 {
            return Err(Error::ShapeMismatch(
                "3-component field on a single-slice grid".into(),
            ));
        }
        Ok((
            3,
            vec![spatial[0] as usize, spatial[1] as usize, spatial[2] as usize],
        ))
    }
}

pub(crate) fn field_from_bytes(bytes: &[u8], units: DisplacementUnits) -> Result<DisplacementField> {
    let header = NiftiHeaderSubset::parse(bytes)?;
    if header.datatype == DT_UINT8 {
        return Err(Error::UnsupportedDatatype(datatype_name(DT_UINT8)));
    }
    let (rank, extents) = field_geometry(&header)?;
    let spacings = sanitized_spacings(&header, rank);
    let dims = GridDims::new(&extents, &spacings)?;
    let npoints = dims.num_points();
    let values = read_values(bytes, &header, npoints * rank)?;

    // File order is component-major (the component axis is outermost);
    // interleave into storage order and convert units if requested.
    let mut data = vec![0.0f64; npoints * rank];
    for c in 0..rank {
        let scale = match units {
            DisplacementUnits::Voxel => 1.0,
            DisplacementUnits::Physical => 1.0 / spacings[c],
        };
        let comp = &values[c * npoints..(c + 1) * npoints];
        for (li, &v) in comp.iter().enumerate() {
            data[li * rank + c] = v * scale;
        }
    }
    DisplacementField::new(dims, data)
}

pub(crate) fn mask_from_bytes(bytes: &[u8]) -> Result<VoxelMask> {
    let header = NiftiHeaderSubset::parse(bytes)?;
    let dim = &header.dim;
    let extents: Vec<usize> = match dim[0] {
        2 => vec![dim[1] as usize, dim[2] as usize],
        3 if dim[3] == 1 => vec![dim[1] as usize, dim[2] as usize],
        3 => vec![dim[1] as usize, dim[2] as usize, dim[3] as usize],
        other => {
            return Err(Error::ShapeMismatch(format!(
                "dim[0] = {other}; a mask needs 2 or 3 dimensions"
            )))
        }
    };
    let rank = extents.len();
    let dims = GridDims::new(&extents, &sanitized_spacings(&header, rank))?;
    let values = read_values(bytes, &header, dims.num_points())?;
    let bits = values.iter().map(|&v| v != 0.0).collect();
    VoxelMask::new(dims, bits)
}

pub(crate) fn field_to_bytes(field: &DisplacementField) -> Vec<u8> {
    let dims = field.dims();
    let rank = dims.rank();
    let ext = dims.extents3();
    let mut pixdim = [0f32; 8];
    pixdim[0] = 1.0;
    for a in 0..3 {
        pixdim[a + 1] = if a < rank {
            dims.spacing(a) as f32
        } else {
            1.0
        };
    }
    let header = NiftiHeaderSubset {
        dim: [
            5,
            ext[0] as i16,
            ext[1] as i16,
            ext[2] as i16,
            1,
            rank as i16,
            1,
            1,
        ],
        intent_code: INTENT_VECTOR,
        datatype: DT_FLOAT64,
        bitpix: 64,
        pixdim,
        vox_offset: (HEADER_SIZE + 4) as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        little_endian: true,
    };
    let npoints = dims.num_points();
    let mut out = header.serialize();
    out.resize(HEADER_SIZE + 4 + npoints * rank * 8, 0);
    let data = field.data();
    for c in 0..rank {
        for li in 0..npoints {
            let at = HEADER_SIZE + 4 + (c * npoints + li) * 8;
            LittleEndian::write_f64(&mut out[at..], data[li * rank + c]);
        }
    }
    out
}

pub(crate) fn map_to_bytes(map: &ScalarMap) -> Vec<u8> {
    let dims = map.dims();
    let rank = dims.rank();
    let ext = dims.extents3();
    let mut pixdim = [0f32; 8];
    pixdim[0] = 1.0;
    for a in 0..3 {
        pixdim[a + 1] = if a < rank {
            dims.spacing(a) as f32
        } else {
            1.0
        };
    }
    let mut dim = [1i16; 8];
    dim[0] = rank as i16;
    for a in 0..rank {
        dim[a + 1] = ext[a] as i16;
    }
    let header = NiftiHeaderSubset {
        dim,
        intent_code: 0,
        datatype: DT_FLOAT32,
        bitpix: 32,
        pixdim,
        vox_offset: (HEADER_SIZE + 4) as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        little_endian: true,
    };
    let n = dims.num_points();
    let mut out = header.serialize();
    out.resize(HEADER_SIZE + 4 + n * 4, 0);
    // Undefined slots already hold NaN in the raw values.
    for (li, &v) in map.values().iter().enumerate() {
        LittleEndian::write_f32(&mut out[HEADER_SIZE + 4 + 4 * li..], v as f32);
    }
    out
}
