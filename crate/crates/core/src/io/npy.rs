//! NPY v1.0 subset: little/big-endian f4/f8 arrays (plus b1/u1 for masks),
//! C or Fortran order on read, C order '<f8' on write.
//!
//! Field arrays have logical shape (ext_x, ext_y[, ext_z], rank): element
//! [ix, iy, iz, c] is component c of the displacement at grid point
//! (ix, iy, iz). Mask arrays drop the trailing component axis.

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridDims, VoxelMask};

pub(crate) const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug)]
struct NpyArray {
    shape: Vec<usize>,
    /// Values in C order of `shape`.
    data: Vec<f64>,
}

fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}'");
    let at = header.find(&pat).ok_or_else(|| {
        Error::CorruptHeader(format!("npy header missing key {key:?}"))
    })?;
    let rest = &header[at + pat.len()..];
    let rest = rest.trim_start().strip_prefix(':').ok_or_else(|| {
        Error::CorruptHeader(format!("npy header key {key:?} lacks a value"))
    })?;
    Ok(rest.trim_start())
}

fn parse_quoted(value: &str) -> Result<&str> {
    let rest = value.strip_prefix('\'').ok_or_else(|| {
        Error::CorruptHeader("expected quoted npy descr".into())
    })?;
    rest.split('\'').next().ok_or_else(|| {
        Error::CorruptHeader("unterminated npy descr".into())
    })
}

fn parse_shape(value: &str) -> Result<Vec<usize>> {
    let rest = value.strip_prefix('(').ok_or_else(|| {
        Error::CorruptHeader("npy shape is not a tuple".into())
    })?;
    let inner = rest.split(')').next().ok_or_else(|| {
        Error::CorruptHeader("unterminated npy shape".into())
    })?;
    let mut shape = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        shape.push(part.parse::<usize>().map_err(|_| {
            Error::CorruptHeader(format!("bad npy shape entry {part:?}"))
        })?);
    }
    Ok(shape)
}

fn parse(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::CorruptHeader("not an npy file".into()));
    }
    if bytes[6] != 1 {
        return Err(Error::CorruptHeader(format!(
            "npy version {}.{} unsupported (v1.0 only)",
            bytes[6], bytes[7]
        )));
    }
    let header_len = LittleEndian::read_u16(&bytes[8..10]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(Error::CorruptHeader("npy header truncated".into()));
    }
    let header: String = bytes[10..data_start].iter().map(|&b| b as char).collect();

    let descr = parse_quoted(dict_value(&header, "descr")?)?.to_string();
    let fortran = match dict_value(&header, "fortran_order")? {
        v if v.starts_with("True") => true,
        v if v.starts_with("False") => false,
        v => {
            return Err(Error::CorruptHeader(format!(
                "bad fortran_order value {:?}",
                v.split(',').next().unwrap_or(v)
            )))
        }
    };
    let shape = parse_shape(dict_value(&header, "shape")?)?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::ShapeMismatch(format!("npy shape {shape:?}")));
    }
    let count: usize = shape.iter().product();

    let (elem, big_endian, is_float): (usize, bool, bool) = match descr.as_str() {
        "<f4" | "=f4" => (4, false, true),
        ">f4" => (4, true, true),
        "<f8" | "=f8" => (8, false, true),
        ">f8" => (8, true, true),
        "|b1" | "|u1" | "|i1" => (1, false, false),
        other => return Err(Error::UnsupportedDatatype(format!("npy descr {other:?}"))),
    };
    let need = count * elem;
    if bytes.len() < data_start + need {
        return Err(Error::CorruptHeader(format!(
            "npy data truncated: need {need} bytes, have {}",
            bytes.len() - data_start
        )));
    }
    let raw = &bytes[data_start..data_start + need];
    let mut data = vec![0.0f64; count];
    match (elem, big_endian, is_float) {
        (1, _, _) => {
            for (v, &b) in data.iter_mut().zip(raw) {
                *v = b as f64;
            }
        }
        (4, false, true) => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = LittleEndian::read_f32(&raw[4 * i..]) as f64;
            }
        }
        (4, true, true) => {
            for (i, v) in data.iter_mut().enumerate() {
                *v = BigEndian::read_f32(&raw[4 * i..]) as f64;
            }
        }
        (8, false, true) => LittleEndian::read_f64_into(raw, &mut data),
        (8, true, true) => BigEndian::read_f64_into(raw, &mut data),
        _ => unreachable!(),
    }

    if fortran {
        data = fortran_to_c(&data, &shape);
    }
    Ok(NpyArray { shape, data })
}

fn fortran_to_c(data: &[f64], shape: &[usize]) -> Vec<f64> {
    let ndim = shape.len();
    let mut f_strides = vec![1usize; ndim];
    for d in 1..ndim {
        f_strides[d] = f_strides[d - 1] * shape[d - 1];
    }
    let mut out = vec![0.0f64; data.len()];
    let mut idx = vec![0usize; ndim];
    for slot in out.iter_mut() {
        let f_index: usize = idx.iter().zip(&f_strides).map(|(i, s)| i * s).sum();
        *slot = data[f_index];
        // Advance the C-order multi-index (last axis fastest).
        for d in (0..ndim).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

pub(crate) fn field_from_bytes(bytes: &[u8]) -> Result<DisplacementField> {
    let array = parse(bytes)?;
    let ndim = array.shape.len();
    let rank = *array.shape.last().unwrap();
    if (rank != 2 && rank != 3) || ndim != rank + 1 {
        return Err(Error::ShapeMismatch(format!(
            "npy shape {:?} is not (extents..., rank) with rank 2 or 3",
            array.shape
        )));
    }
    let extents = &array.shape[..ndim - 1];
    let dims = GridDims::isotropic(extents)?;
    let mut data = vec![0.0f64; dims.num_points() * rank];
    // C order: the component axis is fastest, then the last spatial axis.
    let (nx, ny, nz) = (
        extents[0],
        extents[1],
        if rank == 3 { extents[2] } else { 1 },
    );
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let src = ((ix * ny + iy) * nz + iz) * rank;
                let li = ix + nx * (iy + ny * iz);
                data[li * rank..li * rank + rank]
                    .copy_from_slice(&array.data[src..src + rank]);
            }
        }
    }
    DisplacementField::new(dims, data)
}

pub(crate) fn mask_from_bytes(bytes: &[u8]) -> Result<VoxelMask> {
    let array = parse(bytes)?;
    let ndim = array.shape.len();
    if ndim != 2 && ndim != 3 {
        return Err(Error::ShapeMismatch(format!(
            "npy mask shape {:?} is not 2- or 3-dimensional",
            array.shape
        )));
    }
    let dims = GridDims::isotropic(&array.shape)?;
    let (nx, ny, nz) = (
        array.shape[0],
        array.shape[1],
        if ndim == 3 { array.shape[2] } else { 1 },
    );
    let mut bits = vec![false; dims.num_points()];
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let src = (ix * ny + iy) * nz + iz;
                bits[ix + nx * (iy + ny * iz)] = array.data[src] != 0.0;
            }
        }
    }
    VoxelMask::new(dims, bits)
}

fn build_header(shape: &[usize]) -> Vec<u8> {
    let shape_str: Vec<String> = shape.iter().map(|s| s.to_string()).collect();
    let dict = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}), }}",
        shape_str.join(", ")
    );
    let mut header = dict.into_bytes();
    // Pad so magic + version + length + header is a multiple of 64, newline-terminated.
    let unpadded = 10 + header.len() + 1;
    header.extend(std::iter::repeat_n(b' ', unpadded.next_multiple_of(64) - unpadded));
    header.push(b'\n');

    let mut out = Vec::with_capacity(10 + header.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(&header);
    out
}

pub(crate) fn field_to_bytes(field: &DisplacementField) -> Vec<u8> {
    let dims = field.dims();
    let rank = dims.rank();
    let ext = dims.extents3();
    let (nx, ny, nz) = (ext[0], ext[1], ext[2]);
    let mut shape: Vec<usize> = dims.extents().to_vec();
    shape.push(rank);
    let mut out = build_header(&shape);
    let base = out.len();
    out.resize(base + dims.num_points() * rank * 8, 0);
    let data = field.data();
    let mut dst = 0usize;
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let li = ix + nx * (iy + ny * iz);
                for c in 0..rank {
                    LittleEndian::write_f64(&mut out[base + dst..], data[li * rank + c]);
                    dst += 8;
                }
            }
        }
    }
    out
}
