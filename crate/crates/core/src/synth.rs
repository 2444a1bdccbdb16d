//! Deterministic generators of pathological and sanity-check fields.
//!
//! Every generator is a pure function of its spec. Randomness comes from
//! [`SplitMix64`] seeded explicitly, so the same spec yields bit-identical
//! fields on any IEEE-754 platform.

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridDims, GridPoint};

/// splitmix64: the state advances by the 64-bit golden gamma and the output
/// is the finalized mix of the state. Small, seedable, and fully specified,
/// which keeps generated fixtures reproducible everywhere.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-1, 1).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

/// Kinds of synthetic transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// Zero displacement everywhere.
    Identity,
    /// u(p) = (s - 1) p.
    UniformScale { factor: f64 },
    /// u(p) = (A - I) p with a constant rank x rank matrix, row-major.
    Linear { matrix: Vec<f64> },
    /// Mirror one axis across the grid midplane: T_a(p) = (extent_a - 1) - p_a.
    Reflection { axis: usize },
    /// Displace exactly one grid point; all others stay fixed.
    SinglePoint {
        point: GridPoint,
        displacement: Vec<f64>,
    },
    /// Seeded uniform noise, box-smoothed per axis, rescaled so the largest
    /// component magnitude equals `amplitude`.
    RandomSmooth {
        seed: u64,
        amplitude: f64,
        radius: usize,
    },
}

/// A synthetic field specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub dims: GridDims,
}

/// Builds the field described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<DisplacementField> {
    let dims = spec.dims.clone();
    let rank = dims.rank();
    let n = dims.num_points();
    match &spec.kind {
        SynthKind::Identity => Ok(DisplacementField::zeros(dims)),
        SynthKind::UniformScale { factor } => {
            if *factor <= 0.0 || !factor.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "scale factor must be positive finite, got {factor}"
                )));
            }
            let mut matrix = vec![0.0; rank * rank];
            for i in 0..rank {
                matrix[i * rank + i] = *factor;
            }
            generate(&SynthSpec {
                kind: SynthKind::Linear { matrix },
                dims,
            })
        }
        SynthKind::Linear { matrix } => {
            if matrix.len() != rank * rank {
                return Err(Error::InvalidSpec(format!(
                    "linear matrix needs {} entries for rank {rank}, got {}",
                    rank * rank,
                    matrix.len()
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("linear matrix has non-finite entry".into()));
            }
            let mut data = vec![0.0; n * rank];
            for (li, p) in dims.points().enumerate() {
                for i in 0..rank {
                    let mut v = 0.0;
                    for j in 0..rank {
                        let a = matrix[i * rank + j] - if i == j { 1.0 } else { 0.0 };
                        v += a * p.0[j] as f64;
                    }
                    data[li * rank + i] = v;
                }
            }
            DisplacementField::new(dims, data)
        }
        SynthKind::Reflection { axis } => {
            if *axis >= rank {
                return Err(Error::InvalidSpec(format!(
                    "reflection axis {axis} out of range for rank {rank}"
                )));
            }
            let last = (dims.extent(*axis) - 1) as f64;
            let mut data = vec![0.0; n * rank];
            for (li, p) in dims.points().enumerate() {
                data[li * rank + axis] = last - 2.0 * p.0[*axis] as f64;
            }
            DisplacementField::new(dims, data)
        }
        SynthKind::SinglePoint {
            point,
            displacement,
        } => {
            if !dims.contains(*point) {
                return Err(Error::InvalidSpec(format!(
                    "single-point location {:?} out of bounds",
                    point.coords()
                )));
            }
            if displacement.len() != rank {
                return Err(Error::InvalidSpec(format!(
                    "displacement needs {rank} components, got {}",
                    displacement.len()
                )));
            }
            let mut data = vec![0.0; n * rank];
            let li = dims.linear_index(*point);
            data[li * rank..li * rank + rank].copy_from_slice(displacement);
            DisplacementField::new(dims, data)
        }
        SynthKind::RandomSmooth {
            seed,
            amplitude,
            radius,
        } => {
            if *amplitude < 0.0 || !amplitude.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "amplitude must be non-negative finite, got {amplitude}"
                )));
            }
            let mut rng = SplitMix64::new(*seed);
            let ext = dims.extents3();
            let mut data = vec![0.0; n * rank];
            // Draw in component-major scratch order so smoothing can run on
            // one contiguous scalar volume per component.
            let mut scratch = vec![0.0; n];
            for c in 0..rank {
                for v in scratch.iter_mut() {
                    *v = rng.next_symmetric();
                }
                if *radius > 0 {
                    for axis in 0..rank {
                        box_smooth_axis(&mut scratch, ext, axis, *radius);
                    }
                }
                for li in 0..n {
                    data[li * rank + c] = scratch[li];
                }
            }
            let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_abs > 0.0 {
                let scale = amplitude / max_abs;
                for v in data.iter_mut() {
                    *v *= scale;
                }
            }
            DisplacementField::new(dims, data)
        }
    }
}

/// In-place moving average along one axis; the window is clamped to the
/// volume bounds and divided by its actual size.
fn box_smooth_axis(values: &mut [f64], ext: [usize; 3], axis: usize, radius: usize) {
    let stride = match axis {
        0 => 1,
        1 => ext[0],
        _ => ext[0] * ext[1],
    };
    let len = ext[axis];
    let mut prefix = vec![0.0; len + 1];
    let mut line = vec![0.0; len];

    // Iterate every line along `axis`.
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (s1, s2) = (
        match o1 {
            0 => 1,
            1 => ext[0],
            _ => ext[0] * ext[1],
        },
        match o2 {
            0 => 1,
            1 => ext[0],
            _ => ext[0] * ext[1],
        },
    );
    for i2 in 0..ext[o2] {
        for i1 in 0..ext[o1] {
            let base = i1 * s1 + i2 * s2;
            for i in 0..len {
                line[i] = values[base + i * stride];
                prefix[i + 1] = prefix[i] + line[i];
            }
            for i in 0..len {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(len - 1);
                let avg = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64;
                values[base + i * stride] = avg;
            }
        }
    }
}

/// Rotates a field by `quarter_turns` x 90 degrees about a grid axis,
/// rotating lattice indices and displacement vectors together.
///
/// For rank-2 fields the rotation axis must be 2 (the implicit z axis).
pub fn rotate_field_90(
    field: &DisplacementField,
    axis: usize,
    quarter_turns: u32,
) -> Result<DisplacementField> {
    let rank = field.rank();
    if rank == 2 && axis != 2 {
        return Err(Error::InvalidSpec(
            "2D fields rotate about axis 2 only".into(),
        ));
    }
    if rank == 3 && axis > 2 {
        return Err(Error::InvalidSpec(format!("rotation axis {axis} out of range")));
    }
    let mut out = field.clone();
    for _ in 0..quarter_turns % 4 {
        out = rotate_once(&out, axis)?;
    }
    Ok(out)
}

fn rotate_once(field: &DisplacementField, axis: usize) -> Result<DisplacementField> {
    // In-plane axes (a, b) with the rotation mapping e_a to e_b.
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let dims = field.dims();
    let rank = dims.rank();
    let mut extents = dims.extents().to_vec();
    extents.swap(a, b);
    let mut spacings = dims.spacings().to_vec();
    spacings.swap(a, b);
    let new_dims = GridDims::new(&extents, &spacings)?;

    let mut data = vec![0.0; new_dims.num_points() * rank];
    for (li, p) in dims.points().enumerate() {
        let u = field.displacement_linear(li);
        let mut q = p.0;
        q[b] = p.0[a];
        q[a] = dims.extent(b) - 1 - p.0[b];
        let mut v = u;
        v[b] = u[a];
        v[a] = -u[b];
        let qi = new_dims.linear_index(GridPoint(q));
        data[qi * rank..qi * rank + rank].copy_from_slice(&v[..rank]);
    }
    DisplacementField::new(new_dims, data)
}
