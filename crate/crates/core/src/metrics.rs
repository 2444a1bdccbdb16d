//! Digital diffeomorphism verdicts and non-diffeomorphic measures.
//!
//! A field passes the digital diffeomorphism criterion when every defined
//! corner determinant (four per point in 2D, eight in 3D) and, in 3D, both
//! star determinants are strictly positive at every grid point. The
//! non-diffeomorphic area (2D) and volume (3D) aggregate the measure of the
//! folded simplices behind those determinants:
//!
//! ```text
//! NDV = -1/2 * sum_p [ sum_i min(|J_i|(p), 0) / 6
//!                      + min(|J*1|(p), 0) / 6 + min(|J*2|(p), 0) / 6 ]
//! NDA = -1/2 * sum_p   sum_i min(|J_i|(p), 0) / 2
//! ```
//!
//! which equals the average of the per-cell folded measure under the two
//! subdivision schemes. Undefined boundary determinants are skipped, never
//! substituted. All reductions run over fixed-size chunks combined in
//! order, so reports are bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridPoint, VoxelMask};
use crate::jacobian::{DetKernel, JacobianVariant, ScalarMap, SignPattern, StarKind};
use crate::sum::CompensatedSum;

/// Which measure a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Nda,
    Ndv,
}

impl MeasureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Nda => "nda",
            MeasureKind::Ndv => "ndv",
        }
    }
}

/// First criterion violation found in scan order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub point: GridPoint,
    pub variant: JacobianVariant,
    pub value: f64,
}

/// Outcome of [`is_digital_diffeomorphism`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub is_diffeomorphic: bool,
    pub first_violation: Option<Violation>,
}

/// Aggregate irregularity statistics for one field.
///
/// Percentages are relative to the number of considered (masked) points,
/// expressed in percent. `measure_physical` is the voxel-unit measure scaled
/// by the product of grid spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoReport {
    pub measure_kind: MeasureKind,
    pub rank: usize,
    pub considered_points: usize,
    /// Considered points where at least one determinant was undefined.
    pub partially_defined_points: usize,
    pub central_nonpositive_count: usize,
    pub any_nonpositive_count: usize,
    pub central_nonpositive_pct: f64,
    pub any_nonpositive_pct: f64,
    pub measure_voxel: f64,
    pub measure_physical: f64,
    pub measure_pct: f64,
    pub first_violation: Option<Violation>,
    pub mask_applied: bool,
}

/// Per-point shares of the NDA/NDV sum; masked-out points hold zero.
///
/// Summing the map reproduces the report's measure.
pub type SeverityMap = ScalarMap;

/// Per-point assessment shared by the verdict and the aggregate scan.
#[derive(Debug, Default)]
struct PointOutcome {
    /// Sum of min(det, 0) over defined corner and star determinants.
    min_sum: f64,
    any_nonpositive: bool,
    central_nonpositive: bool,
    partial: bool,
    first: Option<(JacobianVariant, f64)>,
}

fn assess_point(kernel: &DetKernel<'_>, coords: [usize; 3], li: usize) -> PointOutcome {
    let rank = kernel.rank();
    let stencil = kernel.stencil(coords, li);
    let mut out = PointOutcome::default();
    let note = |variant: JacobianVariant, det: Option<f64>, out: &mut PointOutcome| match det {
        Some(v) => {
            if v <= 0.0 {
                out.any_nonpositive = true;
                out.min_sum += v.min(0.0);
                if out.first.is_none() {
                    out.first = Some((variant, v));
                }
            }
        }
        None => out.partial = true,
    };
    for index in 0..1usize << rank {
        let det = stencil.corner_by_index(index);
        note(
            JacobianVariant::Corner(SignPattern::from_index(rank, index)),
            det,
            &mut out,
        );
    }
    if rank == 3 {
        for kind in [StarKind::One, StarKind::Two] {
            note(
                JacobianVariant::Star(kind),
                kernel.star(coords, li, kind),
                &mut out,
            );
        }
    }
    match stencil.central() {
        Some(c) => out.central_nonpositive = c <= 0.0,
        None => out.partial = true,
    }
    out
}

/// Checks the strict-positivity criterion over every grid point.
///
/// Points are scanned in linear order and, within a point, corner patterns
/// in enumeration order followed by the two star determinants; the first
/// non-positive defined determinant is reported. Chunks are searched in
/// parallel but the reported violation is always the in-order first one.
pub fn is_digital_diffeomorphism(field: &DisplacementField) -> Verdict {
    let kernel = DetKernel::new(field);
    let dims = field.dims();
    let n = dims.num_points();
    let chunks = n.div_ceil(SCAN_CHUNK);
    let first = (0..chunks).into_par_iter().find_map_first(|ci| {
        let base = ci * SCAN_CHUNK;
        for li in base..(base + SCAN_CHUNK).min(n) {
            let coords = dims.point_at(li).0;
            let outcome = assess_point(&kernel, coords, li);
            if let Some((variant, value)) = outcome.first {
                return Some(Violation {
                    point: dims.point_at(li),
                    variant,
                    value,
                });
            }
        }
        None
    });
    Verdict {
        is_diffeomorphic: first.is_none(),
        first_violation: first,
    }
}

#[derive(Debug, Default)]
struct ChunkStats {
    considered: usize,
    partial: usize,
    central_nonpositive: usize,
    any_nonpositive: usize,
    sum: CompensatedSum,
    first: Option<(usize, JacobianVariant, f64)>,
}

const SCAN_CHUNK: usize = 1 << 14;

fn analyze(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
    kind: MeasureKind,
) -> Result<(DiffeoReport, SeverityMap)> {
    if let Some(m) = mask {
        if !m.matches_extents(field.dims()) {
            return Err(Error::ShapeMismatch(format!(
                "mask extents {:?} do not match field extents {:?}",
                m.dims().extents(),
                field.dims().extents()
            )));
        }
    }
    let dims = field.dims().clone();
    let rank = dims.rank();
    let n = dims.num_points();
    let kernel = DetKernel::new(field);
    // Per-point share of the measure: -1/2 * min_sum / (rank-specific divisor).
    let factor = if rank == 3 { -0.5 / 6.0 } else { -0.5 / 2.0 };

    let mut severity = vec![0.0f64; n];
    let stats: Vec<ChunkStats> = severity
        .par_chunks_mut(SCAN_CHUNK)
        .enumerate()
        .map(|(ci, sev)| {
            let base = ci * SCAN_CHUNK;
            let mut s = ChunkStats::default();
            for (i, slot) in sev.iter_mut().enumerate() {
                let li = base + i;
                if let Some(m) = mask {
                    if !m.get_linear(li) {
                        continue;
                    }
                }
                s.considered += 1;
                let coords = dims.point_at(li).0;
                let outcome = assess_point(&kernel, coords, li);
                let contrib = outcome.min_sum * factor;
                *slot = contrib;
                s.sum.add(contrib);
                if outcome.any_nonpositive {
                    s.any_nonpositive += 1;
                }
                if outcome.central_nonpositive {
                    s.central_nonpositive += 1;
                }
                if outcome.partial {
                    s.partial += 1;
                }
                if s.first.is_none() {
                    if let Some((variant, value)) = outcome.first {
                        s.first = Some((li, variant, value));
                    }
                }
            }
            s
        })
        .collect();

    let mut considered = 0usize;
    let mut partial = 0usize;
    let mut central = 0usize;
    let mut any = 0usize;
    let mut total = CompensatedSum::new();
    let mut first: Option<(usize, JacobianVariant, f64)> = None;
    for s in stats {
        considered += s.considered;
        partial += s.partial;
        central += s.central_nonpositive;
        any += s.any_nonpositive;
        total.merge(s.sum);
        if first.is_none() {
            first = s.first;
        }
    }

    let measure_voxel = total.value();
    let spacing_product: f64 = dims.spacings().iter().product();
    let pct = |v: f64| {
        if considered == 0 {
            0.0
        } else {
            100.0 * v / considered as f64
        }
    };
    let report = DiffeoReport {
        measure_kind: kind,
        rank,
        considered_points: considered,
        partially_defined_points: partial,
        central_nonpositive_count: central,
        any_nonpositive_count: any,
        central_nonpositive_pct: pct(central as f64),
        any_nonpositive_pct: pct(any as f64),
        measure_voxel,
        measure_physical: measure_voxel * spacing_product,
        measure_pct: pct(measure_voxel),
        first_violation: first.map(|(li, variant, value)| Violation {
            point: dims.point_at(li),
            variant,
            value,
        }),
        mask_applied: mask.is_some(),
    };
    let defined = vec![true; n];
    Ok((report, ScalarMap::filled(dims, severity, defined)))
}

/// Non-diffeomorphic volume of a 3D field, with its per-point severity map.
pub fn ndv(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
) -> Result<(DiffeoReport, SeverityMap)> {
    if field.rank() != 3 {
        return Err(Error::RankMismatch {
            expected: 3,
            actual: field.rank(),
        });
    }
    analyze(field, mask, MeasureKind::Ndv)
}

/// Non-diffeomorphic area of a 2D field, with its per-point severity map.
pub fn nda(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
) -> Result<(DiffeoReport, SeverityMap)> {
    if field.rank() != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            actual: field.rank(),
        });
    }
    analyze(field, mask, MeasureKind::Nda)
}

/// Aggregate report for a field of either rank.
pub fn analyze_field(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
) -> Result<(DiffeoReport, SeverityMap)> {
    if field.rank() == 3 {
        ndv(field, mask)
    } else {
        nda(field, mask)
    }
}

/// Masked points where the central determinant is defined and <= 0.
pub fn count_central_nonpositive(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
) -> Result<usize> {
    Ok(analyze_field(field, mask)?.0.central_nonpositive_count)
}

/// Masked points with at least one defined corner (or star) determinant <= 0.
pub fn count_any_nonpositive(
    field: &DisplacementField,
    mask: Option<&VoxelMask>,
) -> Result<usize> {
    Ok(analyze_field(field, mask)?.0.any_nonpositive_count)
}
