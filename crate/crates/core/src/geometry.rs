//! Ground-truth computational geometry for fold analysis.
//!
//! Signed simplex measures computed from transformed vertex positions are
//! the independent route against which the finite-difference determinants
//! are checked: a corner determinant equals 2x (2D) or 6x (3D) the
//! orientation-corrected signed measure of one simplex adjacent to its
//! point. This module also carries the two cell-subdivision schemes and the
//! half-plane feasibility test for the transformed-center region.

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridPoint};
use crate::jacobian::{JacobianVariant, Sign, SignPattern, StarKind};

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];

/// Signed area of triangle (a, b, c); positive iff counter-clockwise.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ac = [c[0] - a[0], c[1] - a[1]];
    0.5 * (ab[0] * ac[1] - ab[1] * ac[0])
}

/// Signed volume of tetrahedron (a, b, c, d); right-hand rule.
pub fn signed_volume(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ad = sub3(d, a);
    dot3(cross3(ab, ac), ad) / 6.0
}

#[inline]
fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One of the two ways to split a grid cell into simplices.
///
/// Scheme A pairs the corner determinants whose per-axis directions
/// multiply to +1 with the star-1 central tetrahedron; scheme B takes the
/// complementary corners and the star-2 tetrahedron. In 2D each scheme is
/// one diagonal split and there is no central simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    A,
    B,
}

impl Scheme {
    pub const BOTH: [Scheme; 2] = [Scheme::A, Scheme::B];

    fn corner_orientation(self) -> f64 {
        match self {
            Scheme::A => 1.0,
            Scheme::B => -1.0,
        }
    }
}

/// One simplex of a subdivision scheme, cell-relative.
///
/// `vertices[0]` is the anchor: the cell corner at which the corresponding
/// determinant (`variant`) is evaluated. The orientation sign makes
/// "folded iff corrected measure < 0" hold uniformly: the corrected
/// reference measure of every untransformed simplex is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexRef {
    pub vertices: Vec<[usize; 3]>,
    pub orientation: f64,
    pub variant: JacobianVariant,
}

impl SimplexRef {
    pub fn anchor(&self) -> [usize; 3] {
        self.vertices[0]
    }

    /// Orientation-corrected signed measure of the untransformed simplex.
    pub fn reference_measure(&self) -> f64 {
        let v: Vec<[f64; 3]> = self
            .vertices
            .iter()
            .map(|o| [o[0] as f64, o[1] as f64, o[2] as f64])
            .collect();
        let m = if self.vertices.len() == 3 {
            signed_area(trunc2(v[0]), trunc2(v[1]), trunc2(v[2]))
        } else {
            signed_volume(v[0], v[1], v[2], v[3])
        };
        self.orientation * m
    }
}

#[inline]
fn trunc2(v: [f64; 3]) -> Vec2 {
    [v[0], v[1]]
}

fn corner_simplex(pattern: SignPattern) -> SimplexRef {
    let rank = pattern.rank();
    let mut anchor = [0usize; 3];
    for (a, slot) in anchor.iter_mut().enumerate().take(rank) {
        if pattern.sign(a) == Sign::Backward {
            *slot = 1;
        }
    }
    let mut vertices = vec![anchor];
    for a in 0..rank {
        let mut v = anchor;
        v[a] = 1 - v[a];
        vertices.push(v);
    }
    SimplexRef {
        vertices,
        orientation: pattern.orientation(),
        variant: JacobianVariant::Corner(pattern),
    }
}

/// The simplices of a scheme: 2 triangles (2D) or 4 corner tetrahedra plus
/// one central tetrahedron (3D). Corrected reference measures sum to the
/// unit cell measure.
pub fn scheme_simplices(scheme: Scheme, rank: usize) -> Result<Vec<SimplexRef>> {
    if rank != 2 && rank != 3 {
        return Err(Error::RankMismatch {
            expected: 3,
            actual: rank,
        });
    }
    let mut out: Vec<SimplexRef> = SignPattern::all(rank)
        .into_iter()
        .filter(|p| p.orientation() == scheme.corner_orientation())
        .map(corner_simplex)
        .collect();
    if rank == 3 {
        let central = match scheme {
            Scheme::A => SimplexRef {
                vertices: vec![[1, 1, 1], [0, 0, 1], [0, 1, 0], [1, 0, 0]],
                orientation: 1.0,
                variant: JacobianVariant::Star(StarKind::One),
            },
            Scheme::B => SimplexRef {
                vertices: vec![[0, 0, 0], [1, 1, 0], [0, 1, 1], [1, 0, 1]],
                orientation: 1.0,
                variant: JacobianVariant::Star(StarKind::Two),
            },
        };
        out.push(central);
    }
    Ok(out)
}

fn cell_in_bounds(field: &DisplacementField, cell: GridPoint) -> Result<()> {
    let dims = field.dims();
    let ext = dims.extents3();
    for a in 0..dims.rank() {
        if cell.0[a] + 1 >= ext[a] {
            return Err(Error::OutOfBounds(
                cell.0[0], cell.0[1], cell.0[2], ext[0], ext[1], ext[2],
            ));
        }
    }
    Ok(())
}

/// Orientation-corrected signed measure of one transformed simplex of a cell.
pub fn simplex_measure(
    field: &DisplacementField,
    cell: GridPoint,
    simplex: &SimplexRef,
) -> Result<f64> {
    cell_in_bounds(field, cell)?;
    let pos = |off: [usize; 3]| {
        field.index_position(GridPoint([
            cell.0[0] + off[0],
            cell.0[1] + off[1],
            cell.0[2] + off[2],
        ]))
    };
    let m = if simplex.vertices.len() == 3 {
        signed_area(
            trunc2(pos(simplex.vertices[0])),
            trunc2(pos(simplex.vertices[1])),
            trunc2(pos(simplex.vertices[2])),
        )
    } else {
        signed_volume(
            pos(simplex.vertices[0]),
            pos(simplex.vertices[1]),
            pos(simplex.vertices[2]),
            pos(simplex.vertices[3]),
        )
    };
    Ok(simplex.orientation * m)
}

/// Total folded measure of one cell under one scheme: the sum over the
/// scheme's simplices of `max(0, -corrected transformed measure)`. Zero iff
/// no simplex of this scheme in this cell is folded.
pub fn fold_measure_cell(
    field: &DisplacementField,
    cell: GridPoint,
    scheme: Scheme,
) -> Result<f64> {
    cell_in_bounds(field, cell)?;
    let mut total = 0.0;
    for simplex in scheme_simplices(scheme, field.rank())? {
        let m = simplex_measure(field, cell, &simplex)?;
        total += (-m).max(0.0);
    }
    Ok(total)
}

/// The open half-plane of points `p` with triangle (a, b, p) positively
/// oriented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub a: Vec2,
    pub b: Vec2,
}

impl HalfPlane {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidSpec("half-plane anchors coincide".into()));
        }
        Ok(Self { a, b })
    }

    /// Strict containment.
    pub fn contains(&self, p: Vec2) -> bool {
        signed_area(self.a, self.b, p) > 0.0
    }
}

/// Strict half-planes are approximated by shrinking each closed half-plane
/// inward by this distance before the feasibility test.
pub const KERNEL_SHRINK: f64 = 1e-12;

/// Decides whether some position for the transformed center point makes all
/// four 2D corner determinants positive.
///
/// Inputs are the transformed neighbors in the cyclic order
/// (-x, -y, +x, +y). The feasible region is the intersection of the four
/// half-planes spanned by consecutive neighbors; emptiness is decided by
/// checking the candidate vertices of the shrunk constraint system.
pub fn kernel_nonempty(neg_x: Vec2, neg_y: Vec2, pos_x: Vec2, pos_y: Vec2) -> bool {
    let pairs = [
        (neg_x, neg_y),
        (neg_y, pos_x),
        (pos_x, pos_y),
        (pos_y, neg_x),
    ];
    let mut normals = [[0.0f64; 2]; 4];
    let mut offsets = [0.0f64; 4];
    for (i, (a, b)) in pairs.iter().enumerate() {
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = e[0].hypot(e[1]);
        if len == 0.0 {
            // Coincident anchors: the half-plane is empty.
            return false;
        }
        let n = [-e[1] / len, e[0] / len];
        normals[i] = n;
        offsets[i] = n[0] * a[0] + n[1] * a[1] + KERNEL_SHRINK;
    }

    let feasible = |x: [f64; 2]| -> bool {
        if !x[0].is_finite() || !x[1].is_finite() {
            return false;
        }
        let slack = 1e-13 * (1.0 + x[0].abs().max(x[1].abs()));
        (0..4).all(|k| normals[k][0] * x[0] + normals[k][1] * x[1] - offsets[k] >= -slack)
    };

    // If the system is feasible and not all boundary lines are parallel, the
    // feasible set has a vertex lying on two of the boundary lines.
    let mut any_crossing = false;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let det = normals[i][0] * normals[j][1] - normals[i][1] * normals[j][0];
            if det.abs() <= 1e-14 {
                continue;
            }
            any_crossing = true;
            let x = [
                (offsets[i] * normals[j][1] - offsets[j] * normals[i][1]) / det,
                (normals[i][0] * offsets[j] - normals[j][0] * offsets[i]) / det,
            ];
            if feasible(x) {
                return true;
            }
        }
    }
    if any_crossing {
        return false;
    }

    // All boundary lines parallel: a 1D interval check along the common
    // normal direction.
    let d = normals[0];
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for k in 0..4 {
        if normals[k][0] * d[0] + normals[k][1] * d[1] > 0.0 {
            lower = lower.max(offsets[k]);
        } else {
            upper = upper.min(-offsets[k]);
        }
    }
    lower <= upper
}
