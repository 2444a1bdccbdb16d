//! Finite-difference Jacobian determinant estimators.
//!
//! At a grid point `p` the determinant can be formed from any per-axis mix
//! of forward and backward differences (a corner variant), from central
//! differences, or, in 3D, from the two diagonal-neighbor triple products
//! (the star determinants). Corner and star determinants are scaled signed
//! measures of simplices adjacent to `p`; see [`crate::geometry`] for the
//! simplex side of that correspondence.
//!
//! All determinants are computed in voxel units: the lattice step is 1 on
//! every axis and grid spacing never enters the difference quotients.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DisplacementField, GridDims, GridPoint};

/// Differencing direction along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Backward,
    Forward,
}

impl Sign {
    /// Index step toward the used neighbor: -1 or +1.
    pub fn step(self) -> isize {
        match self {
            Sign::Backward => -1,
            Sign::Forward => 1,
        }
    }

    pub fn factor(self) -> f64 {
        self.step() as f64
    }

    fn glyph(self) -> char {
        match self {
            Sign::Backward => '-',
            Sign::Forward => '+',
        }
    }
}

/// One forward/backward choice per axis, identifying a corner determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignPattern {
    signs: [Sign; 3],
    rank: u8,
}

impl SignPattern {
    pub fn d2(x: Sign, y: Sign) -> Self {
        Self {
            signs: [x, y, Sign::Backward],
            rank: 2,
        }
    }

    pub fn d3(x: Sign, y: Sign, z: Sign) -> Self {
        Self {
            signs: [x, y, z],
            rank: 3,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank as usize
    }

    pub fn sign(&self, axis: usize) -> Sign {
        assert!(axis < self.rank());
        self.signs[axis]
    }

    /// Pattern at position `index` of the enumeration order: bit `a` of the
    /// index selects Forward on axis `a` (x is bit 0).
    pub fn from_index(rank: usize, index: usize) -> Self {
        assert!(rank == 2 || rank == 3);
        assert!(index < (1 << rank));
        let sign = |bit: usize| {
            if index >> bit & 1 == 1 {
                Sign::Forward
            } else {
                Sign::Backward
            }
        };
        if rank == 2 {
            Self::d2(sign(0), sign(1))
        } else {
            Self::d3(sign(0), sign(1), sign(2))
        }
    }

    /// Position of this pattern in the enumeration order.
    pub fn index(&self) -> usize {
        (0..self.rank())
            .filter(|&a| self.signs[a] == Sign::Forward)
            .fold(0, |acc, a| acc | 1 << a)
    }

    /// All 2^rank patterns in enumeration order.
    pub fn all(rank: usize) -> Vec<SignPattern> {
        (0..1usize << rank)
            .map(|i| Self::from_index(rank, i))
            .collect()
    }

    /// Product of the per-axis direction factors; relates the determinant to
    /// the signed measure of its simplex.
    pub fn orientation(&self) -> f64 {
        (0..self.rank()).map(|a| self.signs[a].factor()).product()
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.rank() {
            write!(f, "{}", self.signs[a].glyph())?;
        }
        Ok(())
    }
}

impl FromStr for SignPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = || Error::Parse {
            what: "sign pattern",
            input: s.to_string(),
        };
        let mut signs = Vec::new();
        for ch in s.chars() {
            signs.push(match ch {
                '-' => Sign::Backward,
                '+' => Sign::Forward,
                _ => return Err(parse_err()),
            });
        }
        match signs.len() {
            2 => Ok(Self::d2(signs[0], signs[1])),
            3 => Ok(Self::d3(signs[0], signs[1], signs[2])),
            _ => Err(parse_err()),
        }
    }
}

/// Which of the two diagonal-neighbor determinants (3D only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StarKind {
    /// Backward diagonals: neighbors offset by (-1,-1,0), (-1,0,-1), (0,-1,-1).
    One,
    /// Forward diagonals: neighbors offset by (1,1,0), (0,1,1), (1,0,1).
    Two,
}

/// Identifier of a determinant estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JacobianVariant {
    Corner(SignPattern),
    Central,
    Star(StarKind),
}

impl JacobianVariant {
    /// Verdict-relevant variants at a point, in the documented scan order:
    /// corner patterns by enumeration index, then star 1 and star 2.
    pub fn criterion_variants(rank: usize) -> Vec<JacobianVariant> {
        let mut out: Vec<JacobianVariant> = SignPattern::all(rank)
            .into_iter()
            .map(JacobianVariant::Corner)
            .collect();
        if rank == 3 {
            out.push(JacobianVariant::Star(StarKind::One));
            out.push(JacobianVariant::Star(StarKind::Two));
        }
        out
    }
}

impl fmt::Display for JacobianVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JacobianVariant::Corner(p) => write!(f, "corner:{p}"),
            JacobianVariant::Central => write!(f, "central"),
            JacobianVariant::Star(StarKind::One) => write!(f, "star1"),
            JacobianVariant::Star(StarKind::Two) => write!(f, "star2"),
        }
    }
}

impl FromStr for JacobianVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(JacobianVariant::Central),
            "star1" => Ok(JacobianVariant::Star(StarKind::One)),
            "star2" => Ok(JacobianVariant::Star(StarKind::Two)),
            _ => {
                if let Some(pat) = s.strip_prefix("corner:") {
                    Ok(JacobianVariant::Corner(pat.parse()?))
                } else {
                    Err(Error::Parse {
                        what: "jacobian variant",
                        input: s.to_string(),
                    })
                }
            }
        }
    }
}

/// Dense per-grid-point scalar values with an explicit defined-region flag.
///
/// Undefined slots hold NaN and are marked; they are never silent zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    dims: GridDims,
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl ScalarMap {
    pub(crate) fn filled(dims: GridDims, values: Vec<f64>, defined: Vec<bool>) -> Self {
        debug_assert_eq!(values.len(), dims.num_points());
        debug_assert_eq!(defined.len(), dims.num_points());
        Self {
            dims,
            values,
            defined,
        }
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn value(&self, p: GridPoint) -> Option<f64> {
        self.value_linear(self.dims.linear_index(p))
    }

    pub fn value_linear(&self, linear: usize) -> Option<f64> {
        self.defined[linear].then(|| self.values[linear])
    }

    /// Raw values in linear order; undefined slots are NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }

    /// (point, value) pairs over the defined region, linear order.
    pub fn iter_defined(&self) -> impl Iterator<Item = (GridPoint, f64)> + '_ {
        self.defined
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(move |(i, _)| (self.dims.point_at(i), self.values[i]))
    }
}

#[inline]
fn det2(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Triple product (a x b) . c.
#[inline]
fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    cx * c[0] + cy * c[1] + cz * c[2]
}

/// Forward and backward difference columns at one point; `None` where the
/// needed neighbor is out of bounds.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointStencil {
    fwd: [Option<[f64; 3]>; 3],
    bwd: [Option<[f64; 3]>; 3],
    rank: usize,
}

impl PointStencil {
    #[inline]
    fn col(&self, axis: usize, sign: Sign) -> Option<[f64; 3]> {
        match sign {
            Sign::Forward => self.fwd[axis],
            Sign::Backward => self.bwd[axis],
        }
    }

    /// Corner determinant for `pattern`, or `None` at the boundary.
    #[inline]
    pub fn corner(&self, pattern: SignPattern) -> Option<f64> {
        debug_assert_eq!(pattern.rank(), self.rank);
        let cx = self.col(0, pattern.sign(0))?;
        let cy = self.col(1, pattern.sign(1))?;
        if self.rank == 2 {
            Some(det2(cx, cy))
        } else {
            let cz = self.col(2, pattern.sign(2))?;
            Some(det3(cx, cy, cz))
        }
    }

    /// Corner determinant by enumeration index (hot-loop form).
    #[inline]
    pub fn corner_by_index(&self, index: usize) -> Option<f64> {
        let pick = |axis: usize| {
            if index >> axis & 1 == 1 {
                self.fwd[axis]
            } else {
                self.bwd[axis]
            }
        };
        let cx = pick(0)?;
        let cy = pick(1)?;
        if self.rank == 2 {
            Some(det2(cx, cy))
        } else {
            let cz = pick(2)?;
            Some(det3(cx, cy, cz))
        }
    }

    /// Central-difference determinant, or `None` at the boundary.
    #[inline]
    pub fn central(&self) -> Option<f64> {
        let avg = |axis: usize| -> Option<[f64; 3]> {
            let f = self.fwd[axis]?;
            let b = self.bwd[axis]?;
            Some([
                0.5 * (f[0] + b[0]),
                0.5 * (f[1] + b[1]),
                0.5 * (f[2] + b[2]),
            ])
        };
        let cx = avg(0)?;
        let cy = avg(1)?;
        if self.rank == 2 {
            Some(det2(cx, cy))
        } else {
            let cz = avg(2)?;
            Some(det3(cx, cy, cz))
        }
    }
}

/// Shared evaluation state for dense determinant computation.
pub(crate) struct DetKernel<'a> {
    field: &'a DisplacementField,
    ext: [usize; 3],
    stride: [usize; 3],
    rank: usize,
}

impl<'a> DetKernel<'a> {
    pub fn new(field: &'a DisplacementField) -> Self {
        Self {
            field,
            ext: field.dims().extents3(),
            stride: field.dims().strides3(),
            rank: field.rank(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Builds the difference stencil at coords/linear index `li`.
    ///
    /// Each column is the unit lattice step plus the displacement difference,
    /// so a zero field yields exactly the identity columns.
    #[inline]
    pub fn stencil(&self, coords: [usize; 3], li: usize) -> PointStencil {
        let u0 = self.field.displacement_linear(li);
        let mut fwd = [None; 3];
        let mut bwd = [None; 3];
        for a in 0..self.rank {
            if coords[a] + 1 < self.ext[a] {
                let u1 = self.field.displacement_linear(li + self.stride[a]);
                let mut c = [u1[0] - u0[0], u1[1] - u0[1], u1[2] - u0[2]];
                c[a] += 1.0;
                fwd[a] = Some(c);
            }
            if coords[a] > 0 {
                let u1 = self.field.displacement_linear(li - self.stride[a]);
                let mut c = [u0[0] - u1[0], u0[1] - u1[1], u0[2] - u1[2]];
                c[a] += 1.0;
                bwd[a] = Some(c);
            }
        }
        PointStencil {
            fwd,
            bwd,
            rank: self.rank,
        }
    }

    /// Star determinant (3D only), or `None` at the boundary.
    #[inline]
    pub fn star(&self, coords: [usize; 3], li: usize, kind: StarKind) -> Option<f64> {
        debug_assert_eq!(self.rank, 3);
        let u0 = self.field.displacement_linear(li);
        // Diagonal edge: lattice offset plus displacement difference.
        let edge = |d: [isize; 3]| -> Option<[f64; 3]> {
            let mut off = 0isize;
            for a in 0..3 {
                let v = coords[a] as isize + d[a];
                if v < 0 || v as usize >= self.ext[a] {
                    return None;
                }
                off += d[a] * self.stride[a] as isize;
            }
            let u1 = self.field.displacement_linear((li as isize + off) as usize);
            Some([
                u1[0] - u0[0] + d[0] as f64,
                u1[1] - u0[1] + d[1] as f64,
                u1[2] - u0[2] + d[2] as f64,
            ])
        };
        let (d1, d2, d3v) = match kind {
            StarKind::One => ([-1, -1, 0], [-1, 0, -1], [0, -1, -1]),
            StarKind::Two => ([1, 1, 0], [0, 1, 1], [1, 0, 1]),
        };
        Some(det3(edge(d1)?, edge(d2)?, edge(d3v)?))
    }

    /// Any criterion or central variant at a point.
    pub fn variant(&self, coords: [usize; 3], li: usize, variant: JacobianVariant) -> Option<f64> {
        match variant {
            JacobianVariant::Corner(p) => self.stencil(coords, li).corner(p),
            JacobianVariant::Central => self.stencil(coords, li).central(),
            JacobianVariant::Star(kind) => self.star(coords, li, kind),
        }
    }
}

fn check_point(field: &DisplacementField, p: GridPoint) -> Result<usize> {
    if !field.dims().contains(p) {
        let ext = field.dims().extents3();
        return Err(Error::OutOfBounds(
            p.0[0], p.0[1], p.0[2], ext[0], ext[1], ext[2],
        ));
    }
    Ok(field.dims().linear_index(p))
}

/// Corner determinant at `p`: per axis, the difference column is
/// `T(p^{+a}) - T(p)` (forward) or `T(p) - T(p^{-a})` (backward), with
/// `T(p) = p + u(p)` in voxel units.
pub fn corner_det(field: &DisplacementField, p: GridPoint, pattern: SignPattern) -> Result<f64> {
    if pattern.rank() != field.rank() {
        return Err(Error::RankMismatch {
            expected: field.rank(),
            actual: pattern.rank(),
        });
    }
    let li = check_point(field, p)?;
    DetKernel::new(field)
        .stencil(p.0, li)
        .corner(pattern)
        .ok_or(Error::BoundaryUndefined(p.0[0], p.0[1], p.0[2]))
}

/// Central-difference determinant at `p`; columns are
/// `(T(p^{+a}) - T(p^{-a})) / 2`.
pub fn central_det(field: &DisplacementField, p: GridPoint) -> Result<f64> {
    let li = check_point(field, p)?;
    DetKernel::new(field)
        .stencil(p.0, li)
        .central()
        .ok_or(Error::BoundaryUndefined(p.0[0], p.0[1], p.0[2]))
}

/// Star determinant at `p` (3D): triple product of the edges toward the
/// three diagonal neighbors of the chosen kind.
pub fn star_det(field: &DisplacementField, p: GridPoint, which: StarKind) -> Result<f64> {
    if field.rank() != 3 {
        return Err(Error::RankMismatch {
            expected: 3,
            actual: field.rank(),
        });
    }
    let li = check_point(field, p)?;
    DetKernel::new(field)
        .star(p.0, li, which)
        .ok_or(Error::BoundaryUndefined(p.0[0], p.0[1], p.0[2]))
}

/// Dense evaluation of one determinant variant over the whole grid.
///
/// Points lacking a required neighbor are flagged undefined. Values are
/// identical for any parallel schedule.
pub fn jacobian_map(field: &DisplacementField, variant: JacobianVariant) -> Result<ScalarMap> {
    match variant {
        JacobianVariant::Corner(p) if p.rank() != field.rank() => {
            return Err(Error::RankMismatch {
                expected: field.rank(),
                actual: p.rank(),
            })
        }
        JacobianVariant::Star(_) if field.rank() != 3 => {
            return Err(Error::RankMismatch {
                expected: 3,
                actual: field.rank(),
            })
        }
        _ => {}
    }
    let dims = field.dims().clone();
    let n = dims.num_points();
    let mut values = vec![f64::NAN; n];
    let mut defined = vec![false; n];
    let kernel = DetKernel::new(field);

    const CHUNK: usize = 1 << 14;
    values
        .par_chunks_mut(CHUNK)
        .zip(defined.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(ci, (vals, defs))| {
            let base = ci * CHUNK;
            for i in 0..vals.len() {
                let li = base + i;
                let coords = dims.point_at(li).0;
                if let Some(v) = kernel.variant(coords, li, variant) {
                    vals[i] = v;
                    defs[i] = true;
                }
            }
        });

    Ok(ScalarMap::filled(dims, values, defined))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DisplacementField, GridDims, GridPoint};

    fn single_point_2d() -> DisplacementField {
        // The canonical 5x5 fixture: u(2,2) = (1.5, 1.5), zero elsewhere.
        let dims = GridDims::isotropic(&[5, 5]).unwrap();
        let mut data = vec![0.0; 50];
        let li = 2 + 2 * 5;
        data[2 * li] = 1.5;
        data[2 * li + 1] = 1.5;
        DisplacementField::new(dims, data).unwrap()
    }

    #[test]
    fn identity_corner_dets_are_one() {
        let field = DisplacementField::zeros(GridDims::isotropic(&[4, 4, 4]).unwrap());
        let p = GridPoint::d3(1, 2, 1);
        for pattern in SignPattern::all(3) {
            assert_eq!(corner_det(&field, p, pattern).unwrap(), 1.0);
        }
        assert_eq!(central_det(&field, p).unwrap(), 1.0);
    }

    #[test]
    fn single_point_corner_signs_disagree() {
        let field = single_point_2d();
        let p = GridPoint::d2(2, 2);
        let bb = SignPattern::d2(Sign::Backward, Sign::Backward);
        let ff = SignPattern::d2(Sign::Forward, Sign::Forward);
        assert_eq!(corner_det(&field, p, bb).unwrap(), 4.0);
        assert_eq!(corner_det(&field, p, ff).unwrap(), -2.0);
    }

    #[test]
    fn single_point_central_misses_the_fold() {
        let field = single_point_2d();
        assert_eq!(central_det(&field, GridPoint::d2(2, 2)).unwrap(), 1.0);
    }

    #[test]
    fn central_is_quarter_sum_of_corners() {
        let field = single_point_2d();
        let p = GridPoint::d2(2, 2);
        let sum: f64 = SignPattern::all(2)
            .into_iter()
            .map(|pat| corner_det(&field, p, pat).unwrap())
            .sum();
        assert_eq!(sum, 4.0 + 1.0 + 1.0 - 2.0);
        let central = central_det(&field, p).unwrap();
        assert!((central - sum / 4.0).abs() <= 1e-12);
    }

    #[test]
    fn star_identity_is_two() {
        let field = DisplacementField::zeros(GridDims::isotropic(&[3, 3, 3]).unwrap());
        let p = GridPoint::d3(1, 1, 1);
        assert_eq!(star_det(&field, p, StarKind::One).unwrap(), 2.0);
        assert_eq!(star_det(&field, p, StarKind::Two).unwrap(), 2.0);
    }

    #[test]
    fn star_reflection_is_minus_two() {
        // Mirror the x axis: T_x(p) = (ext - 1) - p_x.
        let dims = GridDims::isotropic(&[3, 3, 3]).unwrap();
        let mut data = vec![0.0; 81];
        for (i, p) in dims.points().enumerate() {
            data[3 * i] = (2 - p.0[0]) as f64 - p.0[0] as f64;
        }
        let field = DisplacementField::new(dims, data).unwrap();
        let p = GridPoint::d3(1, 1, 1);
        assert_eq!(star_det(&field, p, StarKind::One).unwrap(), -2.0);
        assert_eq!(star_det(&field, p, StarKind::Two).unwrap(), -2.0);
    }

    #[test]
    fn star_rejects_2d() {
        let field = DisplacementField::zeros(GridDims::isotropic(&[3, 3]).unwrap());
        assert!(matches!(
            star_det(&field, GridPoint::d2(1, 1), StarKind::One),
            Err(Error::RankMismatch { .. })
        ));
    }

    #[test]
    fn boundary_is_undefined_not_zero() {
        let field = DisplacementField::zeros(GridDims::isotropic(&[3, 3]).unwrap());
        let bb = SignPattern::d2(Sign::Backward, Sign::Backward);
        assert!(matches!(
            corner_det(&field, GridPoint::d2(0, 1), bb),
            Err(Error::BoundaryUndefined(..))
        ));
        assert!(matches!(
            central_det(&field, GridPoint::d2(2, 1)),
            Err(Error::BoundaryUndefined(..))
        ));
    }

    #[test]
    fn map_identity_defined_region() {
        let field = DisplacementField::zeros(GridDims::isotropic(&[4, 4, 4]).unwrap());
        let bbb = SignPattern::d3(Sign::Backward, Sign::Backward, Sign::Backward);
        let map = jacobian_map(&field, JacobianVariant::Corner(bbb)).unwrap();
        for p in field.dims().points() {
            let expect_defined = p.0.iter().all(|&c| c > 0);
            match map.value(p) {
                Some(v) => {
                    assert!(expect_defined);
                    assert_eq!(v, 1.0);
                }
                None => assert!(!expect_defined),
            }
        }
        assert_eq!(map.defined_count(), 27);
    }

    #[test]
    fn map_uniform_scale_det() {
        // u(p) = (s - 1) p with s = 2: every corner determinant is s^2 = 4.
        let dims = GridDims::isotropic(&[5, 4]).unwrap();
        let mut data = vec![0.0; dims.num_points() * 2];
        for (i, p) in dims.points().enumerate() {
            data[2 * i] = p.0[0] as f64;
            data[2 * i + 1] = p.0[1] as f64;
        }
        let field = DisplacementField::new(dims, data).unwrap();
        for pattern in SignPattern::all(2) {
            let map = jacobian_map(&field, JacobianVariant::Corner(pattern)).unwrap();
            for (_, v) in map.iter_defined() {
                assert!((v - 4.0).abs() <= 1e-12);
            }
            assert!(map.defined_count() > 0);
        }
    }

    #[test]
    fn map_matches_pointwise_calls() {
        let field = single_point_2d();
        for pattern in SignPattern::all(2) {
            let map = jacobian_map(&field, JacobianVariant::Corner(pattern)).unwrap();
            for p in field.dims().points() {
                match (map.value(p), corner_det(&field, p, pattern)) {
                    (Some(a), Ok(b)) => assert_eq!(a, b),
                    (None, Err(Error::BoundaryUndefined(..))) => {}
                    (a, b) => panic!("map/pointwise disagree at {p:?}: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn variant_strings_round_trip() {
        let variants = [
            "corner:--",
            "corner:+-",
            "corner:-+-",
            "corner:+++",
            "central",
            "star1",
            "star2",
        ];
        for s in variants {
            let v: JacobianVariant = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert!("corner:+*".parse::<JacobianVariant>().is_err());
        assert!("corner:+".parse::<JacobianVariant>().is_err());
        assert!("stellar".parse::<JacobianVariant>().is_err());
    }

    #[test]
    fn pattern_enumeration_order() {
        let all = SignPattern::all(2);
        let strs: Vec<String> = all.iter().map(|p| p.to_string()).collect();
        assert_eq!(strs, ["--", "+-", "-+", "++"]);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.index(), i);
        }
        assert_eq!(SignPattern::all(3).len(), 8);
    }
}
