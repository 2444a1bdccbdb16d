//! Regular-grid data model: dimensions, points, displacement fields, masks.
//!
//! A transformation is represented by its displacement field `u`; the mapped
//! position of grid point `p` is `p + u(p)` in voxel units. Vector data is
//! stored one displacement per grid point, components interleaved, with the
//! x index varying fastest, then y, then z.

use crate::error::{Error, Result};

/// Grid geometry: rank (2 or 3), per-axis point counts and voxel spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDims {
    extents: Vec<usize>,
    spacings: Vec<f64>,
}

impl GridDims {
    /// Builds dimensions with explicit voxel spacings.
    ///
    /// Requires rank 2 or 3, every extent at least 2 (one cell per axis),
    /// and positive finite spacings.
    pub fn new(extents: &[usize], spacings: &[f64]) -> Result<Self> {
        let rank = extents.len();
        if rank != 2 && rank != 3 {
            return Err(Error::InvalidDims(format!("rank must be 2 or 3, got {rank}")));
        }
        if spacings.len() != rank {
            return Err(Error::InvalidDims(format!(
                "{} spacings for rank {rank}",
                spacings.len()
            )));
        }
        if let Some(&e) = extents.iter().find(|&&e| e < 2) {
            return Err(Error::InvalidDims(format!("extent {e} < 2")));
        }
        if let Some(&s) = spacings.iter().find(|&&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidDims(format!("spacing {s} not positive finite")));
        }
        Ok(Self {
            extents: extents.to_vec(),
            spacings: spacings.to_vec(),
        })
    }

    /// Builds dimensions with unit spacing on every axis.
    pub fn isotropic(extents: &[usize]) -> Result<Self> {
        let spacings = vec![1.0; extents.len()];
        Self::new(extents, &spacings)
    }

    pub fn rank(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    /// Total number of grid points.
    pub fn num_points(&self) -> usize {
        self.extents.iter().product()
    }

    /// Number of complete cells: product of (extent - 1).
    pub fn num_cells(&self) -> usize {
        self.extents.iter().map(|&e| e - 1).product()
    }

    /// Extents padded with 1 to three entries, for rank-agnostic loops.
    pub(crate) fn extents3(&self) -> [usize; 3] {
        let mut ext = [1usize; 3];
        ext[..self.rank()].copy_from_slice(&self.extents);
        ext
    }

    /// Linear point strides (x fastest) padded to three entries.
    pub(crate) fn strides3(&self) -> [usize; 3] {
        let ext = self.extents3();
        [1, ext[0], ext[0] * ext[1]]
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        let ext = self.extents3();
        p.0[0] < ext[0] && p.0[1] < ext[1] && p.0[2] < ext[2]
    }

    /// Linear index of a point, x varying fastest.
    ///
    /// Panics if `p` is out of bounds.
    pub fn linear_index(&self, p: GridPoint) -> usize {
        let ext = self.extents3();
        assert!(self.contains(p), "point out of bounds");
        (p.0[2] * ext[1] + p.0[1]) * ext[0] + p.0[0]
    }

    /// Point at a linear index (inverse of [`GridDims::linear_index`]).
    pub fn point_at(&self, linear: usize) -> GridPoint {
        let ext = self.extents3();
        let x = linear % ext[0];
        let rest = linear / ext[0];
        GridPoint([x, rest % ext[1], rest / ext[1]])
    }

    /// Iterates all grid points in linear (x fastest) order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.num_points()).map(move |i| self.point_at(i))
    }

    /// Iterates cell origins: every point `p` with `p + (1, ..., 1)` in bounds.
    pub fn cells(&self) -> impl Iterator<Item = GridPoint> + '_ {
        let ext = self.extents3();
        let cext = [
            ext[0] - 1,
            ext[1] - 1,
            if self.rank() == 3 { ext[2] - 1 } else { 1 },
        ];
        let n = cext[0] * cext[1] * cext[2];
        (0..n).map(move |i| {
            let x = i % cext[0];
            let rest = i / cext[0];
            GridPoint([x, rest % cext[1], rest / cext[1]])
        })
    }
}

/// A grid point as 0-based indices. Axes beyond the rank are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPoint(pub [usize; 3]);

impl GridPoint {
    pub fn d2(x: usize, y: usize) -> Self {
        GridPoint([x, y, 0])
    }

    pub fn d3(x: usize, y: usize, z: usize) -> Self {
        GridPoint([x, y, z])
    }

    pub fn coords(&self) -> [usize; 3] {
        self.0
    }

    /// Neighbor shifted by `delta`; `None` if any axis leaves `[0, extent)`.
    pub fn offset(&self, delta: [isize; 3], dims: &GridDims) -> Option<GridPoint> {
        let ext = dims.extents3();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = self.0[a] as isize + delta[a];
            if v < 0 || v as usize >= ext[a] {
                return None;
            }
            out[a] = v as usize;
        }
        Some(GridPoint(out))
    }

    fn out_of_bounds_error(&self, dims: &GridDims) -> Error {
        let ext = dims.extents3();
        Error::OutOfBounds(self.0[0], self.0[1], self.0[2], ext[0], ext[1], ext[2])
    }
}

/// Dense per-grid-point displacement vectors.
///
/// Immutable after construction; every component is validated finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    dims: GridDims,
    data: Vec<f64>,
}

impl DisplacementField {
    /// Validates and wraps flat displacement data.
    ///
    /// `data` holds one rank-length vector per grid point in linear point
    /// order (x fastest), components interleaved.
    pub fn new(dims: GridDims, data: Vec<f64>) -> Result<Self> {
        let expected = dims.num_points() * dims.rank();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { dims, data })
    }

    /// All-zero (identity-transformation) field.
    pub fn zeros(dims: GridDims) -> Self {
        let len = dims.num_points() * dims.rank();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.rank()
    }

    /// Flat data in storage order; re-flattening reproduces the input exactly.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Displacement vector at `p`, zero-padded to three components.
    ///
    /// Panics if `p` is out of bounds.
    pub fn displacement(&self, p: GridPoint) -> [f64; 3] {
        self.displacement_linear(self.dims.linear_index(p))
    }

    #[inline]
    pub(crate) fn displacement_linear(&self, linear: usize) -> [f64; 3] {
        let rank = self.dims.rank();
        let base = linear * rank;
        let mut u = [0.0; 3];
        u[..rank].copy_from_slice(&self.data[base..base + rank]);
        u
    }

    /// Mapped position `p + u(p)` in voxel units (zero-padded).
    ///
    /// This is the quantity all determinants and fold measures
    /// differentiate; spacing never enters it. Panics if out of bounds.
    pub fn index_position(&self, p: GridPoint) -> [f64; 3] {
        let u = self.displacement_linear(self.dims.linear_index(p));
        [
            p.0[0] as f64 + u[0],
            p.0[1] as f64 + u[1],
            p.0[2] as f64 + u[2],
        ]
    }

    /// Transformed physical position `p * spacing + u(p)` (zero-padded).
    pub fn transform_at(&self, p: GridPoint) -> Result<[f64; 3]> {
        if !self.dims.contains(p) {
            return Err(p.out_of_bounds_error(&self.dims));
        }
        let u = self.displacement_linear(self.dims.linear_index(p));
        let mut out = [0.0; 3];
        for a in 0..self.dims.rank() {
            out[a] = p.0[a] as f64 * self.dims.spacing(a) + u[a];
        }
        Ok(out)
    }
}

/// Boolean inclusion map restricting statistics to a region.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    dims: GridDims,
    data: Vec<bool>,
}

impl VoxelMask {
    pub fn new(dims: GridDims, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.num_points() {
            return Err(Error::LengthMismatch {
                expected: dims.num_points(),
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn is_set(&self, p: GridPoint) -> bool {
        self.data[self.dims.linear_index(p)]
    }

    #[inline]
    pub(crate) fn get_linear(&self, linear: usize) -> bool {
        self.data[linear]
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Checks per-axis point counts against another grid.
    pub fn matches_extents(&self, dims: &GridDims) -> bool {
        self.dims.extents() == dims.extents()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_rejects_length_mismatch() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let err = DisplacementField::new(dims, vec![0.0; 17]).unwrap_err();
        match err {
            Error::LengthMismatch { expected, actual } => {
                assert_eq!(expected, 18);
                assert_eq!(actual, 17);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_reports_first_non_finite_index() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let mut data = vec![0.0; 18];
        data[7] = f64::NAN;
        data[11] = f64::INFINITY;
        match DisplacementField::new(dims, data).unwrap_err() {
            Error::NonFiniteValue { index } => assert_eq!(index, 7),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_accepts_3d() {
        let dims = GridDims::isotropic(&[2, 2, 2]).unwrap();
        let field = DisplacementField::new(dims, vec![0.25; 24]).unwrap();
        assert_eq!(field.rank(), 3);
    }

    #[test]
    fn dims_reject_small_extent_and_bad_spacing() {
        assert!(GridDims::isotropic(&[1, 3]).is_err());
        assert!(GridDims::isotropic(&[3]).is_err());
        assert!(GridDims::new(&[3, 3], &[1.0, 0.0]).is_err());
        assert!(GridDims::new(&[3, 3], &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn transform_identity_and_spacing() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let field = DisplacementField::zeros(dims);
        assert_eq!(field.transform_at(GridPoint::d2(1, 2)).unwrap(), [1.0, 2.0, 0.0]);

        let dims = GridDims::new(&[3, 3], &[2.0, 2.0]).unwrap();
        let field = DisplacementField::zeros(dims);
        assert_eq!(field.transform_at(GridPoint::d2(1, 1)).unwrap(), [2.0, 2.0, 0.0]);
    }

    #[test]
    fn transform_applies_displacement() {
        let dims = GridDims::isotropic(&[5, 5]).unwrap();
        let mut data = vec![0.0; 50];
        let li = 2 + 2 * 5;
        data[2 * li] = 1.5;
        data[2 * li + 1] = 1.5;
        let field = DisplacementField::new(dims, data).unwrap();
        assert_eq!(field.transform_at(GridPoint::d2(2, 2)).unwrap(), [3.5, 3.5, 0.0]);
    }

    #[test]
    fn transform_rejects_out_of_bounds() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let field = DisplacementField::zeros(dims);
        assert!(matches!(
            field.transform_at(GridPoint::d2(3, 0)),
            Err(Error::OutOfBounds(..))
        ));
    }

    #[test]
    fn cell_iteration_counts() {
        let d = GridDims::isotropic(&[3, 3]).unwrap();
        assert_eq!(d.cells().count(), 4);
        assert_eq!(d.num_cells(), 4);
        let d = GridDims::isotropic(&[4, 4, 4]).unwrap();
        assert_eq!(d.cells().count(), 27);
        let d = GridDims::isotropic(&[2, 5]).unwrap();
        assert_eq!(d.cells().count(), 4);
    }

    #[test]
    fn cells_stay_in_bounds() {
        let d = GridDims::isotropic(&[3, 4, 2]).unwrap();
        for c in d.cells() {
            assert!(c.offset([1, 1, 1], &d).is_some());
        }
    }

    #[test]
    fn linear_index_round_trip() {
        let d = GridDims::isotropic(&[3, 4, 5]).unwrap();
        for (i, p) in d.points().enumerate() {
            assert_eq!(d.linear_index(p), i);
            assert_eq!(d.point_at(i), p);
        }
    }

    #[test]
    fn data_round_trip_is_bit_exact() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let data: Vec<f64> = (0..18).map(|i| (i as f64) * 0.1 - 0.7).collect();
        let field = DisplacementField::new(dims, data.clone()).unwrap();
        assert_eq!(field.data(), data.as_slice());
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn linear_index_rejects_out_of_bounds() {
        let d = GridDims::isotropic(&[3, 3]).unwrap();
        d.linear_index(GridPoint::d2(3, 0));
    }

    #[test]
    fn mask_counts() {
        let dims = GridDims::isotropic(&[3, 3]).unwrap();
        let mut bits = vec![false; 9];
        bits[4] = true;
        bits[8] = true;
        let mask = VoxelMask::new(dims, bits).unwrap();
        assert_eq!(mask.count_set(), 2);
        assert!(mask.is_set(GridPoint::d2(1, 1)));
        assert!(!mask.is_set(GridPoint::d2(0, 0)));
    }
}
