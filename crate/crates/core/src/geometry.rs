//! Voxel/world coordinate algebra, voxel boxes and nearest-neighbour
//! resampling of masks between scans.
//!
//! Every grid carries a 4×4 affine mapping homogeneous voxel indices
//! `(i, j, k, 1)` to world millimetres. Two scans of the same subject are
//! brought into correspondence purely through their affines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Grid, Mask};

/// Relative determinant below which the linear block counts as singular.
const SINGULAR_TOL: f64 = 1e-12;

/// Homogeneous voxel-index → world-mm transform. The bottom row is always
/// `[0, 0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform([[f64; 4]; 4]);

impl Default for AffineTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform {
    pub const fn identity() -> Self {
        Self([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// Build from the three top rows (the NIfTI `srow_x/y/z` layout).
    pub fn from_rows(rows: [[f64; 4]; 3]) -> Self {
        Self([rows[0], rows[1], rows[2], [0.0, 0.0, 0.0, 1.0]])
    }

    /// Axis-aligned scaling by `spacing` followed by a shift to `origin`.
    pub fn diagonal(spacing: [f64; 3], origin: [f64; 3]) -> Self {
        Self::from_rows([
            [spacing[0], 0.0, 0.0, origin[0]],
            [0.0, spacing[1], 0.0, origin[1]],
            [0.0, 0.0, spacing[2], origin[2]],
        ])
    }

    pub fn translation(offset: [f64; 3]) -> Self {
        Self::diagonal([1.0; 3], offset)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 4]; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    /// World position of voxel `(0, 0, 0)`.
    pub fn origin(&self) -> [f64; 3] {
        [self.0[0][3], self.0[1][3], self.0[2][3]]
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &AffineTransform) -> AffineTransform {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.0[r][k] * other.0[k][c]).sum();
            }
        }
        AffineTransform(out)
    }

    /// The same transform followed by a world-frame shift.
    pub fn translated(&self, offset: [f64; 3]) -> AffineTransform {
        let mut out = *self;
        for (axis, d) in offset.iter().enumerate() {
            out.0[axis][3] += d;
        }
        out
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_invertible(&self) -> bool {
        let m = &self.0;
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return false;
        }
        let scale: f64 = (0..3)
            .map(|c| (0..3).map(|r| m[r][c] * m[r][c]).sum::<f64>().sqrt())
            .product();
        scale > 0.0 && self.determinant().abs() > SINGULAR_TOL * scale
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        if !self.is_invertible() {
            return Err(Error::Geometry(format!("singular affine {:?}", self.0)));
        }
        let m = &self.0;
        let det = self.determinant();
        let mut inv = [[0.0; 4]; 4];
        // adjugate of the 3×3 block
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        for row in inv.iter_mut().take(3) {
            row[3] = -(0..3).map(|k| row[k] * m[k][3]).sum::<f64>();
        }
        inv[3][3] = 1.0;
        Ok(AffineTransform(inv))
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3];
        }
        out
    }

    /// Round every entry through `f32`, the precision NIfTI-1 stores.
    pub(crate) fn quantized(&self) -> AffineTransform {
        let mut out = self.0;
        for v in out.iter_mut().flatten() {
            *v = *v as f32 as f64;
        }
        AffineTransform(out)
    }
}

pub fn voxel_to_world(affine: &AffineTransform, index: [i64; 3]) -> [f64; 3] {
    affine.apply([index[0] as f64, index[1] as f64, index[2] as f64])
}

pub fn world_to_voxel(affine: &AffineTransform, point: [f64; 3]) -> Result<[f64; 3]> {
    Ok(affine.inverse()?.apply(point))
}

/// Axis-aligned box of voxel indices, both corners inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| lo[a] > hi[a]) {
            return Err(Error::Geometry(format!("box lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// The box covering a whole grid.
    pub fn full(dims: [usize; 3]) -> Self {
        Self {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&i)
            && (self.lo[1]..=self.hi[1]).contains(&j)
            && (self.lo[2]..=self.hi[2]).contains(&k)
    }

    /// `other` lies entirely within `self`.
    pub fn encloses(&self, other: &VoxelBox) -> bool {
        (0..3).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn fits(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|a| self.hi[a] < dims[a])
    }

    pub fn extent(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a] + 1)
    }

    pub fn voxel_count(&self) -> usize {
        self.extent().iter().product()
    }
}

/// Tightest box around the foreground of `mask`.
pub fn bounding_box(mask: &Mask) -> Result<VoxelBox> {
    let [nx, ny, _] = mask.grid().dims();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (idx, _) in mask.data().iter().enumerate().filter(|(_, &v)| v) {
        let p = [idx % nx, (idx / nx) % ny, idx / (nx * ny)];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
        any = true;
    }
    if !any {
        return Err(Error::EmptyMask("bounding box of an empty mask"));
    }
    Ok(VoxelBox { lo, hi })
}

/// Grow `bbox` by `ceil(margin_mm / spacing)` voxels per axis, clipped to
/// the grid.
pub fn expand_box(bbox: &VoxelBox, margin_mm: f64, grid: &Grid) -> Result<VoxelBox> {
    if !(margin_mm >= 0.0 && margin_mm.is_finite()) {
        return Err(Error::Geometry(format!(
            "margin must be finite and non-negative, got {margin_mm}"
        )));
    }
    let dims = grid.dims();
    let spacing = grid.spacing();
    let mut out = *bbox;
    for a in 0..3 {
        let grow = (margin_mm / spacing[a]).ceil() as usize;
        out.lo[a] = bbox.lo[a].saturating_sub(grow);
        out.hi[a] = (bbox.hi[a] + grow).min(dims[a] - 1);
    }
    Ok(out)
}

/// Resample `src` onto `target` by nearest neighbour.
///
/// Each target voxel centre is carried through world space into the
/// continuous index space of `src` and rounded half away from zero; indices
/// that land outside the source grid are background.
pub fn resample_mask_nearest(src: &Mask, target: &Grid) -> Result<Mask> {
    let src_grid = src.grid();
    let to_src = src_grid.affine().inverse()?.compose(target.affine());
    target.affine().inverse()?;

    let [tx, ty, tz] = target.dims();
    let [sx, sy, sz] = src_grid.dims();
    let src_data = src.data();
    let m = *to_src.matrix();
    let mut out = vec![false; tx * ty * tz];

    out.par_chunks_mut(tx * ty).enumerate().for_each(|(k, slab)| {
        for j in 0..ty {
            for i in 0..tx {
                let p = [i as f64, j as f64, k as f64];
                let mut idx = [0i64; 3];
                for (r, v) in idx.iter_mut().enumerate() {
                    let c = m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3];
                    *v = c.round() as i64;
                }
                let inside = idx[0] >= 0
                    && idx[1] >= 0
                    && idx[2] >= 0
                    && (idx[0] as usize) < sx
                    && (idx[1] as usize) < sy
                    && (idx[2] as usize) < sz;
                if inside {
                    let s = idx[0] as usize + sx * (idx[1] as usize + sy * idx[2] as usize);
                    slab[i + tx * j] = src_data[s];
                }
            }
        }
    });

    Mask::from_data(target.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Grid {
        Grid::new(dims, spacing, AffineTransform::diagonal(spacing, origin)).unwrap()
    }

    #[test]
    fn voxel_to_world_examples() {
        let id = AffineTransform::identity();
        assert_eq!(voxel_to_world(&id, [0, 0, 0]), [0.0, 0.0, 0.0]);
        let diag = AffineTransform::diagonal([1.25, 1.25, 1.5], [0.0; 3]);
        assert_eq!(voxel_to_world(&diag, [2, 0, 0]), [2.5, 0.0, 0.0]);
        let shifted = AffineTransform::translation([10.0, -5.0, 3.0]);
        assert_eq!(voxel_to_world(&shifted, [0, 0, 0]), [10.0, -5.0, 3.0]);
    }

    #[test]
    fn world_to_voxel_examples() {
        let id = AffineTransform::identity();
        assert_eq!(world_to_voxel(&id, [3.0, 4.0, 5.0]).unwrap(), [3.0, 4.0, 5.0]);
        let two = AffineTransform::diagonal([2.0; 3], [0.0; 3]);
        assert_eq!(world_to_voxel(&two, [4.0, 4.0, 4.0]).unwrap(), [2.0, 2.0, 2.0]);
    }

    #[test]
    fn singular_affine_is_rejected() {
        let flat = AffineTransform::diagonal([1.0, 0.0, 1.0], [0.0; 3]);
        assert!(matches!(flat.inverse(), Err(Error::Geometry(_))));
        assert!(world_to_voxel(&flat, [0.0; 3]).is_err());
    }

    #[test]
    fn oblique_inverse_composes_to_identity() {
        let a = AffineTransform::from_rows([
            [0.9, -0.3, 0.1, 12.0],
            [0.25, 1.2, -0.2, -4.0],
            [0.05, 0.4, 1.9, 7.5],
        ]);
        let prod = a.compose(&a.inverse().unwrap());
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((prod.matrix()[r][c] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bounding_box_examples() {
        let g = grid([8, 8, 8], [1.0; 3], [0.0; 3]);
        let mut m = Mask::empty(g.clone());
        m.set(3, 4, 5, true);
        assert_eq!(
            bounding_box(&m).unwrap(),
            VoxelBox { lo: [3, 4, 5], hi: [3, 4, 5] }
        );
        let mut m = Mask::empty(g.clone());
        m.set(0, 0, 0, true);
        m.set(7, 1, 2, true);
        assert_eq!(
            bounding_box(&m).unwrap(),
            VoxelBox { lo: [0, 0, 0], hi: [7, 1, 2] }
        );
        assert!(matches!(bounding_box(&Mask::empty(g)), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn expand_box_examples() {
        let g = grid([40, 40, 40], [1.25, 1.25, 2.0], [0.0; 3]);
        let b = VoxelBox { lo: [10, 10, 10], hi: [20, 20, 20] };
        assert_eq!(expand_box(&b, 0.0, &g).unwrap(), b);
        let e = expand_box(&b, 5.0, &g).unwrap();
        assert_eq!(e.lo, [6, 6, 7]);
        assert_eq!(e.hi, [24, 24, 23]);
        let edge = VoxelBox { lo: [1, 0, 38], hi: [39, 2, 39] };
        let e = expand_box(&edge, 5.0, &g).unwrap();
        assert_eq!(e.lo, [0, 0, 35]);
        assert_eq!(e.hi, [39, 6, 39]);
        assert!(expand_box(&b, -1.0, &g).is_err());
    }

    #[test]
    fn resample_identity_and_one_voxel_shift() {
        let g = grid([6, 5, 4], [1.25, 1.25, 2.0], [-3.0, 2.0, 1.0]);
        let mut m = Mask::empty(g.clone());
        for (i, j, k) in [(0, 0, 0), (2, 3, 1), (5, 4, 3), (4, 1, 2)] {
            m.set(i, j, k, true);
        }
        assert_eq!(resample_mask_nearest(&m, &g).unwrap(), m);

        // target origin one voxel further along +x: target i maps to source i+1
        let shifted = grid([6, 5, 4], [1.25, 1.25, 2.0], [-3.0 + 1.25, 2.0, 1.0]);
        let out = resample_mask_nearest(&m, &shifted).unwrap();
        for k in 0..4 {
            for j in 0..5 {
                for i in 0..6 {
                    let want = i + 1 < 6 && m.get(i + 1, j, k);
                    assert_eq!(out.get(i, j, k), want, "voxel ({i},{j},{k})");
                }
            }
        }
    }

    #[test]
    fn half_index_rounds_away_from_zero() {
        let src_grid = grid([4, 1, 1], [1.0; 3], [0.0; 3]);
        let mut m = Mask::empty(src_grid);
        m.set(2, 0, 0, true);
        // target voxel 0 sits at world x = 1.5, exactly between source voxels 1 and 2
        let target = grid([1, 1, 1], [1.0; 3], [1.5, 0.0, 0.0]);
        assert!(resample_mask_nearest(&m, &target).unwrap().get(0, 0, 0));
    }
}
