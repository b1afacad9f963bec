//! In-memory scalar volumes and binary masks.

use crate::error::{Error, Result};
use crate::geometry::AffineTransform;
use crate::nifti::{Datatype, NiftiHeader};

/// Largest per-entry difference (mm) tolerated when two grids are
/// compared for metric computations.
const GRID_TOL: f64 = 1e-4;

/// Sampling lattice of a scan: voxel counts, voxel size and the
/// voxel-to-world affine.
///
/// Spacing and affine entries are stored at `f32` precision, the precision
/// of the NIfTI-1 header, so a grid survives a write/read cycle bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: AffineTransform,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: AffineTransform) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Geometry(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        let affine = affine.quantized();
        if !affine.is_invertible() {
            return Err(Error::Geometry(format!(
                "voxel-to-world affine is singular: {:?}",
                affine.matrix()
            )));
        }
        Ok(Self {
            dims,
            spacing: spacing.map(|s| s as f32 as f64),
            affine,
        })
    }

    /// Axis-aligned grid whose voxel `(0,0,0)` sits at `origin`.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, AffineTransform::diagonal(spacing, origin))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &AffineTransform {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Linear offset of `(i, j, k)` in x-fastest order.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// World position of a voxel centre.
    pub fn world(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.affine.apply([i as f64, j as f64, k as f64])
    }

    /// Same grid with the affine shifted in world space.
    pub fn translated(&self, offset: [f64; 3]) -> Result<Grid> {
        Grid::new(self.dims, self.spacing, self.affine.translated(offset))
    }

    /// Dims must match exactly; spacing and affine within a small
    /// tolerance.
    pub fn ensure_matches(&self, other: &Grid, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Geometry(format!(
                "{what}: dims differ ({:?} vs {:?})",
                self.dims, other.dims
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= GRID_TOL * (1.0 + a.abs().max(b.abs()));
        if !(0..3).all(|a| close(self.spacing[a], other.spacing[a])) {
            return Err(Error::Geometry(format!(
                "{what}: spacing differs ({:?} vs {:?})",
                self.spacing, other.spacing
            )));
        }
        let same_affine = self
            .affine
            .matrix()
            .iter()
            .flatten()
            .zip(other.affine.matrix().iter().flatten())
            .all(|(a, b)| close(*a, *b));
        if !same_affine {
            return Err(Error::Geometry(format!("{what}: affines differ")));
        }
        Ok(())
    }
}

/// Scalar image. Intensities are held as `f32` with any on-disk intensity
/// scaling already applied.
///
/// Equality compares geometry and intensities; the header records
/// provenance only.
#[derive(Debug, Clone)]
pub struct Volume {
    header: NiftiHeader,
    grid: Grid,
    data: Vec<f32>,
}

impl PartialEq for Volume {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        let header = NiftiHeader::for_grid(&grid, Datatype::Float32);
        Self::with_header(header, grid, data)
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        let data = vec![value; grid.len()];
        Self::new(grid, data).expect("length matches by construction")
    }

    pub(crate) fn with_header(header: NiftiHeader, grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "volume has {} voxels but dims {:?} need {}",
                data.len(),
                grid.dims(),
                grid.len()
            )));
        }
        Ok(Self { header, grid, data })
    }

    pub fn header(&self) -> &NiftiHeader {
        &self.header
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn affine(&self) -> &AffineTransform {
        self.grid.affine()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f32) {
        let idx = self.grid.index(i, j, k);
        self.data[idx] = v;
    }
}

/// Binary segmentation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(grid: Grid) -> Self {
        let data = vec![false; grid.len()];
        Self { grid, data }
    }

    pub fn from_data(grid: Grid, data: Vec<bool>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Geometry(format!(
                "mask has {} voxels but dims {:?} need {}",
                data.len(),
                grid.dims(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Foreground wherever the volume is nonzero.
    pub fn from_volume(volume: &Volume) -> Self {
        Self {
            grid: volume.grid().clone(),
            data: volume.data().iter().map(|&v| v != 0.0).collect(),
        }
    }

    /// Mask on `grid`, foreground where `pred(i, j, k)` holds.
    pub fn from_fn(grid: Grid, mut pred: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(pred(i, j, k));
                }
            }
        }
        Self { grid, data }
    }

    /// 0/1 intensities on the same grid.
    pub fn to_volume(&self) -> Volume {
        let data = self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let header = NiftiHeader::for_grid(&self.grid, Datatype::UInt8);
        Volume::with_header(header, self.grid.clone(), data).expect("length matches")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.grid.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Voxelwise AND with a mask on the same lattice.
    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        self.grid.ensure_matches(&other.grid, "mask intersection")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Ok(Mask {
            grid: self.grid.clone(),
            data,
        })
    }

    /// Every foreground voxel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }
}
