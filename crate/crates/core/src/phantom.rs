//! Synthetic TRUFI/Dixon phantom pairs with analytic ground truth.
//!
//! The body is a solid ellipsoid centred at the world origin and the fat is
//! the shell between it and an inner ellipsoid whose semi-axes are shorter
//! by the shell thickness. Both grids are centred on the body; the Dixon
//! grid is additionally shifted by `translation_mm`, so the two scans only
//! line up through their affines.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::volume_ml;
use crate::nifti::{write_mask, write_nifti, WriteOptions};
use crate::volume::{Grid, Mask, Volume};

pub const TRUFI_FILE: &str = "trufi.nii.gz";
pub const DIXON_FAT_FILE: &str = "dixon_fat.nii.gz";
pub const DIXON_WATER_FILE: &str = "dixon_water.nii.gz";
pub const GT_BODY_TRUFI_FILE: &str = "gt_body_trufi.nii.gz";
pub const GT_BODY_DIXON_FILE: &str = "gt_body_dixon.nii.gz";
pub const GT_FAT_DIXON_FILE: &str = "gt_fat_dixon.nii.gz";
pub const SPEC_FILE: &str = "spec.json";

/// The six NIfTI files of a written case.
pub const CASE_FILES: [&str; 6] = [
    TRUFI_FILE,
    DIXON_FAT_FILE,
    DIXON_WATER_FILE,
    GT_BODY_TRUFI_FILE,
    GT_BODY_DIXON_FILE,
    GT_FAT_DIXON_FILE,
];

/// Largest speckle the default component filter is guaranteed to remove
/// is 49 voxels.
pub const MAX_SPECKLE_VOXELS: usize = 49;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub semi_axes_mm: [f64; 3],
    pub fat_thickness_mm: f64,
    pub trufi_spacing_mm: [f64; 3],
    pub trufi_dims: [usize; 3],
    pub dixon_spacing_mm: [f64; 3],
    pub dixon_dims: [usize; 3],
    /// World offset of the Dixon field of view relative to the TRUFI one.
    pub translation_mm: [f64; 3],
    pub background: f64,
    pub water_tissue: f64,
    pub fat: f64,
    /// Body intensity on the TRUFI scan.
    pub trufi_body: f64,
    pub noise_sigma: f64,
    pub speckle_count: usize,
    pub speckle_voxels: usize,
    pub maternal_slab: bool,
    /// Slab centre relative to the body centre; the slab is a plate normal
    /// to this direction.
    pub maternal_slab_offset_mm: [f64; 3],
    pub maternal_slab_thickness_mm: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            semi_axes_mm: [60.0, 48.0, 80.0],
            fat_thickness_mm: 4.0,
            trufi_spacing_mm: [0.78, 0.78, 2.0],
            trufi_dims: [208, 208, 96],
            dixon_spacing_mm: [1.25, 1.25, 2.0],
            dixon_dims: [128, 128, 96],
            translation_mm: [0.0; 3],
            background: 0.0,
            water_tissue: 20.0,
            fat: 100.0,
            trufi_body: 80.0,
            noise_sigma: 0.0,
            speckle_count: 0,
            speckle_voxels: 10,
            maternal_slab: false,
            maternal_slab_offset_mm: [0.0, -70.0, 0.0],
            maternal_slab_thickness_mm: 10.0,
            seed: 0,
        }
    }
}

fn finite3(v: [f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if !finite3(self.semi_axes_mm) || self.semi_axes_mm.iter().any(|&a| a <= 0.0) {
            return bad(format!("semi-axes must be positive, got {:?}", self.semi_axes_mm));
        }
        let min_axis = self.semi_axes_mm.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.fat_thickness_mm > 0.0 && self.fat_thickness_mm < min_axis) {
            return bad(format!(
                "fat thickness must be in (0, {min_axis}) mm, got {}",
                self.fat_thickness_mm
            ));
        }
        for (name, s) in [("trufi", self.trufi_spacing_mm), ("dixon", self.dixon_spacing_mm)] {
            if !finite3(s) || s.iter().any(|&v| v <= 0.0) {
                return bad(format!("{name} spacing must be positive, got {s:?}"));
            }
        }
        for (name, d) in [("trufi", self.trufi_dims), ("dixon", self.dixon_dims)] {
            if d.contains(&0) || d.iter().any(|&n| n > i16::MAX as usize) {
                return bad(format!("{name} dims must be in 1..=32767, got {d:?}"));
            }
        }
        if !finite3(self.translation_mm) {
            return bad("translation must be finite".into());
        }
        for (name, v) in [
            ("background", self.background),
            ("water_tissue", self.water_tissue),
            ("fat", self.fat),
            ("trufi_body", self.trufi_body),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} intensity must be finite"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if self.speckle_count > 0 && !(1..=MAX_SPECKLE_VOXELS).contains(&self.speckle_voxels) {
            return bad(format!(
                "speckle size must be 1..={MAX_SPECKLE_VOXELS} voxels, got {}",
                self.speckle_voxels
            ));
        }
        if self.maternal_slab {
            let o = self.maternal_slab_offset_mm;
            if !finite3(o) || o.iter().all(|&v| v == 0.0) {
                return bad("maternal slab offset must be finite and nonzero".into());
            }
            if !(self.maternal_slab_thickness_mm > 0.0 && self.maternal_slab_thickness_mm.is_finite()) {
                return bad("maternal slab thickness must be positive".into());
            }
        }
        Ok(())
    }

    pub fn inner_semi_axes_mm(&self) -> [f64; 3] {
        self.semi_axes_mm.map(|a| a - self.fat_thickness_mm)
    }

    /// Analytic body volume in mL.
    pub fn analytic_body_ml(&self) -> f64 {
        let [a, b, c] = self.semi_axes_mm;
        4.0 / 3.0 * std::f64::consts::PI * a * b * c / 1000.0
    }

    /// Analytic shell volume in mL.
    pub fn analytic_fat_ml(&self) -> f64 {
        let [a, b, c] = self.inner_semi_axes_mm();
        self.analytic_body_ml() - 4.0 / 3.0 * std::f64::consts::PI * a * b * c / 1000.0
    }

    fn centred_grid(dims: [usize; 3], spacing: [f64; 3], shift: [f64; 3]) -> Result<Grid> {
        let origin = [0, 1, 2].map(|d| -(dims[d] as f64 - 1.0) / 2.0 * spacing[d] + shift[d]);
        Grid::axis_aligned(dims, spacing, origin)
    }

    pub fn trufi_grid(&self) -> Result<Grid> {
        Self::centred_grid(self.trufi_dims, self.trufi_spacing_mm, [0.0; 3])
    }

    pub fn dixon_grid(&self) -> Result<Grid> {
        Self::centred_grid(self.dixon_dims, self.dixon_spacing_mm, self.translation_mm)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub trufi: Volume,
    pub dixon_fat: Volume,
    pub dixon_water: Volume,
    pub gt_body_trufi: Mask,
    pub gt_body_dixon: Mask,
    pub gt_fat_dixon: Mask,
    /// Injected speckle and slab voxels on the Dixon grid.
    pub artifacts: Mask,
    pub spec: PhantomSpec,
}

impl PhantomCase {
    pub fn gt_body_ml(&self) -> f64 {
        volume_ml(&self.gt_body_dixon)
    }

    pub fn gt_fat_ml(&self) -> f64 {
        volume_ml(&self.gt_fat_dixon)
    }

    /// Midpoint between tissue and fat intensities.
    pub fn midpoint_threshold(&self) -> f64 {
        (self.spec.water_tissue + self.spec.fat) / 2.0
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN);
        mix(self.0)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize
    }
}

/// Independent sub-stream key for one purpose.
fn stream_key(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_mul(GOLDEN)))
}

/// Standard normal deviate for voxel `idx`, a pure function of `(key, idx)`.
fn gaussian_at(key: u64, idx: usize) -> f64 {
    let base = key.wrapping_add((idx as u64).wrapping_mul(2).wrapping_mul(GOLDEN));
    let u1 = ((mix(base.wrapping_add(GOLDEN)) >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
    let u2 = (mix(base.wrapping_add(GOLDEN.wrapping_mul(2))) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

const STREAM_TRUFI: u64 = 1;
const STREAM_FAT: u64 = 2;
const STREAM_WATER: u64 = 3;
const STREAM_SPECKLE: u64 = 4;

fn inside(p: [f64; 3], axes: [f64; 3]) -> bool {
    (0..3).map(|d| (p[d] / axes[d]).powi(2)).sum::<f64>() <= 1.0
}

fn mask_par(grid: &Grid, pred: impl Fn([f64; 3]) -> bool + Sync) -> Mask {
    let data = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.coords(idx);
            pred(grid.world(i, j, k))
        })
        .collect();
    Mask::from_data(grid.clone(), data).expect("length matches grid")
}

fn with_noise(grid: &Grid, clean: &[f64], sigma: f64, key: u64) -> Result<Volume> {
    let data = clean
        .par_iter()
        .enumerate()
        .map(|(idx, &v)| {
            if sigma > 0.0 {
                (v + sigma * gaussian_at(key, idx)) as f32
            } else {
                v as f32
            }
        })
        .collect();
    Volume::new(grid.clone(), data)
}

const SPECKLE_ATTEMPTS: usize = 10_000;

/// Places compact 6-connected blobs in the body interior, each separated
/// from the fat shell and from every other blob by at least one voxel in
/// the 26-neighbourhood sense.
fn place_speckles(spec: &PhantomSpec, body: &Mask, fat: &Mask) -> Result<Vec<Vec<usize>>> {
    let grid = body.grid().clone();
    let [nx, ny, nz] = grid.dims();
    let mut rng = SplitMix64::new(stream_key(spec.seed, STREAM_SPECKLE));
    let mut taken = vec![false; grid.len()];

    let clear = |taken: &[bool], idx: usize| -> bool {
        let [i, j, k] = grid.coords(idx);
        if !body.data()[idx] || fat.data()[idx] {
            return false;
        }
        for dk in -1i64..=1 {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (x, y, z) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
                        return false;
                    }
                    let n = grid.index(x as usize, y as usize, z as usize);
                    if fat.data()[n] || taken[n] {
                        return false;
                    }
                }
            }
        }
        true
    };

    let interior: Vec<usize> = (0..grid.len()).filter(|&idx| clear(&taken, idx)).collect();
    if interior.is_empty() {
        return Err(Error::Spec("no interior room for speckles".into()));
    }
    let steps: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    let mut blobs = Vec::with_capacity(spec.speckle_count);
    for n in 0..spec.speckle_count {
        let mut placed = None;
        for _ in 0..SPECKLE_ATTEMPTS {
            let start = interior[rng.below(interior.len())];
            if !clear(&taken, start) {
                continue;
            }
            let mut blob = vec![start];
            let mut tries = 0;
            while blob.len() < spec.speckle_voxels && tries < 64 * spec.speckle_voxels {
                tries += 1;
                let [i, j, k] = grid.coords(blob[rng.below(blob.len())]);
                let s = steps[rng.below(6)];
                let (x, y, z) = (i as i64 + s[0], j as i64 + s[1], k as i64 + s[2]);
                if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
                    continue;
                }
                let cand = grid.index(x as usize, y as usize, z as usize);
                if !blob.contains(&cand) && clear(&taken, cand) {
                    blob.push(cand);
                }
            }
            if blob.len() == spec.speckle_voxels {
                placed = Some(blob);
                break;
            }
        }
        let blob = placed.ok_or_else(|| Error::Spec(format!("could not place speckle {}", n + 1)))?;
        for &idx in &blob {
            taken[idx] = true;
        }
        blobs.push(blob);
    }
    Ok(blobs)
}

pub fn generate(spec: &PhantomSpec) -> Result<PhantomCase> {
    spec.validate()?;
    let axes = spec.semi_axes_mm;
    let inner = spec.inner_semi_axes_mm();
    let trufi_grid = spec.trufi_grid()?;
    let dixon_grid = spec.dixon_grid()?;

    let gt_body_trufi = mask_par(&trufi_grid, |p| inside(p, axes));
    let gt_body_dixon = mask_par(&dixon_grid, |p| inside(p, axes));
    let gt_fat_dixon = mask_par(&dixon_grid, |p| inside(p, axes) && !inside(p, inner));

    let mut artifacts = Mask::empty(dixon_grid.clone());
    if spec.maternal_slab {
        let o = spec.maternal_slab_offset_mm;
        let len = o.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n = o.map(|v| v / len);
        let half = spec.maternal_slab_thickness_mm / 2.0;
        let slab = mask_par(&dixon_grid, |p| {
            let d: f64 = (0..3).map(|a| (p[a] - o[a]) * n[a]).sum();
            d.abs() <= half && !inside(p, axes)
        });
        artifacts = slab;
    }
    if spec.speckle_count > 0 {
        for blob in place_speckles(spec, &gt_body_dixon, &gt_fat_dixon)? {
            for idx in blob {
                artifacts.data_mut()[idx] = true;
            }
        }
    }

    let trufi_clean: Vec<f64> = gt_body_trufi
        .data()
        .iter()
        .map(|&b| if b { spec.trufi_body } else { spec.background })
        .collect();
    let mut fat_clean = Vec::with_capacity(dixon_grid.len());
    let mut water_clean = Vec::with_capacity(dixon_grid.len());
    for idx in 0..dixon_grid.len() {
        let (body, fat, art) = (
            gt_body_dixon.data()[idx],
            gt_fat_dixon.data()[idx],
            artifacts.data()[idx],
        );
        let (f, w) = if fat || art {
            (spec.fat, spec.water_tissue)
        } else if body {
            (spec.water_tissue, spec.fat)
        } else {
            (spec.background, spec.background)
        };
        fat_clean.push(f);
        water_clean.push(w);
    }

    let sigma = spec.noise_sigma;
    Ok(PhantomCase {
        trufi: with_noise(&trufi_grid, &trufi_clean, sigma, stream_key(spec.seed, STREAM_TRUFI))?,
        dixon_fat: with_noise(&dixon_grid, &fat_clean, sigma, stream_key(spec.seed, STREAM_FAT))?,
        dixon_water: with_noise(&dixon_grid, &water_clean, sigma, stream_key(spec.seed, STREAM_WATER))?,
        gt_body_trufi,
        gt_body_dixon,
        gt_fat_dixon,
        artifacts,
        spec: spec.clone(),
    })
}

/// Writes the six NIfTI files and `spec.json` into `dir`, which must not
/// exist unless `force` is set.
pub fn write_case(case: &PhantomCase, dir: impl AsRef<Path>, force: bool) -> Result<()> {
    let dir = dir.as_ref();
    if dir.exists() && !force {
        return Err(Error::Exists(dir.to_path_buf()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opts = WriteOptions::default();
    write_nifti(&case.trufi, dir.join(TRUFI_FILE), &opts)?;
    write_nifti(&case.dixon_fat, dir.join(DIXON_FAT_FILE), &opts)?;
    write_nifti(&case.dixon_water, dir.join(DIXON_WATER_FILE), &opts)?;
    write_mask(&case.gt_body_trufi, dir.join(GT_BODY_TRUFI_FILE))?;
    write_mask(&case.gt_body_dixon, dir.join(GT_BODY_DIXON_FILE))?;
    write_mask(&case.gt_fat_dixon, dir.join(GT_FAT_DIXON_FILE))?;
    let spec_path = dir.join(SPEC_FILE);
    fs::write(&spec_path, case.spec.to_json()? + "\n").map_err(|e| Error::io(spec_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomSpec {
        PhantomSpec {
            semi_axes_mm: [20.0, 16.0, 24.0],
            fat_thickness_mm: 4.0,
            trufi_dims: [64, 56, 30],
            dixon_dims: [40, 34, 30],
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small();
        s.fat_thickness_mm = 16.0;
        assert!(matches!(generate(&s), Err(Error::Spec(_))));
        let mut s = small();
        s.dixon_spacing_mm[2] = 0.0;
        assert!(matches!(s.validate(), Err(Error::Spec(_))));
        let mut s = small();
        s.speckle_count = 1;
        s.speckle_voxels = 50;
        assert!(matches!(s.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn noise_free_shell_has_the_fat_value() {
        let c = generate(&small()).unwrap();
        for (idx, &f) in c.gt_fat_dixon.data().iter().enumerate() {
            let v = c.dixon_fat.data()[idx];
            if f {
                assert_eq!(v, 100.0);
            } else {
                assert!(v == 20.0 || v == 0.0);
            }
        }
        assert!(c.gt_fat_dixon.is_subset_of(&c.gt_body_dixon));
    }

    #[test]
    fn water_channel_is_complementary() {
        let c = generate(&small()).unwrap();
        for idx in 0..c.dixon_fat.data().len() {
            let (f, w) = (c.dixon_fat.data()[idx], c.dixon_water.data()[idx]);
            if c.gt_body_dixon.data()[idx] {
                assert_eq!(f + w, 120.0);
            } else {
                assert_eq!((f, w), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut s = small();
        s.noise_sigma = 8.0;
        s.speckle_count = 3;
        s.seed = 42;
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a, b);
        s.seed = 43;
        assert_ne!(a.dixon_fat, generate(&s).unwrap().dixon_fat);
    }

    #[test]
    fn speckles_have_the_requested_size() {
        let mut s = small();
        s.speckle_count = 4;
        s.speckle_voxels = 7;
        let c = generate(&s).unwrap();
        assert_eq!(c.artifacts.count(), 28);
        assert!(c.artifacts.is_subset_of(&c.gt_body_dixon));
        assert!(c.artifacts.intersect(&c.gt_fat_dixon).unwrap().is_empty());
    }

    #[test]
    fn spec_json_round_trip() {
        let mut s = small();
        s.translation_mm = [7.0, -1.5, 0.25];
        s.seed = 99;
        assert_eq!(PhantomSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
        assert_eq!(PhantomSpec::from_json("{}").unwrap(), PhantomSpec::default());
        assert!(PhantomSpec::from_json(r#"{"semi_axis": 3}"#).is_err());
    }

    #[test]
    fn translation_is_recoverable_from_the_affines() {
        let mut s = small();
        s.translation_mm = [7.0, 0.0, -3.5];
        let (t, d) = (s.trufi_grid().unwrap(), s.dixon_grid().unwrap());
        let centre = |g: &Grid| {
            let [nx, ny, nz] = g.dims();
            g.affine().apply([(nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0, (nz as f64 - 1.0) / 2.0])
        };
        let (ct, cd) = (centre(&t), centre(&d));
        for a in 0..3 {
            assert!((cd[a] - ct[a] - s.translation_mm[a]).abs() < 1e-4);
        }
    }
}
