//! Intensity thresholding restricted to a voxel box, and an Otsu
//! threshold estimate for the same region.

use crate::error::{Error, Result};
use crate::geometry::VoxelBox;
use crate::volume::{Mask, Volume};

pub const OTSU_BINS: usize = 256;

fn check_voi(volume: &Volume, voi: &VoxelBox) -> Result<()> {
    if !voi.fits(volume.grid().dims()) {
        return Err(Error::Geometry(format!(
            "VOI {voi:?} exceeds grid {:?}",
            volume.grid().dims()
        )));
    }
    Ok(())
}

/// Foreground is every voxel inside `voi` with intensity `>= threshold`.
pub fn threshold_in_voi(volume: &Volume, voi: &VoxelBox, threshold: f64) -> Result<Mask> {
    check_voi(volume, voi)?;
    if !threshold.is_finite() {
        return Err(Error::Params(format!("threshold must be finite, got {threshold}")));
    }
    let mut mask = Mask::empty(volume.grid().clone());
    for k in voi.lo[2]..=voi.hi[2] {
        for j in voi.lo[1]..=voi.hi[1] {
            for i in voi.lo[0]..=voi.hi[0] {
                if volume.get(i, j, k) as f64 >= threshold {
                    mask.set(i, j, k, true);
                }
            }
        }
    }
    Ok(mask)
}

fn voi_values(volume: &Volume, voi: &VoxelBox) -> Vec<f64> {
    let mut out = Vec::with_capacity(voi.voxel_count());
    for k in voi.lo[2]..=voi.hi[2] {
        for j in voi.lo[1]..=voi.hi[1] {
            for i in voi.lo[0]..=voi.hi[0] {
                let v = volume.get(i, j, k);
                if v.is_finite() {
                    out.push(v as f64);
                }
            }
        }
    }
    out
}

/// Otsu threshold over a 256-bin histogram of the intensities inside `voi`.
///
/// Bins span `[min, max]` evenly. Splitting after bin `t` puts bins `0..=t`
/// in the lower class; the split maximizing between-class variance wins,
/// the lowest `t` on ties, and the returned value is the lower edge of bin
/// `t + 1`. Voxels at or above it are exactly the upper class.
pub fn otsu_threshold(volume: &Volume, voi: &VoxelBox) -> Result<f64> {
    check_voi(volume, voi)?;
    let values = voi_values(volume, voi);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() || lo >= hi {
        return Err(Error::DegenerateHistogram(format!(
            "VOI {voi:?} holds fewer than two distinct intensities"
        )));
    }

    let width = (hi - lo) / OTSU_BINS as f64;
    let mut hist = [0u64; OTSU_BINS];
    for &v in &values {
        let b = (((v - lo) / width) as usize).min(OTSU_BINS - 1);
        hist[b] += 1;
    }

    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(b, &c)| b as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (t, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let diff = sum0 / w0 - (sum_all - sum0) / w1;
        let between = w0 * w1 * diff * diff;
        if between > best.0 {
            best = (between, t);
        }
    }
    Ok(lo + (best.1 + 1) as f64 * width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn volume(values: &[f32]) -> Volume {
        let g = Grid::axis_aligned([values.len(), 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        Volume::new(g, values.to_vec()).unwrap()
    }

    #[test]
    fn extreme_thresholds() {
        let g = Grid::axis_aligned([6, 6, 6], [1.0; 3], [0.0; 3]).unwrap();
        let mut v = Volume::filled(g, 5.0);
        v.set(0, 0, 0, -3.0);
        v.set(5, 5, 5, 12.0);
        let voi = VoxelBox::new([1, 1, 1], [3, 4, 2]).unwrap();
        let all = threshold_in_voi(&v, &voi, -100.0).unwrap();
        assert_eq!(all.count(), voi.voxel_count());
        assert!(all.data().iter().enumerate().all(|(idx, &b)| {
            let [i, j, k] = v.grid().coords(idx);
            b == voi.contains(i, j, k)
        }));
        assert!(threshold_in_voi(&v, &voi, 100.0).unwrap().is_empty());
        assert!(threshold_in_voi(&v, &voi, f64::NAN).is_err());
        let outside = VoxelBox::new([0, 0, 0], [6, 0, 0]).unwrap();
        assert!(threshold_in_voi(&v, &outside, 1.0).is_err());
    }

    #[test]
    fn comparison_is_inclusive() {
        let v = volume(&[1.0, 2.0, 3.0]);
        let m = threshold_in_voi(&v, &VoxelBox::full([3, 1, 1]), 2.0).unwrap();
        assert_eq!(m.data(), &[false, true, true]);
    }

    #[test]
    fn otsu_separates_two_values() {
        let v = volume(&[0.0, 0.0, 100.0, 100.0]);
        let t = otsu_threshold(&v, &VoxelBox::full([4, 1, 1])).unwrap();
        assert!(t > 0.0 && t < 100.0, "{t}");

        let v = volume(&[0.0, 0.0, 0.0, 100.0]);
        let t = otsu_threshold(&v, &VoxelBox::full([4, 1, 1])).unwrap();
        assert!(t > 0.0 && t < 100.0, "{t}");
    }

    #[test]
    fn otsu_rejects_constant_region() {
        let v = volume(&[7.0; 5]);
        assert!(matches!(
            otsu_threshold(&v, &VoxelBox::full([5, 1, 1])),
            Err(Error::DegenerateHistogram(_))
        ));
    }
}
