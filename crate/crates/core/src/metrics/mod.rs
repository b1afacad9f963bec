//! Overlap, surface-distance and volume metrics for comparing a predicted
//! mask against a reference.
//!
//! Surfaces are the 6-connected border voxels of a mask and distances are
//! taken between voxel centres in millimetres. Every function requires
//! both masks to share one grid.

pub mod edt;
mod record;

use rayon::prelude::*;

pub use edt::{distance_transform, squared_distance_transform, squared_distance_weighted};
pub use record::{read_metrics_csv, write_metrics_csv, MetricsRecord, MetricsRow, CSV_HEADER};

use crate::error::{Error, Result};
use crate::volume::Mask;

fn same_grid(a: &Mask, b: &Mask, what: &str) -> Result<()> {
    a.grid().ensure_matches(b.grid(), what)
}

/// `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    same_grid(a, b, "dice")?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Border voxels of a mask: foreground voxels with at least one face
/// neighbour that is background or outside the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceSet {
    indices: Vec<usize>,
}

impl SurfaceSet {
    pub fn of(mask: &Mask) -> Self {
        let [nx, ny, nz] = mask.grid().dims();
        let data = mask.data();
        let indices = (0..data.len())
            .filter(|&idx| {
                if !data[idx] {
                    return false;
                }
                let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
                i == 0
                    || j == 0
                    || k == 0
                    || i + 1 == nx
                    || j + 1 == ny
                    || k + 1 == nz
                    || !data[idx - 1]
                    || !data[idx + 1]
                    || !data[idx - nx]
                    || !data[idx + nx]
                    || !data[idx - nx * ny]
                    || !data[idx + nx * ny]
            })
            .collect();
        Self { indices }
    }

    /// Linear voxel indices in scan order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn to_mask(&self, like: &Mask) -> Mask {
        let mut data = vec![false; like.data().len()];
        for &i in &self.indices {
            data[i] = true;
        }
        Mask::from_data(like.grid().clone(), data).expect("same length")
    }
}

/// Directed nearest-surface distances in both directions, in scan order
/// of the source surface.
#[derive(Debug, Clone)]
pub struct SurfaceDistances {
    pub a_to_b: Vec<f64>,
    pub b_to_a: Vec<f64>,
}

impl SurfaceDistances {
    pub fn compute(a: &Mask, b: &Mask) -> Result<Self> {
        same_grid(a, b, "surface distance")?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyMask("surface distances need two nonempty masks"));
        }
        let sa = SurfaceSet::of(a);
        let sb = SurfaceSet::of(b);
        let (dt_a, dt_b) = rayon::join(
            || squared_distance_transform(&sa.to_mask(a)),
            || squared_distance_transform(&sb.to_mask(b)),
        );
        let (dt_a, dt_b) = (dt_a?, dt_b?);
        let lookup = |s: &SurfaceSet, dt: &[f64]| -> Vec<f64> {
            s.indices().par_iter().map(|&i| dt[i].sqrt()).collect()
        };
        Ok(Self {
            a_to_b: lookup(&sa, &dt_b),
            b_to_a: lookup(&sb, &dt_a),
        })
    }

    pub fn hausdorff(&self) -> f64 {
        self.a_to_b.iter().chain(&self.b_to_a).fold(0.0, |m, &d| m.max(d))
    }

    /// Larger of the two directed nearest-rank percentiles; `100` is the
    /// plain Hausdorff distance.
    pub fn hausdorff_percentile(&self, pct: f64) -> f64 {
        let directed = |d: &[f64]| {
            let mut v = d.to_vec();
            v.sort_by(f64::total_cmp);
            let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
            v[rank.min(v.len()) - 1]
        };
        directed(&self.a_to_b).max(directed(&self.b_to_a))
    }

    pub fn assd(&self) -> f64 {
        let total: f64 = self.a_to_b.iter().sum::<f64>() + self.b_to_a.iter().sum::<f64>();
        total / (self.a_to_b.len() + self.b_to_a.len()) as f64
    }
}

/// Symmetric Hausdorff distance between the two surfaces, in mm.
pub fn hausdorff(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(SurfaceDistances::compute(a, b)?.hausdorff())
}

/// Percentile Hausdorff distance (e.g. `95.0` for HD95), in mm.
pub fn hausdorff_percentile(a: &Mask, b: &Mask, pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Input(format!("percentile must be in (0, 100], got {pct}")));
    }
    Ok(SurfaceDistances::compute(a, b)?.hausdorff_percentile(pct))
}

/// Average symmetric surface distance, in mm.
pub fn assd(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(SurfaceDistances::compute(a, b)?.assd())
}

/// Foreground volume in millilitres.
pub fn volume_ml(mask: &Mask) -> f64 {
    mask.count() as f64 * mask.grid().voxel_volume_mm3() / 1000.0
}

/// Absolute volume difference in mL.
pub fn vd(a: &Mask, b: &Mask) -> Result<f64> {
    same_grid(a, b, "volume difference")?;
    Ok((volume_ml(a) - volume_ml(b)).abs())
}

/// Volume difference as a percentage of the body volume.
pub fn rvd(a: &Mask, b: &Mask, body: &Mask) -> Result<f64> {
    same_grid(a, body, "relative volume difference")?;
    let vd = vd(a, b)?;
    let body_ml = volume_ml(body);
    if body_ml == 0.0 {
        return Err(Error::DivisionByZero("body mask has zero volume".into()));
    }
    Ok(100.0 * vd / body_ml)
}

/// All five metrics for one prediction against its reference.
pub fn evaluate_case(pred: &Mask, gt: &Mask, body: &Mask, case_id: &str) -> Result<MetricsRecord> {
    same_grid(pred, gt, "prediction vs reference")?;
    same_grid(pred, body, "prediction vs body")?;
    let surf = SurfaceDistances::compute(pred, gt)?;
    Ok(MetricsRecord {
        case_id: case_id.to_string(),
        dice: dice(pred, gt)?,
        hausdorff_mm: surf.hausdorff(),
        assd_mm: surf.assd(),
        vd_ml: vd(pred, gt)?,
        rvd_percent: rvd(pred, gt, body)?,
        correction_time_s: None,
    })
}
