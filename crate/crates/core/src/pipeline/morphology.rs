//! Binary morphology with a spacing-aware ellipsoidal structuring element.
//!
//! The element is the world-space ball of a given radius rasterized on the
//! voxel lattice: offset `(di, dj, dk)` belongs to it when
//! `(di·sx)² + (dj·sy)² + (dk·sz)² ≤ r²`. Each `(dj, dk)` slice of the ball
//! is a contiguous run `-w..=w` along x, so erosion and dilation reduce to
//! windowed counts over prefix sums of x-rows.
//!
//! Voxels outside the grid are neutral: dilation never writes them and
//! erosion does not test them. With that convention opening is always a
//! subset of its input and closing always a superset.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Open,
    Close,
}

impl fmt::Display for MorphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MorphOp::Open => "open",
            MorphOp::Close => "close",
        })
    }
}

/// One morphology step, written `open:2.5` / `close:1.25` in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphStep {
    pub op: MorphOp,
    pub radius_mm: f64,
}

impl FromStr for MorphStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Params(format!("morphology step must look like open:2.5 or close:1.25, got '{s}'"));
        let (op, radius) = s.trim().split_once(':').ok_or_else(bad)?;
        let op = match op.trim().to_ascii_lowercase().as_str() {
            "open" => MorphOp::Open,
            "close" => MorphOp::Close,
            _ => return Err(bad()),
        };
        let radius_mm: f64 = radius.trim().parse().map_err(|_| bad())?;
        if !(radius_mm >= 0.0 && radius_mm.is_finite()) {
            return Err(Error::Params(format!("morphology radius must be >= 0, got {radius_mm}")));
        }
        Ok(Self { op, radius_mm })
    }
}

impl fmt::Display for MorphStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.op, self.radius_mm)
    }
}

/// Rasterized ball, stored as x-runs: `(dj, dk, w)` covers `di ∈ -w..=w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    runs: Vec<(i64, i64, usize)>,
}

impl StructuringElement {
    pub fn ball(radius_mm: f64, spacing: [f64; 3]) -> Self {
        let [sx, sy, sz] = spacing;
        let r2 = radius_mm * radius_mm;
        let inside = |di: i64, dj: i64, dk: i64| {
            let (x, y, z) = (di as f64 * sx, dj as f64 * sy, dk as f64 * sz);
            x * x + y * y + z * z <= r2
        };
        let ky = (radius_mm / sy).floor() as i64 + 1;
        let kz = (radius_mm / sz).floor() as i64 + 1;
        let mut runs = Vec::new();
        for dk in -kz..=kz {
            for dj in -ky..=ky {
                if !inside(0, dj, dk) {
                    continue;
                }
                let mut w = 0;
                while inside(w + 1, dj, dk) {
                    w += 1;
                }
                runs.push((dj, dk, w as usize));
            }
        }
        Self { runs }
    }

    /// All offsets `(di, dj, dk)` in the element.
    pub fn offsets(&self) -> Vec<[i64; 3]> {
        self.runs
            .iter()
            .flat_map(|&(dj, dk, w)| (-(w as i64)..=w as i64).map(move |di| [di, dj, dk]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.runs.iter().map(|r| 2 * r.2 + 1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn is_point(&self) -> bool {
        self.len() == 1
    }
}

/// Per-row inclusive prefix counts: `prefix[row * (nx + 1) + i]` is the number
/// of foreground voxels in `0..i` of that row.
fn row_prefix(mask: &Mask) -> Vec<u32> {
    let nx = mask.grid().dims()[0];
    let mut prefix = vec![0u32; mask.data().len() / nx * (nx + 1)];
    prefix
        .par_chunks_mut(nx + 1)
        .zip(mask.data().par_chunks(nx))
        .for_each(|(p, row)| {
            for (i, &v) in row.iter().enumerate() {
                p[i + 1] = p[i] + v as u32;
            }
        });
    prefix
}

fn apply(mask: &Mask, se: &StructuringElement, erode: bool) -> Mask {
    let [nx, ny, nz] = mask.grid().dims();
    let prefix = row_prefix(mask);
    let mut out = vec![false; mask.data().len()];

    out.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
        for j in 0..ny {
            let row_out = &mut slab[j * nx..(j + 1) * nx];
            row_out.fill(erode);
            for &(dj, dk, w) in &se.runs {
                let (y, z) = (j as i64 + dj, k as i64 + dk);
                if y < 0 || z < 0 || y >= ny as i64 || z >= nz as i64 {
                    continue;
                }
                let p = &prefix[(y as usize + ny * z as usize) * (nx + 1)..][..nx + 1];
                for (i, o) in row_out.iter_mut().enumerate() {
                    let lo = i.saturating_sub(w);
                    let hi = (i + w).min(nx - 1);
                    let hits = p[hi + 1] - p[lo];
                    if erode {
                        *o &= hits as usize == hi + 1 - lo;
                    } else {
                        *o |= hits > 0;
                    }
                }
            }
        }
    });

    Mask::from_data(mask.grid().clone(), out).expect("same length")
}

pub fn dilate(mask: &Mask, se: &StructuringElement) -> Mask {
    apply(mask, se, false)
}

pub fn erode(mask: &Mask, se: &StructuringElement) -> Mask {
    apply(mask, se, true)
}

pub fn open(mask: &Mask, se: &StructuringElement) -> Mask {
    dilate(&erode(mask, se), se)
}

pub fn close(mask: &Mask, se: &StructuringElement) -> Mask {
    erode(&dilate(mask, se), se)
}

/// Opening or closing with a ball of `radius_mm`; radius 0 is the identity.
pub fn morph(mask: &Mask, op: MorphOp, radius_mm: f64) -> Result<Mask> {
    if !(radius_mm >= 0.0 && radius_mm.is_finite()) {
        return Err(Error::Params(format!("morphology radius must be >= 0, got {radius_mm}")));
    }
    let se = StructuringElement::ball(radius_mm, mask.grid().spacing());
    if se.is_point() {
        return Ok(mask.clone());
    }
    Ok(match op {
        MorphOp::Open => open(mask, &se),
        MorphOp::Close => close(mask, &se),
    })
}
