//! Exact Euclidean distance transform on anisotropic grids.
//!
//! Squared distances are separable: one 1-D pass per axis computes the
//! lower envelope of parabolas `f(p) + w·(q − p)²`, where `w` is the squared
//! spacing of that axis, in linear time per line (Felzenszwalb and
//! Huttenlocher). When the weights are integers every value is an exact
//! integer in `f64`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Mask;

/// Working buffers for one line.
#[derive(Default)]
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
    line: Vec<f64>,
}

impl Envelope {
    /// `out[q] = min_p f[p] + w (q - p)²` over finite `f[p]`.
    fn run(&mut self, f: &[f64], w: f64, out: &mut [f64]) {
        let n = f.len();
        self.sites.clear();
        self.bounds.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            let qf = q as f64;
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let pf = p as f64;
                let s = ((fq + w * qf * qf) - (f[p] + w * pf * pf)) / (2.0 * w * (qf - pf));
                if s <= *self.bounds.last().expect("parallel to sites") {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            out[..n].fill(f64::INFINITY);
            return;
        }
        self.bounds.push(f64::INFINITY);
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate().take(n) {
            let qf = q as f64;
            while self.bounds[k + 1] < qf {
                k += 1;
            }
            let p = self.sites[k];
            let d = qf - p as f64;
            *o = w * d * d + f[p];
        }
    }
}

fn pass_x(data: &mut [f64], nx: usize, w: f64) {
    data.par_chunks_mut(nx).for_each_init(Envelope::default, |env, row| {
        let mut line = std::mem::take(&mut env.line);
        line.clear();
        line.extend_from_slice(row);
        env.run(&line, w, row);
        env.line = line;
    });
}

fn pass_y(data: &mut [f64], nx: usize, ny: usize, w: f64) {
    data.par_chunks_mut(nx * ny).for_each_init(
        || (Envelope::default(), vec![0.0; ny], vec![0.0; ny]),
        |(env, col, res), slab| {
            for i in 0..nx {
                for j in 0..ny {
                    col[j] = slab[i + nx * j];
                }
                env.run(col, w, res);
                for j in 0..ny {
                    slab[i + nx * j] = res[j];
                }
            }
        },
    );
}

fn pass_z(data: &mut [f64], plane: usize, nz: usize, w: f64) {
    let mut columns = vec![0.0; plane * nz];
    {
        let src: &[f64] = data;
        columns.par_chunks_mut(nz).enumerate().for_each_init(
            || (Envelope::default(), vec![0.0; nz]),
            |(env, col), (c, out)| {
                for (z, v) in col.iter_mut().enumerate() {
                    *v = src[c + plane * z];
                }
                env.run(col, w, out);
            },
        );
    }
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for (c, v) in slab.iter_mut().enumerate() {
            *v = columns[c * nz + z];
        }
    });
}

/// Squared distance from every voxel to the nearest foreground voxel,
/// with per-axis squared step `weights`.
pub fn squared_distance_weighted(mask: &Mask, weights: [f64; 3]) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("distance transform of an empty mask"));
    }
    let [nx, ny, nz] = mask.grid().dims();
    let mut data: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v { 0.0 } else { f64::INFINITY })
        .collect();
    pass_x(&mut data, nx, weights[0]);
    pass_y(&mut data, nx, ny, weights[1]);
    pass_z(&mut data, nx * ny, nz, weights[2]);
    Ok(data)
}

/// Squared distance in mm² to the nearest foreground voxel centre.
pub fn squared_distance_transform(mask: &Mask) -> Result<Vec<f64>> {
    let s = mask.grid().spacing();
    squared_distance_weighted(mask, [s[0] * s[0], s[1] * s[1], s[2] * s[2]])
}

/// Distance in mm to the nearest foreground voxel centre; 0 on foreground.
pub fn distance_transform(mask: &Mask) -> Result<Vec<f64>> {
    let mut d = squared_distance_transform(mask)?;
    d.par_iter_mut().for_each(|v| *v = v.sqrt());
    Ok(d)
}
