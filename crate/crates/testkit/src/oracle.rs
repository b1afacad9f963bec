//! Definition-level reference implementations.

use std::collections::VecDeque;

use volseg_core::{Grid, Mask};

fn in_grid(dims: [usize; 3], p: [i64; 3]) -> bool {
    (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < dims[a])
}

fn at(m: &Mask, p: [i64; 3]) -> bool {
    in_grid(m.grid().dims(), p) && m.get(p[0] as usize, p[1] as usize, p[2] as usize)
}

fn voxels(m: &Mask) -> Vec<[i64; 3]> {
    let [nx, ny, nz] = m.grid().dims();
    let mut out = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if m.get(i, j, k) {
                    out.push([i as i64, j as i64, k as i64]);
                }
            }
        }
    }
    out
}

pub fn count(m: &Mask) -> usize {
    voxels(m).len()
}

pub fn dice(a: &Mask, b: &Mask) -> f64 {
    let (va, vb) = (voxels(a), voxels(b));
    if va.len() + vb.len() == 0 {
        return 1.0;
    }
    let inter = va.iter().filter(|p| at(b, **p)).count();
    2.0 * inter as f64 / (va.len() + vb.len()) as f64
}

pub fn volume_ml(m: &Mask) -> f64 {
    let s = m.grid().spacing();
    count(m) as f64 * (s[0] * s[1] * s[2]) / 1000.0
}

pub fn vd_ml(a: &Mask, b: &Mask) -> f64 {
    (volume_ml(a) - volume_ml(b)).abs()
}

const FACES: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// Foreground voxels with a face neighbour that is background or off-grid.
pub fn surface(m: &Mask) -> Vec<[i64; 3]> {
    voxels(m)
        .into_iter()
        .filter(|p| FACES.iter().any(|d| !at(m, [p[0] + d[0], p[1] + d[1], p[2] + d[2]])))
        .collect()
}

pub fn sq_dist(p: [i64; 3], q: [i64; 3], s: [f64; 3]) -> f64 {
    (0..3).map(|a| ((p[a] - q[a]) as f64 * s[a]).powi(2)).sum()
}

/// Nearest distance from each point of `from` to the set `to`, in mm.
pub fn directed(from: &[[i64; 3]], to: &[[i64; 3]], s: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|&p| to.iter().map(|&q| sq_dist(p, q, s)).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

pub fn hausdorff(a: &Mask, b: &Mask) -> f64 {
    let s = a.grid().spacing();
    let (sa, sb) = (surface(a), surface(b));
    directed(&sa, &sb, s)
        .into_iter()
        .chain(directed(&sb, &sa, s))
        .fold(0.0, f64::max)
}

pub fn assd(a: &Mask, b: &Mask) -> f64 {
    let s = a.grid().spacing();
    let (sa, sb) = (surface(a), surface(b));
    let d: Vec<f64> = directed(&sa, &sb, s).into_iter().chain(directed(&sb, &sa, s)).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Squared weighted distance from every voxel to the nearest foreground
/// voxel by exhaustive scan.
pub fn sq_edt(m: &Mask, weights: [f64; 3]) -> Vec<f64> {
    let fg = voxels(m);
    let g = m.grid();
    (0..g.len())
        .map(|idx| {
            let c = g.coords(idx).map(|v| v as i64);
            fg.iter()
                .map(|q| (0..3).map(|a| weights[a] * ((c[a] - q[a]) as f64).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn neighbourhood(connectivity: usize) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nonzero = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
                let ok = match connectivity {
                    6 => nonzero == 1,
                    18 => nonzero == 1 || nonzero == 2,
                    26 => nonzero >= 1,
                    _ => panic!("connectivity {connectivity}"),
                };
                if ok {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// BFS flood fill; labels are `1..` in first-seen scan order.
pub fn flood_fill(m: &Mask, connectivity: usize) -> (Vec<u32>, Vec<usize>) {
    let g = m.grid();
    let dims = g.dims();
    let nb = neighbourhood(connectivity);
    let mut labels = vec![0u32; g.len()];
    let mut sizes = Vec::new();
    for start in 0..g.len() {
        if !m.data()[start] || labels[start] != 0 {
            continue;
        }
        sizes.push(0usize);
        let l = sizes.len() as u32;
        labels[start] = l;
        let mut q = VecDeque::from([start]);
        while let Some(idx) = q.pop_front() {
            sizes[l as usize - 1] += 1;
            let c = g.coords(idx).map(|v| v as i64);
            for d in &nb {
                let p = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
                if !in_grid(dims, p) {
                    continue;
                }
                let n = g.index(p[0] as usize, p[1] as usize, p[2] as usize);
                if m.data()[n] && labels[n] == 0 {
                    labels[n] = l;
                    q.push_back(n);
                }
            }
        }
    }
    (labels, sizes)
}

/// Offsets `d` with `Σ (d_a s_a)² ≤ r²`.
pub fn ball(radius_mm: f64, s: [f64; 3]) -> Vec<[i64; 3]> {
    let k = s.map(|v| (radius_mm / v).ceil() as i64);
    let mut out = Vec::new();
    for dz in -k[2]..=k[2] {
        for dy in -k[1]..=k[1] {
            for dx in -k[0]..=k[0] {
                if sq_dist([dx, dy, dz], [0; 3], s) <= radius_mm * radius_mm {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Dilation as a union of translates; off-grid voxels count as background.
pub fn dilate(m: &Mask, se: &[[i64; 3]]) -> Mask {
    let g = m.grid().clone();
    Mask::from_fn(g, |i, j, k| {
        se.iter().any(|d| at(m, [i as i64 - d[0], j as i64 - d[1], k as i64 - d[2]]))
    })
}

/// Erosion requiring every in-grid translate to be foreground.
pub fn erode(m: &Mask, se: &[[i64; 3]]) -> Mask {
    let g = m.grid().clone();
    let dims = g.dims();
    Mask::from_fn(g, |i, j, k| {
        se.iter().all(|d| {
            let p = [i as i64 + d[0], j as i64 + d[1], k as i64 + d[2]];
            !in_grid(dims, p) || at(m, p)
        })
    })
}

/// Nearest-neighbour resampling for axis-aligned source grids, solving
/// world → index per axis.
pub fn resample_axis_aligned(src: &Mask, target: &Grid) -> Mask {
    let sg = src.grid();
    let (o, s) = (sg.affine().origin(), sg.spacing());
    Mask::from_fn(target.clone(), |i, j, k| {
        let w = target.world(i, j, k);
        let p = [0, 1, 2].map(|a| ((w[a] - o[a]) / s[a]).round() as i64);
        at(src, p)
    })
}

/// Otsu by exhaustive sweep: every split of the 256-bin histogram is
/// scored by between-class variance, directly from the class moments.
/// Returns the winning threshold (lower edge of the first upper bin).
pub fn otsu_sweep(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w = (hi - lo) / 256.0;
    let bin = |v: f64| (((v - lo) / w) as usize).min(255);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for t in 0..255 {
        let (mut n0, mut n1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0);
        for &v in values {
            let b = bin(v) as f64;
            if bin(v) <= t {
                n0 += 1.0;
                s0 += b;
            } else {
                n1 += 1.0;
                s1 += b;
            }
        }
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let n = n0 + n1;
        let score = (n0 / n) * (n1 / n) * (s0 / n0 - s1 / n1).powi(2);
        if score > best.0 * (1.0 + 1e-12) {
            best = (score, t);
        }
    }
    lo + (best.1 + 1) as f64 * w
}

/// `P(T ≤ t)` for 4 degrees of freedom by composite Simpson integration of
/// the density `0.375 (1 + u²/4)^(-5/2)` over `[0, |t|]`.
pub fn t4_cdf_simpson(t: f64) -> f64 {
    let f = |u: f64| 0.375 * (1.0 + u * u / 4.0).powf(-2.5);
    let (a, b) = (0.0, t.abs());
    let n = 20_000;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = acc * h / 3.0;
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}
