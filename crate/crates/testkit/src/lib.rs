//! Fixtures and brute-force reference implementations shared by the test
//! suites. Everything here favours obviousness over speed.

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volseg_core::{Grid, Mask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(dims: [usize; 3], spacing: [f64; 3]) -> Grid {
    Grid::axis_aligned(dims, spacing, [0.0; 3]).expect("valid test grid")
}

/// Spacings whose squares are exact binary fractions.
pub const EXACT_SPACINGS: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 1.0, 2.0], [1.25, 1.25, 1.5]];

/// Independent voxels at the given density.
pub fn noise_mask(rng: &mut impl Rng, grid: &Grid, density: f64) -> Mask {
    Mask::from_fn(grid.clone(), |_, _, _| rng.random_bool(density))
}

/// Union of a few random axis-aligned boxes and ellipsoids.
pub fn blob_mask(rng: &mut impl Rng, grid: &Grid) -> Mask {
    let dims = grid.dims();
    let shapes: Vec<(bool, [f64; 3], [f64; 3])> = (0..rng.random_range(1..=4))
        .map(|_| {
            let c = dims.map(|n| rng.random_range(0.0..n as f64));
            let r = dims.map(|n| rng.random_range(0.5..(n as f64 / 2.0).max(1.0)));
            (rng.random_bool(0.5), c, r)
        })
        .collect();
    Mask::from_fn(grid.clone(), |i, j, k| {
        let p = [i as f64, j as f64, k as f64];
        shapes.iter().any(|(is_box, c, r)| {
            if *is_box {
                (0..3).all(|a| (p[a] - c[a]).abs() <= r[a])
            } else {
                (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
            }
        })
    })
}

/// Flip each voxel of `m` with probability `p`.
pub fn perturb(rng: &mut impl Rng, m: &Mask, p: f64) -> Mask {
    let data = m.data().iter().map(|&v| v ^ rng.random_bool(p)).collect();
    Mask::from_data(m.grid().clone(), data).expect("same grid")
}

fn ensure_nonempty(rng: &mut impl Rng, m: &mut Mask) {
    if m.is_empty() {
        let [nx, ny, nz] = m.grid().dims();
        let (i, j, k) = (rng.random_range(0..nx), rng.random_range(0..ny), rng.random_range(0..nz));
        m.set(i, j, k, true);
    }
}

pub const SUITE_SIZE: usize = 200;
pub const SUITE_SEED: u64 = 0x5eed_0001;

/// The fixed randomized suite of nonempty mask pairs on grids up to 12³.
/// Spacing cycles through [`EXACT_SPACINGS`].
pub fn mask_pair_suite() -> Vec<(Mask, Mask)> {
    let mut r = rng(SUITE_SEED);
    (0..SUITE_SIZE)
        .map(|n| {
            let dims = [0; 3].map(|_| r.random_range(1..=12usize));
            let g = grid(dims, EXACT_SPACINGS[n % EXACT_SPACINGS.len()]);
            let (mut a, mut b) = match n % 4 {
                0 => (noise_mask(&mut r, &g, 0.3), noise_mask(&mut r, &g, 0.3)),
                1 => {
                    let a = blob_mask(&mut r, &g);
                    let b = perturb(&mut r, &a, 0.05);
                    (a, b)
                }
                2 => (blob_mask(&mut r, &g), blob_mask(&mut r, &g)),
                _ => {
                    let d = r.random_range(0.02..0.9);
                    (noise_mask(&mut r, &g, d), blob_mask(&mut r, &g))
                }
            };
            ensure_nonempty(&mut r, &mut a);
            ensure_nonempty(&mut r, &mut b);
            (a, b)
        })
        .collect()
}
