//! Connected-component labeling in 3D and small-component removal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Mask;

/// Voxel adjacency: shared faces (6), faces or edges (18), or any
/// contact including corners (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Self::Six),
            18 => Ok(Self::Eighteen),
            26 => Ok(Self::TwentySix),
            _ => Err(Error::Params(format!("connectivity must be 6, 18 or 26, got {n}"))),
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Self::Six => 6,
            Self::Eighteen => 18,
            Self::TwentySix => 26,
        }
    }

    /// Whether two voxels at offset `(dx, dy, dz)` (each in -1..=1) touch.
    pub fn adjacent(self, dx: i64, dy: i64, dz: i64) -> bool {
        let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
        nonzero > 0
            && match self {
                Self::Six => nonzero == 1,
                Self::Eighteen => nonzero <= 2,
                Self::TwentySix => true,
            }
    }

    /// All neighbour offsets.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if self.adjacent(dx, dy, dz) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Neighbours that precede a voxel in x-fastest scan order.
    fn causal_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        Self::from_count(n)
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.count()
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::Params(format!("connectivity must be 6, 18 or 26, got '{s}'")))?;
        Self::from_count(n)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

/// Component labels per voxel (`0` is background, components are
/// `1..=n` in order of first appearance in the x-fastest scan) and their
/// voxel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl LabeledComponents {
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// `sizes()[l - 1]` is the voxel count of label `l`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, merge) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[merge as usize] = keep;
        keep
    }
}

/// Two-pass union-find labeling.
pub fn label_components(mask: &Mask, connectivity: Connectivity) -> LabeledComponents {
    const NONE: u32 = u32::MAX;

    let [nx, ny, nz] = mask.grid().dims();
    let data = mask.data();
    let causal = connectivity.causal_offsets();
    let mut provisional = vec![NONE; data.len()];
    let mut sets = DisjointSet::new();

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * (j + ny * k);
                if !data[idx] {
                    continue;
                }
                let mut current = NONE;
                for &[dx, dy, dz] in &causal {
                    let (x, y, z) = (i as i64 + dx, j as i64 + dy, k as i64 + dz);
                    if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 {
                        continue;
                    }
                    let n = x as usize + nx * (y as usize + ny * z as usize);
                    let l = provisional[n];
                    if l == NONE {
                        continue;
                    }
                    current = if current == NONE { sets.find(l) } else { sets.union(current, l) };
                }
                provisional[idx] = if current == NONE { sets.make() } else { current };
            }
        }
    }

    let mut relabel = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let labels = provisional
        .into_iter()
        .map(|p| {
            if p == NONE {
                return 0;
            }
            let root = sets.find(p) as usize;
            if relabel[root] == 0 {
                sizes.push(0);
                relabel[root] = sizes.len() as u32;
            }
            let l = relabel[root];
            sizes[l as usize - 1] += 1;
            l
        })
        .collect();

    LabeledComponents { labels, sizes }
}

/// Keep only components of at least `min_voxels` voxels.
pub fn filter_small_components(mask: &Mask, min_voxels: usize, connectivity: Connectivity) -> Result<Mask> {
    if min_voxels == 0 {
        return Err(Error::Params("min_voxels must be >= 1".into()));
    }
    if min_voxels == 1 {
        return Ok(mask.clone());
    }
    let comps = label_components(mask, connectivity);
    let keep: Vec<bool> = comps.sizes().iter().map(|&s| s >= min_voxels).collect();
    let data = comps
        .labels()
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    Mask::from_data(mask.grid().clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn grid(n: usize) -> Grid {
        Grid::axis_aligned([n, n, n], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn neighbourhood_sizes() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::Eighteen.offsets().len(), 18);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
        assert_eq!(Connectivity::TwentySix.causal_offsets().len(), 13);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let comps = label_components(&Mask::empty(grid(4)), Connectivity::TwentySix);
        assert_eq!(comps.count(), 0);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let mut m = Mask::empty(grid(3));
        m.set(0, 0, 0, true);
        m.set(1, 1, 1, true);
        assert_eq!(label_components(&m, Connectivity::Six).count(), 2);
        assert_eq!(label_components(&m, Connectivity::Eighteen).count(), 2);
        assert_eq!(label_components(&m, Connectivity::TwentySix).count(), 1);
    }

    #[test]
    fn labels_follow_scan_order() {
        // U shape: the two arms meet only at the bottom row, later in scan order
        let mut m = Mask::empty(Grid::axis_aligned([3, 3, 1], [1.0; 3], [0.0; 3]).unwrap());
        for (i, j) in [(0, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2)] {
            m.set(i, j, 0, true);
        }
        m.set(1, 0, 0, false);
        let c = label_components(&m, Connectivity::Six);
        assert_eq!(c.count(), 1);
        assert_eq!(c.sizes(), &[7]);

        let mut m = Mask::empty(Grid::axis_aligned([5, 1, 1], [1.0; 3], [0.0; 3]).unwrap());
        m.set(4, 0, 0, true);
        m.set(0, 0, 0, true);
        m.set(1, 0, 0, true);
        let c = label_components(&m, Connectivity::Six);
        assert_eq!(c.labels(), &[1, 1, 0, 0, 2]);
        assert_eq!(c.sizes(), &[2, 1]);
    }

    #[test]
    fn connectivity_parses() {
        assert_eq!("18".parse::<Connectivity>().unwrap(), Connectivity::Eighteen);
        assert!("8".parse::<Connectivity>().is_err());
    }

    #[test]
    fn min_voxels_one_is_identity_and_zero_rejected() {
        let mut m = Mask::empty(grid(4));
        m.set(1, 1, 1, true);
        assert_eq!(filter_small_components(&m, 1, Connectivity::Six).unwrap(), m);
        assert!(filter_small_components(&m, 0, Connectivity::Six).is_err());
    }
}
