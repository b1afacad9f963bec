//! Semi-automatic fat segmentation of Dixon MRI volumes and the tooling
//! to evaluate it: NIfTI-1 I/O, cross-scan mask mapping, thresholding with
//! morphology and connected-component cleanup, surface and volume metrics,
//! cohort statistics, and a synthetic phantom generator with known ground
//! truth.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nifti;
pub mod phantom;
pub mod pipeline;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{AffineTransform, VoxelBox};
pub use volume::{Grid, Mask, Volume};
