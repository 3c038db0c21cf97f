//! Cold-start active-learning selection for pools of 3D volumes.
//!
//! Given a fully unlabeled pool of volumetric images and an annotation budget
//! of `m` volumes, this crate implements six selection strategies (random,
//! uncertainty ranking on a proxy task with entropy or variance, and the
//! cluster-based ALPS / CALR / TypiClust selectors), the preprocessing and
//! feature-extraction pipelines they feed on, segmentation quality metrics
//! (Dice, HD95), and a deterministic desk-scale benchmark harness that
//! compares all strategies on synthetic pools.
//!
//! Everything is reproducible: all randomness flows through the seeded
//! [`rng::SplitMix64`] generator, floating-point reductions run in a fixed
//! order, and repeated runs produce byte-identical artifacts.

pub mod bench;
pub mod clustering;
pub mod error;
pub mod features;
pub mod metrics;
pub(crate) mod numeric;
pub mod rng;
pub mod selectors;
pub mod uncertainty;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{RoiBox, RoiMode, VolumeGrid, VoxelKind};
