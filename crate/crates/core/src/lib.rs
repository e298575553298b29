//! Symmetry discovery by flow matching on matrix Lie groups.
//!
//! A velocity network is trained to transport a prior over a large
//! hypothesis group (SO(2), SO(3), GL(2,ℝ)⁺, GL(2,ℂ)) onto the subgroup that
//! leaves a point-cloud dataset invariant. Sampling the learned flow yields
//! group elements concentrated on the discovered symmetries.

pub mod analysis;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod kv;
pub mod liegroup;
pub mod net;
pub mod rng;

pub use error::{Error, Result};
pub use datasets::{Dataset, DatasetSpec, PointCloud};
pub use liegroup::{AlgebraElement, GroupElement, GroupKind, GroupSpec};
