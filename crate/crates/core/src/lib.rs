//! Exact-equivariance tooling for p4/p4m group convolutional networks.
//!
//! A strided layer only commutes with quarter turns and mirrors when its
//! padded input side `i`, kernel `k` and stride `s` satisfy
//! `(i + 2p - k) mod s = 0`. This crate checks that condition statically
//! ([`analyzer`]), proves it cell by cell against a brute-force index oracle
//! ([`metrics`]), and measures what happens numerically in real networks
//! built from [`layers`].

pub mod analyzer;
pub mod cli;
pub mod config;
pub mod error;
pub mod group;
pub mod layers;
pub mod metrics;
pub mod report;
pub mod tensor;

pub use analyzer::{analyze, check_layer, output_size, suggest_input_sizes, AnalysisReport, LayerShapeSpec};
pub use config::{builtin, ArchitectureConfig};
pub use error::{Error, Result};
pub use group::{act_full, act_spatial, GroupElement, GroupKind};
pub use layers::{forward, LayerKind, Network, WeightInit};
pub use metrics::{equivariance_error, mirror_commutation, rotation_commutation, EquivarianceProfile};
pub use tensor::{FeatureMap, FilterBank};
