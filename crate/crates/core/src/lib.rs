//! Cycle-level simulator of a single-engine GNN inference accelerator.
//!
//! The crate has two halves that share the same data types:
//!
//! * a golden functional model ([`reference`]) that evaluates GCN, GraphSAGE,
//!   GAT and GINConv layers exactly, and
//! * a timing simulator ([`weighting`], [`aggregation`], [`cache`],
//!   [`memory`]) that executes the same layers through the accelerator's
//!   dataflow while counting cycles, DRAM traffic and energy.
//!
//! Numeric code is generic over [`Scalar`]; the golden model is normally run
//! in `f64` and the simulator's datapath in `f32`. Aliases for both are
//! exported at the crate root.

#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod aggregation;
pub mod cache;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod memory;
pub mod reference;
pub mod report;
pub mod scalar;
pub mod sim;
pub mod stats;
pub mod weighting;

pub use config::{AcceleratorConfig, CacheConfig, MacProfile, SfuConfig};
pub use error::{Error, Result};
pub use graph::{FeatureMatrix, Graph, RlcRow, VertexOrder};
pub use matrix::Matrix;
pub use reference::{Activation, Aggregator, GnnKind, LayerSpec, SampleStream};
pub use scalar::Scalar;
pub use stats::PhaseStats;

/// Single-precision feature matrix, the simulator datapath type.
pub type FeatureMatrix32 = FeatureMatrix<f32>;
/// Double-precision feature matrix, the golden-model type.
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type LayerSpec32 = LayerSpec<f32>;
pub type LayerSpec64 = LayerSpec<f64>;
pub type RlcRow32 = RlcRow<f32>;
pub type RlcRow64 = RlcRow<f64>;
