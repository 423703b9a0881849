//! Graph storage, degree-aware preprocessing, generators, feature storage
//! and the run-length codec used for sparse input features.

mod csr;
mod features;
pub mod generate;
pub mod io;
mod order;
mod rlc;

pub use csr::{build_csr, Graph};
pub use features::{relative_error, FeatureMatrix};
pub use order::{degree_sort, degree_sort_with_edges, VertexOrder, DEFAULT_DEGREE_BINS};
pub use rlc::{rlc_decode, rlc_encode, RlcRow};
