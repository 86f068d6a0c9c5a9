//! Random spanning trees as spectral sparsifiers: exact leverage scores,
//! Wilson sampling, normalized pencil certification, Strongly Rayleigh
//! martingale diagnostics, and the experiment harness built on them.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod graph;
pub mod leverage;
pub mod matrix;
pub mod spectral;
pub mod srdiag;
pub mod treesample;

pub use error::{Error, Result};
pub use graph::{laplacian, Construction, DisjointSets, Edge, IncidenceRow, WeightedGraph};
pub use leverage::{
    conditional_marginals, effective_resistance, laplacian_pinv, leverage_scores, ContractionState,
    LeverageProfile,
};
pub use matrix::Matrix;
pub use spectral::{
    eig_sym, normalized_pencil, psd_leq, NormalizedFrame, PencilExtremes, PsdOrderVerdict,
};
pub use treesample::{
    enumerate_trees, reweight_tree, sample_tree_wilson, SpanningTree, TreeDistributionTable,
    TreeRecord, TreeRng, WeightMode, WilsonSampler,
};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
