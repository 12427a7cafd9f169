//! Clustering of multi-type relational data by non-negative matrix
//! tri-factorization regularized with both intra-type (kNN) and inter-type
//! (pNN) neighborhood graphs.
//!
//! Pipeline: [`data`] loads or generates the relation matrices, [`graphs`]
//! builds the regularizer, [`solver`] runs the multiplicative updates and
//! [`metrics`] scores the resulting labels.

pub mod data;
pub mod error;
pub mod graphs;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod solver;

pub use error::{Error, Result};

/// Sub-seed streams derived from a single user seed.
pub mod seeds {
    pub const GENERATOR: u64 = 0;
    pub const KMEANS_INIT: u64 = 1;
    pub const KMEANS_EXTRACT: u64 = 2;

    /// SplitMix64 mix of `(root, stream, index)`.
    pub fn derive(root: u64, stream: u64, index: u64) -> u64 {
        let mut z = root
            ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
