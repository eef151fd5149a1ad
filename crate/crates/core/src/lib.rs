//! Approximate nearest neighbor search in Euclidean space with no false
//! negatives.
//!
//! Every stored point within radius `R` of a query is returned, nothing
//! farther than `c·R` is. The index reduces the `d`-dimensional problem to a
//! set of max-l₂ subproblems over `(ℝᵏ)ᴸ` by way of scaled blocks of random
//! orthonormal bases ([`linalg`]), and answers each subproblem with a
//! rounding-based LSH table whose buckets are expanded at insert time
//! ([`lsh`]). [`reduction`] wires the two layers together and plans the
//! parameters; [`oracle`] is the brute-force ground truth.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which is what the tolerances in the tests assume.

pub mod error;
pub mod linalg;
pub mod lsh;
pub mod oracle;
pub mod reduction;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector = linalg::Vector<f64>;
pub type Basis = linalg::OrthonormalBasis<f64>;
pub type Block = linalg::BlockMapping<f64>;
pub type Family = linalg::MappingFamily<f64>;
pub type Point = lsh::ProductPoint<f64>;
pub type LeafIndex = lsh::MaxL2Index<f64>;
pub type Index = reduction::NnwfnIndex<f64>;
pub type SingleStage = reduction::SingleStageIndex<f64>;
pub type Outcome = reduction::QueryResult<f64>;
pub type Oracle = oracle::OracleResult<f64>;

pub type Index32 = reduction::NnwfnIndex<f32>;
pub type Basis32 = linalg::OrthonormalBasis<f32>;
