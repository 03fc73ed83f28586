//! Method-name recommendation from caller-callee relationships.
//!
//! The pipeline has two phases. The training phase scans a source corpus,
//! lexically extracts method definitions together with the names invoked in
//! their bodies, aggregates them into a directed graph over method names, and
//! trains one embedding vector per name so that each vector approximates the
//! arithmetic mean of its callees' vectors while keeping norms near one. The
//! recommendation phase embeds a query method body as the mean of its callees'
//! stored vectors and returns the nearest names by cosine similarity.
//!
//! Modules follow the pipeline stages:
//!
//! - [`corpus`]: source scanning, lexical method/callee extraction, cleansing
//! - [`lexicon`]: identifier splitting and verb/noun tagging
//! - [`acg`]: the aggregated call graph over method names
//! - [`embed`]: embedding initialization, loss/gradient, SGD training, table I/O
//! - [`recommend`]: query embedding and top-k cosine search
//! - [`eval`]: k-fold cross-validation harness and synthetic corpus generator

pub mod acg;
pub mod corpus;
pub mod embed;
mod error;
pub mod eval;
pub mod lexicon;
pub mod recommend;

pub use error::{Error, Result};
