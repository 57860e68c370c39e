//! Object co-occurrence graphs, GNN encoders, cross-attention fusion and
//! per-object group statistics for vlog classification.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod fusion;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod model;
pub mod par;
pub mod stats;
pub mod task;
pub mod train;

pub use error::{Error, Result};
