//! Deep clustering laboratory: DEC, IDEC and DCN on a from-scratch
//! autoencoder, with BRB (soft weight resets + reclustering + centroid
//! momentum resets), the full evaluation metric suite, and a reproducible
//! experiment harness.

pub mod brb;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hungarian;
pub mod log;
pub mod metrics;
pub mod net;
pub mod numerics;
pub mod objectives;
pub mod optim;
pub mod recluster;
pub mod rng;

pub use error::{Error, Result};
pub use numerics::DenseMatrix;
pub use rng::SeededRng;
