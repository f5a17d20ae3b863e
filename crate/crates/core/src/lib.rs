//! Social influence prediction on ego subgraphs: a graph autoencoder trained
//! jointly with a GAT/GCN classifier, with VGAE-driven edge augmentation at
//! train and test time.

pub mod augment;
pub mod autoenc;
pub mod error;
pub mod fit;
pub mod gnn;
pub mod graph;
pub mod pipeline;
pub mod synth;

pub use error::{AugInfError, Result};
