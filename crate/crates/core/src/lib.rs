//! Few-shot event detection: episodic N+1-way K-shot models (prototypical,
//! attention-prototypical, relation and matching networks) over CNN, LSTM
//! and GCN sentence encoders, with intra- and inter-cluster auxiliary losses.

pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod data;
pub mod embedding;
pub mod encoders;
pub mod error;
pub mod experiments;
pub mod gradcheck;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod prototypes;
pub mod registry;
pub mod reports;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
