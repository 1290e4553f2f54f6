//! Streaming anomaly detection with the isolation distributional kernel.
//!
//! A sliding window of the last ω instances is summarised by `t` random
//! partitionings, each built from ψ points sampled from the window. Every
//! instance is scored by how densely the window populates the cells it
//! falls into. The model can be maintained incrementally as the window
//! slides ([`Mode::Incremental`]), rebuilt from scratch on every slide
//! ([`Mode::Retrain`]), or built once over a whole dataset
//! ([`Mode::Offline`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod snapshot;
pub mod stream;

pub use data::{LabeledDataset, LabeledInstance};
pub use error::{IdkError, Result};
pub use kernel::{PartitionEnsemble, Partitioning, Point};
pub use model::{recount, ModelState};
pub use stream::{run_stream, Mode, RunOutput, ScoreRecord, StreamConfig};
