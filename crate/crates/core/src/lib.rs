pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod graph_measures;
pub mod learners;
pub mod lint;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
