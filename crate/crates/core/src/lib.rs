pub mod annotation;
pub mod candidates;
pub mod classifier;
pub mod corr;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod pipeline;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{CandidateKey, Label, Language};
