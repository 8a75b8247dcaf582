pub mod container;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
mod linalg;
pub mod par;
pub mod pipeline;
pub mod stancenet;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
