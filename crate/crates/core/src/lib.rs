//! Knowledge graph embeddings that combine translational structure vectors
//! with auxiliary semantic vectors (textual, affective, common-knowledge),
//! for commonsense knowledge base completion and triple classification.

pub mod checkpoint;
pub mod energy;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod report;
pub mod resources;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
