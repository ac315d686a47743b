//! File formats: MPS models and the pipeline's persisted artifacts.

pub mod mps;
pub mod persist;

pub use mps::{parse_mps, serialize_mps};
pub use persist::*;
