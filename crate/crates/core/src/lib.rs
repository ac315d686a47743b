//! Learning reduced models ("strategies") for fast solving of parameterized
//! mixed-integer linear programs.

pub mod datagen;
pub mod cli;
pub mod config;
pub mod error;
pub mod families;
pub mod inference;
pub mod io;
pub mod learner;
pub mod lp;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod pruning;
pub mod reduction;

pub use error::{Error, Result};
