pub mod bochner;
pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod maps;
pub mod rigidity;

pub use error::{Error, Result};
