pub mod assembly;
pub mod cli;
pub mod error;
pub mod extension_lab;
pub mod geometry;
pub mod ieti;
pub mod linalg;
pub mod splines;

pub use error::{Error, Result};
