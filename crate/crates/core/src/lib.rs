pub mod error;
pub mod dataset;
pub mod evaluation;
pub mod geometry;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
