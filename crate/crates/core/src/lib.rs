pub mod baseline;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod labels;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod ordinal;
pub mod learners;
pub mod rng;
pub mod rounding;
pub mod synth;

pub use error::{Error, Result};
pub use labels::LabelSpace;
pub use matrix::Matrix;
