pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod gaze;
pub mod numeric;
pub mod pipeline;
pub mod synthetic;
pub mod tagger;

pub use error::{Error, Result};
