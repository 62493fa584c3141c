//! IO side of the expression-recognition toolkit: FER2013 and
//! class-directory loaders, the `FERW1` weights container, configuration and
//! report formats, the `fer` CLI and the HTTP service.

pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod imageio;
pub mod report;
pub mod server;
pub mod weights;

pub use error::{Error, Result, WeightsError};
