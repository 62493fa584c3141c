use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite gradient in {layer} (epoch {epoch}, batch {batch})")]
    NonFiniteGradient {
        layer: String,
        epoch: usize,
        batch: usize,
    },

    #[error("non-finite loss (epoch {epoch}, batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("class {0} has no samples; merge auxiliary data or drop the class")]
    EmptyClass(&'static str),
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::Error::Shape(alloc::format!($($arg)*)) };
}

macro_rules! arg_err {
    ($($arg:tt)*) => { $crate::Error::Argument(alloc::format!($($arg)*)) };
}

pub(crate) use arg_err;
pub(crate) use shape_err;
