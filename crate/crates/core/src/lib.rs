pub mod check;
pub mod classify;
pub mod concircular;
pub mod connection;
pub mod curvature;
pub mod diffcore;
pub mod error;
pub mod expr;
pub mod local;
pub mod metric;
pub mod tensor;

pub use error::{FinslerError, Result};
