//! Green-function tools for split Lindblad generators and the driven Dicke ensemble.

pub mod error;
pub mod analytic;
pub mod dicke;
pub mod green;
pub mod linalg;
pub mod liouops;
pub mod numeric;
pub mod oracle;
pub mod panels;
pub mod realrep;

pub use error::{Error, Result};
