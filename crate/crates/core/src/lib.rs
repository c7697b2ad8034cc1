pub mod coefficients;
pub mod config;
pub mod dn_map;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod forward;
pub mod functionals;
pub mod grid;
pub mod limit;
pub mod probes;
pub mod reconstruct;
pub mod linalg;

pub use error::{Error, Result};
