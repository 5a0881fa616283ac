pub mod cli_io;
pub mod cs_basis;
pub mod error;
pub mod fv_operator;
pub mod green_cf;
pub mod linalg;
pub mod potentials;
pub mod spectrum_solver;

pub use error::{Error, Result};
