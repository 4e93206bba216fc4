pub mod error;
pub mod geometry;
pub mod nonlinearity;
mod quadrature;
pub mod solver;
pub mod verification;
pub mod assembly;

pub use error::{Error, Result};
