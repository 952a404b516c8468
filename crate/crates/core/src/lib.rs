pub mod are;
pub mod benchmarks;
pub mod dre;
pub mod error;
pub mod experiment;
pub mod galerkin;
pub mod linalg;

pub use error::{Error, Result};
