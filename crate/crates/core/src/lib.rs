pub mod coevolution;
pub mod decomposition;
pub mod error;
pub mod evolve;
pub mod problems;
pub mod runner;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
