pub mod beliefs;
pub mod envelope;
pub mod error;
pub mod extraction;
pub mod grid;
pub mod ic;
pub mod lp;
pub mod models;
pub mod oracles;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Rational;
