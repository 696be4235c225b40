pub mod breakdown;
pub mod distribution;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod location;
pub mod pipeline;
pub mod regression;
pub mod rho;
pub mod scale;
pub mod sim;

pub use error::{Error, Result};
