pub mod error;
pub mod model;
pub mod numerics;
pub mod power;
pub mod sinr;
pub mod dense;
pub mod sim;
pub mod scenario;

pub use error::{Error, Result};
