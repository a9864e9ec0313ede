pub mod analytic_coop;
pub mod analytic_sinr;
pub mod cell_load;
pub mod energy;
pub mod error;
pub mod evaluation;
pub mod mc;
pub mod model;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
