pub mod error;
pub mod gridfn;
pub mod nonlinearity;
pub mod kernels;
pub mod evolve;
pub mod speeds;
pub mod waves;
pub mod fronts;
pub mod hypotheses;
pub mod cli;

pub use error::{Error, Result};
