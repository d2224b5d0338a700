pub mod constraints;
pub mod dmdc;
pub mod error;
pub mod io;
pub mod cli;
pub mod kernel;
pub mod model;
pub(crate) mod moments;
pub mod objective;
pub mod pgd;
pub mod plot;
pub mod synth;

pub use error::{Error, Result};
