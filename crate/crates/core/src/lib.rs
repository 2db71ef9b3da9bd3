pub mod cli;
pub mod concentration;
pub mod ensembles;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lp;
pub mod observable;
pub mod random;
pub mod states;
pub mod tensor;
pub mod w1;

pub use error::{Error, Result};
