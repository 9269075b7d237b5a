pub mod bayes;
pub mod config;
pub mod copula;
pub mod data;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod precision;
pub mod rng;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
