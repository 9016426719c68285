pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod inventory;
pub mod models;
pub mod resample;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
