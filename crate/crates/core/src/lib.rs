pub mod data;
pub mod error;
pub mod format;
pub mod harness;
pub mod kld;
pub mod linalg;
pub mod mixed;
pub mod models;
pub mod nn;
pub mod seed;
pub mod synth;
pub mod uq;

pub use error::{Error, Result};
