pub mod cli_io;
pub mod coherence_sensing;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod photokinetics;
pub mod pulse_engine;
pub mod rng;
pub mod spin_model;

pub use error::{Error, Result};
