pub mod bench;
pub mod cli;
pub mod consensus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod perturb;
pub mod pipeline;
pub mod sparse;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
