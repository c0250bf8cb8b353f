pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gvp;
pub mod protein_io;
pub mod residue;
pub mod scoring;
pub mod surface;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
