pub mod error;
pub mod experiment;
pub mod galerkin;
pub mod geometry;
pub mod hierarchy;
pub mod mesh;
pub mod multilevel;
pub mod operator;
pub mod precond;
pub mod sparse;
pub mod spectral;
pub mod transfer;

pub use error::{Error, Result};
