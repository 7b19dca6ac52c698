//! Nuclear-norm minimization with solution-uniqueness certification.

pub mod certify;
pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod sampling;
pub mod solver;
pub mod subgeom;
pub mod wcone;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use operators::{LinearOperatorSpec, OperatorKind, ProblemInstance};
