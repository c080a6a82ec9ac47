//! Recovery of a sparse signal and a sparse corruption from
//! `y = A x + H z + w` with structured sensing operators.

pub mod cli;
pub mod cvec;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linop;
pub mod models;
pub mod rip;
pub mod seed;
pub mod solvers;

pub use cvec::C64;
pub use error::{Error, Result};
pub use linop::{DenseMatrix, LinearOperator, NormEstimate, OpKind};
pub use models::{Family, ModelParams, ProblemInstance, SensingModel, Setting};
