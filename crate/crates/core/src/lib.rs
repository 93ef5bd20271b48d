//! Numerical workbench for recovering the semilinear term `a` in
//! `-div(A∇u) + a(u) = 0` from localized Dirichlet-to-Neumann data.

pub mod dtn;
pub mod elliptic;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod nonlinearity;
pub mod oracles;
pub mod probes;
pub mod recovery;
pub mod sparse;
pub mod trace;

pub use error::{Error, Result};
