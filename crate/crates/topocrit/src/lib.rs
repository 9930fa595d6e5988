//! Numerical toolkit for topological criticality in chiral lattice models.

pub mod adiabatic;
pub mod edgetheory;
pub mod error;
pub mod fit;
pub mod invariants;
pub mod linalg;
pub mod metrology;
pub mod models;
pub(crate) mod par;
pub mod spectra;

pub use error::{Error, Result};
pub use linalg::{DenseHermitian, C64};
pub use models::{Boundary, CiParams, CouplingVector, LatticeSpec, ModelFamily, Representation};
