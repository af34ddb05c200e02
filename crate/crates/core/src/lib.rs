//! Finite-dimensional noncommutative Poisson boundaries.
//!
//! Tracial multi-matrix algebras, hyperstates on B(L²(M,τ)) and their
//! Poisson transforms, harmonic operators with the Choi-Effros product,
//! entropy functionals, and iterated Stinespring dilations.

pub mod algebra;
pub mod concrete;
pub mod dilation;
pub mod entropy;
pub mod error;
pub mod harmonic;
pub mod hyperstate;
pub mod linalg;
pub mod random;

pub use algebra::{GnsSpace, Subalgebra, TracialAlgebra, Weights};
pub use error::{Error, Result};
pub use linalg::{Mat, Vector, C64};
