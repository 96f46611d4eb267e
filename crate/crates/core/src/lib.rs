//! Momentum ray transforms of symmetric tensor fields: evaluation on
//! Gaussian-polynomial fields, lifts of transform data, John range
//! conditions, the rank reduction construction, planar moment conditions and
//! exact Weyl-algebra identities.
//!
//! Indices are 0-based throughout.

pub mod error;
pub mod gaussfield;
pub mod johnop;
pub mod lift;
pub mod planar2d;
pub mod quadrature;
pub mod reduction;
pub mod symtensor;
pub mod weyl;
pub mod xray;

pub use error::{Error, Result};
pub use gaussfield::{GaussField, GaussTerm};
pub use johnop::{ChainResidual, JohnChain};
pub use lift::MomentumDataSet;
pub use planar2d::{BasisChange, MomentTable};
pub use symtensor::{MultiIndex, SymTensor};
pub use weyl::{Polynomial, WeylElement};
pub use xray::{CompiledRep, TSPoint, TransformRep};

pub use num_complex::Complex64;
