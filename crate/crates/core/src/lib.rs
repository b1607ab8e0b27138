//! Complex semidefinite programs, their real reformulations, and complex
//! moment relaxations of polynomial optimization problems.

pub mod complex;
pub mod cpop;
pub mod error;
pub mod io;
pub mod linalg;
pub mod monomial;
pub mod polynomial;
pub mod program;
pub mod reformulate;
pub mod relaxation;
pub mod sdpa;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
