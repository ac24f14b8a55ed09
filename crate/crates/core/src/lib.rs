//! Product integration on matrix Lie groups.
//!
//! Evolutions of measurable algebra-valued controls, logarithmic
//! derivatives and the induced group law on controls, evolution through
//! split extensions, Carathéodory flows of time-dependent vector fields on
//! `R^n`, and Trotter / commutator limit experiments.

pub mod algebra;
pub mod controls;
pub mod evolution;
pub mod flows;
pub mod io;
pub mod limits;
pub mod error;

pub use error::{Error, Result};
