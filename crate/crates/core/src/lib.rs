//! Distributed optimal control of the von Kármán plate equations, discretized
//! with C1-conforming Bogner-Fox-Schmit elements and piecewise-constant controls.

pub mod assembly;
pub mod control;
pub mod convergence;
pub mod element;
pub mod error;
pub mod jet;
pub mod manufactured;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
