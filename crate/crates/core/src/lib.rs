//! Two-scale homogenization of thin piezoelectric perforated shells.
//!
//! The crate solves periodic cell problems on a perforated unit cell, assembles the
//! effective membrane (`c̄, ē, d̄`) and bending (`C̄`) tensors along two independent
//! paths, solves the homogenized shell problems, and checks the theory against direct
//! solves of the oscillating problems through discrete unfolding and averaging.

pub mod cell;
pub mod commands;
pub mod config;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod homogenize;
pub mod io;
pub mod macro_solver;
pub mod material;
pub mod unfold;
pub mod validation;

pub use error::{Error, Result};
