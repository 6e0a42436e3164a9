//! Finite element infrastructure.

pub mod assembly;
pub mod c0ip;
pub mod dofmap;
pub mod p2;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;

pub use dofmap::DofMap;
pub use quadrature::QuadratureRule;
pub use solver::{factorize_system, solve_saddle, MeanConstraint, SolveSettings, SparseSymSystem};
pub use space::{P2Space, TriMesh};
pub use sparse::{CsrMatrix, TripletBuilder};
