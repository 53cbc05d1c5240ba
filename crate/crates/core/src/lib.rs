//! Quantum collision models.
//!
//! A system `S` interacts in sequence with fresh ancillas through short
//! unitary collisions. The crate provides the stroboscopic map and its
//! matrix-product form, the continuous-time master equations obtained in the
//! small-step limit, measurement-conditioned trajectories, a
//! thermodynamic ledger per collision, and collision models with memory.

pub mod collision;
pub mod linalg;
pub mod master_eq;
pub mod nonmarkov;
pub mod random;
pub mod states;
pub mod thermo;
pub mod trajectories;

pub use linalg::{Mat, TensorSpace, Vector, C64};
