//! Matrix computations behind a necessary condition for local solvability of
//! doubly characteristic differential operators: Poisson brackets of
//! quadratic forms, non-dissipativity certificates, pencil ranks, witness
//! points on intersections of two real quadrics, and operator-level verdicts
//! for two-step nilpotent groups.

pub mod checker;
pub mod dissipativity;
pub mod error;
pub mod fixtures;
pub mod forms;
pub mod linalg;
pub mod pencil;
pub mod rng;
pub mod synth;
pub mod witness;

pub use error::{Error, Result};
pub use forms::{SymmetricForm, SymplecticStructure};
