//! Decision procedures for parameterized networks of anonymous processes
//! communicating by broadcast.
//!
//! The crate models finite-state broadcast protocols, decides the
//! synchronization and repeated-coverability problems for (Single-)Wait-Only
//! protocols through summary-based VASS constructions, cross-checks every
//! construction against a bounded explicit-state oracle, and generates
//! labelled hardness instances from counter machines, VASS and DFA families.

pub mod explicit;
pub mod protocol;
pub mod random;
pub mod reductions;
pub mod semantics;
pub mod solvers;
pub mod summary;
pub mod vass;
