//! Verification of decision tree ensembles by abstract interpretation over
//! hyperrectangles, refined one tree at a time until a property checker is
//! decisive.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, wall-clock
//! deadlines and the parallel batch driver live in the `treecert` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cells;
pub mod checker;
pub mod engine;
pub mod ensemble;
mod error;
pub mod interval;
pub mod rect;
pub mod transform;

#[cfg(test)]
pub(crate) mod testutil;

pub use cells::{enumerate_cells, enumerate_cells_within, Cell, CellIter, DEFAULT_CELL_CAP};
pub use checker::{
    assertion_check, brute_force_robustness, perturbation_box, robustness_check, Assertion, AssertionChecker,
    CheckOutcome, PropertyChecker, PropertySpec, RobustnessChecker,
};
pub use engine::{find_concrete_witness, vote_verify, Counterexample, Deadline, EngineResult, NoDeadline, Verdict};
pub use ensemble::{argmax, Ensemble, Node, PostProcess, Tree};
pub use error::Error;
pub use interval::Interval;
pub use rect::HyperRect;
pub use transform::{ensemble_transform, tree_transform, OutputSemantics, TransformStats};
