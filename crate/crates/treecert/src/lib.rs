//! File formats, parallel batch verification and reporting on top of
//! [`treecert_core`].
//!
//! The core crate holds the verification algorithm and is `no_std`; this
//! crate adds everything that needs an operating system: reading and writing
//! models, datasets and property files, wall-clock deadlines, the worker pool
//! and the `treecert` command-line tool.

pub mod error;
pub mod format;
pub mod parallel;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use treecert_core as core;
