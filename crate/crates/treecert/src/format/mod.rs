//! Text formats: native models, integer-leaf alternate models, datasets and
//! property files.
//!
//! All formats are line oriented. Blank lines and lines starting with `#` are
//! ignored. Floats are written in shortest round-trip form, so parsing a
//! serialized value reproduces its exact bit pattern.

pub mod alt;
pub mod dataset;
pub mod model;
pub mod property;

pub(crate) mod lines;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
