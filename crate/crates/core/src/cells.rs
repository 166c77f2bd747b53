//! Brute-force enumeration of the ensemble's constant-output cells.
//!
//! A cell is a non-empty intersection of one leaf region per tree. The cells
//! partition the input space and the ensemble output is constant on each, so
//! walking them answers any property exactly. This is the oracle the engine is
//! tested against; it shares nothing with the abstract transformers beyond
//! [`Tree::leaf_regions`] and box intersection.
//!
//! [`Tree::leaf_regions`]: crate::ensemble::Tree::leaf_regions

use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::{add_assign, Ensemble};
use crate::error::{check_dim, Error};
use crate::rect::HyperRect;

/// Refuse to enumerate more leaf combinations than this unless told otherwise.
pub const DEFAULT_CELL_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub region: HyperRect,
    /// Post-processed ensemble output, exact on the whole region.
    pub output: Vec<f64>,
}

pub fn enumerate_cells(ens: &Ensemble, cap: u128) -> Result<CellIter<'_>, Error> {
    enumerate_cells_within(ens, &HyperRect::unbounded(ens.n_features()), cap)
}

/// Cells of `ens` intersected with `region`; empty intersections are skipped.
pub fn enumerate_cells_within<'a>(ens: &'a Ensemble, region: &HyperRect, cap: u128) -> Result<CellIter<'a>, Error> {
    check_dim(ens.n_features(), region.dim())?;
    let combinations = ens
        .trees()
        .iter()
        .fold(1u128, |acc, t| acc.saturating_mul(t.leaf_count() as u128));
    if combinations > cap {
        return Err(Error::CellCapExceeded { combinations, cap });
    }
    Ok(CellIter {
        ens,
        leaves: ens.trees().iter().map(|t| t.leaf_regions(ens.n_features())).collect(),
        root: region.clone(),
        stack: Vec::with_capacity(ens.n_trees()),
        started: false,
        done: region.is_empty(),
    })
}

struct Frame {
    leaf: usize,
    region: HyperRect,
    sum: Vec<f64>,
}

/// Lazy depth-first walk over one leaf choice per tree.
pub struct CellIter<'a> {
    ens: &'a Ensemble,
    leaves: Vec<Vec<(HyperRect, Vec<f64>)>>,
    root: HyperRect,
    stack: Vec<Frame>,
    started: bool,
    done: bool,
}

impl CellIter<'_> {
    /// Extends the stack to a full assignment, trying leaves from `start` at
    /// the current level and backtracking when a level is exhausted.
    fn fill(&mut self, mut start: usize) -> bool {
        loop {
            let level = self.stack.len();
            if level == self.leaves.len() {
                return true;
            }
            let (parent_region, parent_sum) = match self.stack.last() {
                Some(f) => (&f.region, f.sum.as_slice()),
                None => (&self.root, &[][..]),
            };
            let found = self.leaves[level][start..].iter().enumerate().find_map(|(i, (r, v))| {
                let meet = parent_region.meet(r).ok()?;
                (!meet.is_empty()).then_some((start + i, meet, v))
            });
            match found {
                Some((leaf, region, value)) => {
                    let mut sum = if parent_sum.is_empty() {
                        vec![0.0; self.ens.n_outputs()]
                    } else {
                        parent_sum.to_vec()
                    };
                    add_assign(&mut sum, value);
                    self.stack.push(Frame { leaf, region, sum });
                    start = 0;
                }
                None => match self.stack.pop() {
                    Some(f) => start = f.leaf + 1,
                    None => return false,
                },
            }
        }
    }
}

impl Iterator for CellIter<'_> {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        if self.done {
            return None;
        }
        let ok = if self.started {
            let top = self.stack.pop().expect("full assignment after a yielded cell");
            self.fill(top.leaf + 1)
        } else {
            self.started = true;
            self.fill(0)
        };
        if !ok {
            self.done = true;
            return None;
        }
        let top = self.stack.last().expect("fill returned a full assignment");
        let mut output = top.sum.clone();
        self.ens.finish(&mut output);
        Some(Cell {
            region: top.region.clone(),
            output,
        })
    }
}
