//! The refinement engine.
//!
//! `vote_verify` interprets the ensemble over the input box and asks the
//! checker. When the checker is unsure, the next unpinned tree (in model
//! order) splits the box along its leaf partition and each piece is verified
//! recursively with that tree pinned to its leaf value. Recursion depth is
//! bounded by the number of trees, and at the bottom the abstract output is
//! exact, so the checker must decide.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::checker::{CheckOutcome, PropertyChecker};
use crate::ensemble::{add_assign, Ensemble};
use crate::error::{check_dim, Error};
use crate::rect::HyperRect;
use crate::transform::{abstract_output, for_each_reachable_leaf, TransformStats};

/// Polled once per checker invocation.
pub trait Deadline {
    fn expired(&self) -> bool;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoDeadline;

impl Deadline for NoDeadline {
    fn expired(&self) -> bool {
        false
    }
}

impl<F: Fn() -> bool> Deadline for F {
    fn expired(&self) -> bool {
        self()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Verified,
    Falsified,
    Timeout,
}

/// A fully refined region (every tree pinned) on which the property fails.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub region: HyperRect,
    /// Exact post-processed ensemble output on `region`.
    pub output: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineResult {
    pub verdict: Verdict,
    pub stats: TransformStats,
    /// Present iff `verdict` is `Falsified`.
    pub counterexample: Option<Counterexample>,
}

enum Stop {
    Falsified(Counterexample),
    Timeout,
    Error(Error),
}

struct Run<'a, C: ?Sized, D: ?Sized> {
    ens: &'a Ensemble,
    checker: &'a C,
    deadline: &'a D,
    stats: TransformStats,
}

impl<C: PropertyChecker + ?Sized, D: Deadline + ?Sized> Run<'_, C, D> {
    /// Verifies `region` with trees `0..next` pinned to the exact sum `pinned`.
    fn refine(&mut self, region: &mut HyperRect, next: usize, pinned: &[f64]) -> ControlFlow<Stop> {
        if self.deadline.expired() {
            return ControlFlow::Break(Stop::Timeout);
        }
        self.stats.max_recursion_depth = self.stats.max_recursion_depth.max(next);
        let trees = self.ens.trees();
        let output = abstract_output(
            self.ens,
            region.intervals(),
            pinned,
            trees[next..].iter(),
            self.checker.semantics(),
        );
        self.stats.checker_calls += 1;
        match self.checker.check(region, &output) {
            CheckOutcome::Pass => return ControlFlow::Continue(()),
            CheckOutcome::Fail => {
                return ControlFlow::Break(Stop::Falsified(self.pin_remaining(region, next, pinned)));
            }
            CheckOutcome::Unsure => {}
        }
        let Some(tree) = trees.get(next) else {
            return ControlFlow::Break(Stop::Error(Error::UndecidedAtSingleton));
        };
        self.stats.refinement_count += 1;
        let mut sum = pinned.to_vec();
        for_each_reachable_leaf(tree, region, &mut |cell, leaf| {
            sum.copy_from_slice(pinned);
            add_assign(&mut sum, leaf);
            let mut cell = cell.clone();
            self.refine(&mut cell, next + 1, &sum)
        })
    }

    /// Descends along the first reachable leaf of every unpinned tree. Used
    /// once the checker has failed the whole region, so any cell inside it
    /// is a witness.
    fn pin_remaining(&self, region: &HyperRect, next: usize, pinned: &[f64]) -> Counterexample {
        let mut region = region.clone();
        let mut sum = pinned.to_vec();
        for tree in &self.ens.trees()[next..] {
            let mut first = None;
            let _ = for_each_reachable_leaf(tree, &mut region.clone(), &mut |cell, leaf| {
                first = Some((cell.clone(), leaf.to_vec()));
                ControlFlow::Break(())
            });
            let (cell, leaf) = first.expect("a non-empty region reaches at least one leaf");
            region = cell;
            add_assign(&mut sum, &leaf);
        }
        self.ens.finish(&mut sum);
        Counterexample { region, output: sum }
    }
}

/// Decides the property encoded by `checker` on `input`.
///
/// Returns `Err` for an empty or mis-sized input box and when the checker is
/// unsure about a fully refined output.
pub fn vote_verify<C, D>(ens: &Ensemble, input: &HyperRect, checker: &C, deadline: &D) -> Result<EngineResult, Error>
where
    C: PropertyChecker + ?Sized,
    D: Deadline + ?Sized,
{
    check_dim(ens.n_features(), input.dim())?;
    if input.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut run = Run {
        ens,
        checker,
        deadline,
        stats: TransformStats::default(),
    };
    let zero = alloc::vec![0.0; ens.n_outputs()];
    let flow = run.refine(&mut input.clone(), 0, &zero);
    let stats = run.stats;
    let (verdict, counterexample) = match flow {
        ControlFlow::Continue(()) => (Verdict::Verified, None),
        ControlFlow::Break(Stop::Falsified(cex)) => (Verdict::Falsified, Some(cex)),
        ControlFlow::Break(Stop::Timeout) => (Verdict::Timeout, None),
        ControlFlow::Break(Stop::Error(e)) => return Err(e),
    };
    Ok(EngineResult {
        verdict,
        stats,
        counterexample,
    })
}

/// A concrete point inside `region`: per dimension the midpoint, stepped
/// inward off exclusive endpoints.
pub fn find_concrete_witness(region: &HyperRect) -> Result<Vec<f64>, Error> {
    region.interior_point().ok_or(Error::EmptyRegion)
}
