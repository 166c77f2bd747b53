//! Conservative abstract transformers for trees and ensembles.
//!
//! For every input box `X`, `tree_transform(t, X)` contains `t(x)` for all
//! `x` in `X`, and the same holds for `ensemble_transform`. Once every tree is
//! pinned to a single leaf the ensemble transformer returns the exact
//! concrete output as a singleton box.

use alloc::vec;
use core::ops::ControlFlow;

use crate::ensemble::{softmax_in_place, Ensemble, Node, PostProcess, Tree};
use crate::error::{check_dim, Error};
use crate::interval::Interval;
use crate::rect::HyperRect;

/// How the checker downstream reads the ensemble output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputSemantics {
    /// Only the argmax matters, so argmax-invariant post-processing
    /// (softmax) is skipped.
    Argmax,
    /// Scores are compared directly, so the full post-processing applies.
    #[default]
    Scores,
}

/// Instrumentation for one engine run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransformStats {
    /// Number of times a region was split along a tree's leaf partition.
    pub refinement_count: u64,
    /// Deepest recursion level reached; the root call is level 0.
    pub max_recursion_depth: usize,
    pub checker_calls: u64,
}

impl TransformStats {
    pub fn merge(&mut self, other: &TransformStats) {
        self.refinement_count += other.refinement_count;
        self.checker_calls += other.checker_calls;
        self.max_recursion_depth = self.max_recursion_depth.max(other.max_recursion_depth);
    }
}

/// Join of the leaf values reachable from `input`.
pub fn tree_transform(tree: &Tree, input: &HyperRect) -> Result<HyperRect, Error> {
    if input.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if let Some(f) = tree.max_feature() {
        if f >= input.dim() {
            return Err(Error::DimensionMismatch {
                expected: f + 1,
                found: input.dim(),
            });
        }
    }
    let m = tree.n_outputs();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    leaf_hull(tree, input.intervals(), &mut lo, &mut hi);
    Ok(closed_box(&lo, &hi))
}

/// Abstract ensemble output on `input`, where the trees outside `remaining`
/// are already pinned and contribute the exact partial sum `pinned`.
///
/// Trees in `remaining` are accumulated in the order given, after `pinned`.
pub fn ensemble_transform(
    ens: &Ensemble,
    input: &HyperRect,
    pinned: &[f64],
    remaining: &[usize],
    semantics: OutputSemantics,
) -> Result<HyperRect, Error> {
    check_dim(ens.n_features(), input.dim())?;
    check_dim(ens.n_outputs(), pinned.len())?;
    if input.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if let Some(&bad) = remaining.iter().find(|&&i| i >= ens.n_trees()) {
        return Err(Error::InvalidModel(alloc::format!(
            "tree index {bad} out of range for {} trees",
            ens.n_trees()
        )));
    }
    let trees = remaining.iter().map(|&i| &ens.trees()[i]);
    Ok(abstract_output(ens, input.intervals(), pinned, trees, semantics))
}

/// Unchecked core of [`ensemble_transform`] used by the engine.
pub(crate) fn abstract_output<'a>(
    ens: &Ensemble,
    input: &[Interval],
    pinned: &[f64],
    trees: impl Iterator<Item = &'a Tree>,
    semantics: OutputSemantics,
) -> HyperRect {
    let m = ens.n_outputs();
    let mut lo = pinned.to_vec();
    let mut hi = pinned.to_vec();
    let mut leaf_lo = vec![0.0; m];
    let mut leaf_hi = vec![0.0; m];
    for tree in trees {
        leaf_lo.fill(f64::INFINITY);
        leaf_hi.fill(f64::NEG_INFINITY);
        leaf_hull(tree, input, &mut leaf_lo, &mut leaf_hi);
        for j in 0..m {
            lo[j] += leaf_lo[j];
            hi[j] += leaf_hi[j];
        }
    }
    post_process_bounds(ens, &mut lo, &mut hi, semantics);
    closed_box(&lo, &hi)
}

/// Applies the ensemble's post-processing to per-component bounds of the tree
/// sum. On a singleton sum the result is bit-identical to the concrete path.
pub(crate) fn post_process_bounds(ens: &Ensemble, lo: &mut [f64], hi: &mut [f64], semantics: OutputSemantics) {
    match ens.post_process() {
        PostProcess::Identity => {}
        PostProcess::Divisor => {
            let b = ens.n_trees() as f64;
            lo.iter_mut().for_each(|v| *v /= b);
            hi.iter_mut().for_each(|v| *v /= b);
        }
        PostProcess::Softmax => {
            if semantics == OutputSemantics::Scores {
                softmax_bounds(lo, hi);
            }
        }
    }
}

/// Softmax is increasing in its own component and decreasing in the others,
/// so component `i` is bounded below by evaluating at (own lo, others hi) and
/// above at (own hi, others lo). Non-degenerate bounds are widened by a few
/// ulps so that rounding in the concrete evaluation stays inside.
fn softmax_bounds(lo: &mut [f64], hi: &mut [f64]) {
    if lo == hi {
        softmax_in_place(lo);
        hi.copy_from_slice(lo);
        return;
    }
    const SLACK: f64 = 32.0 * f64::EPSILON;
    let m = lo.len();
    let mut scratch = vec![0.0; m];
    let mut new_lo = vec![0.0; m];
    let mut new_hi = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            scratch[j] = if j == i { lo[j] } else { hi[j] };
        }
        softmax_in_place(&mut scratch);
        new_lo[i] = (scratch[i] * (1.0 - SLACK)).max(0.0);
        for j in 0..m {
            scratch[j] = if j == i { hi[j] } else { lo[j] };
        }
        softmax_in_place(&mut scratch);
        new_hi[i] = (scratch[i] * (1.0 + SLACK)).min(1.0);
    }
    lo.copy_from_slice(&new_lo);
    hi.copy_from_slice(&new_hi);
}

fn closed_box(lo: &[f64], hi: &[f64]) -> HyperRect {
    HyperRect::new(lo.iter().zip(hi).map(|(&l, &h)| Interval::closed(l, h)).collect())
}

/// Widens `lo`/`hi` by every leaf reachable within `region`. Splits decided
/// by the region prune the other child; the region is narrowed along the path
/// so repeated splits on one feature stay exact.
fn leaf_hull(tree: &Tree, region: &[Interval], lo: &mut [f64], hi: &mut [f64]) {
    let mut region = region.to_vec();
    leaf_hull_rec(tree, 0, &mut region, lo, hi);
}

fn leaf_hull_rec(tree: &Tree, i: usize, region: &mut [Interval], lo: &mut [f64], hi: &mut [f64]) {
    match tree.node(i) {
        Node::Leaf { value } => {
            for (j, &v) in value.iter().enumerate() {
                if v < lo[j] {
                    lo[j] = v;
                }
                if v > hi[j] {
                    hi[j] = v;
                }
            }
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let saved = region[*feature];
            let l = saved.meet(&Interval::at_most(*threshold));
            if !l.is_empty() {
                region[*feature] = l;
                leaf_hull_rec(tree, *left, region, lo, hi);
            }
            let r = saved.meet(&Interval::greater_than(*threshold));
            if !r.is_empty() {
                region[*feature] = r;
                leaf_hull_rec(tree, *right, region, lo, hi);
            }
            region[*feature] = saved;
        }
    }
}

/// Calls `visit` for each leaf of `tree` whose region meets `region`, in
/// left-first depth-first order, with the exact intersection of `region` and
/// that leaf's region. Stops early when `visit` breaks.
pub(crate) fn for_each_reachable_leaf<B>(
    tree: &Tree,
    region: &mut HyperRect,
    visit: &mut dyn FnMut(&HyperRect, &[f64]) -> ControlFlow<B>,
) -> ControlFlow<B> {
    reachable_rec(tree, 0, region, visit)
}

fn reachable_rec<B>(
    tree: &Tree,
    i: usize,
    region: &mut HyperRect,
    visit: &mut dyn FnMut(&HyperRect, &[f64]) -> ControlFlow<B>,
) -> ControlFlow<B> {
    match tree.node(i) {
        Node::Leaf { value } => visit(region, value),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let saved = *region.interval(*feature);
            let l = saved.meet(&Interval::at_most(*threshold));
            if !l.is_empty() {
                region.set(*feature, l);
                let flow = reachable_rec(tree, *left, region, visit);
                region.set(*feature, saved);
                flow?;
            }
            let r = saved.meet(&Interval::greater_than(*threshold));
            if !r.is_empty() {
                region.set(*feature, r);
                let flow = reachable_rec(tree, *right, region, visit);
                region.set(*feature, saved);
                flow?;
            }
            ControlFlow::Continue(())
        }
    }
}
