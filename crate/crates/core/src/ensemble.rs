//! Concrete semantics of decision trees and tree ensembles.
//!
//! Everything the abstract side computes is checked against these functions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error};
use crate::interval::Interval;
use crate::rect::HyperRect;

/// A node stored in a tree's arena. The root is always index 0.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Route left iff `x[feature] <= threshold`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

/// Binary axis-aligned decision tree with `m`-dimensional leaf values.
///
/// Nodes live in a pre-order arena, so building a tree composes subtrees via
/// [`Tree::leaf`] and [`Tree::split`].
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    n_outputs: usize,
    leaf_count: usize,
    depth: usize,
    max_feature: Option<usize>,
}

impl Tree {
    pub fn leaf(value: Vec<f64>) -> Tree {
        Tree {
            n_outputs: value.len(),
            nodes: vec![Node::Leaf { value }],
            leaf_count: 1,
            depth: 0,
            max_feature: None,
        }
    }

    /// Joins two subtrees under a split. Thresholds must be finite and both
    /// subtrees must have the same leaf arity.
    pub fn split(feature: usize, threshold: f64, left: Tree, right: Tree) -> Result<Tree, Error> {
        if !threshold.is_finite() {
            return Err(Error::InvalidModel(format!(
                "threshold {threshold} on feature {feature} is not finite"
            )));
        }
        if left.n_outputs != right.n_outputs {
            return Err(Error::InvalidModel(format!(
                "subtrees disagree on leaf arity ({} vs {})",
                left.n_outputs, right.n_outputs
            )));
        }
        let left_len = left.nodes.len();
        let mut nodes = Vec::with_capacity(1 + left_len + right.nodes.len());
        nodes.push(Node::Split {
            feature,
            threshold,
            left: 1,
            right: 1 + left_len,
        });
        nodes.extend(left.nodes.into_iter().map(|n| offset(n, 1)));
        nodes.extend(right.nodes.into_iter().map(|n| offset(n, 1 + left_len)));
        Ok(Tree {
            nodes,
            n_outputs: left.n_outputs,
            leaf_count: left.leaf_count + right.leaf_count,
            depth: 1 + left.depth.max(right.depth),
            max_feature: [Some(feature), left.max_feature, right.max_feature]
                .into_iter()
                .flatten()
                .max(),
        })
    }

    /// Rebuilds a tree from a pre-order arena such as one returned by
    /// [`Tree::nodes`]. Every node must be reachable from index 0 exactly once.
    pub fn from_nodes(nodes: &[Node]) -> Result<Tree, Error> {
        if nodes.is_empty() {
            return Err(Error::InvalidModel("tree has no nodes".into()));
        }
        let mut visited = 0;
        let tree = build_from(nodes, 0, &mut visited)?;
        if visited != nodes.len() {
            return Err(Error::InvalidModel(format!(
                "{} of {} nodes are unreachable from the root",
                nodes.len() - visited,
                nodes.len()
            )));
        }
        Ok(tree)
    }

    #[inline]
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Largest feature index used by any split.
    pub fn max_feature(&self) -> Option<usize> {
        self.max_feature
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    /// The `(X_i, y_i)` form of the tree: one box per leaf, in left-first
    /// depth-first order. The boxes partition `R^n`.
    pub fn leaf_regions(&self, n_features: usize) -> Vec<(HyperRect, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.leaf_count);
        let mut region = HyperRect::unbounded(n_features);
        self.collect_regions(0, &mut region, &mut out);
        out
    }

    fn collect_regions(&self, i: usize, region: &mut HyperRect, out: &mut Vec<(HyperRect, Vec<f64>)>) {
        match &self.nodes[i] {
            Node::Leaf { value } => out.push((region.clone(), value.clone())),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let saved = *region.interval(*feature);
                region.set(*feature, saved.meet(&Interval::at_most(*threshold)));
                self.collect_regions(*left, region, out);
                region.set(*feature, saved.meet(&Interval::greater_than(*threshold)));
                self.collect_regions(*right, region, out);
                region.set(*feature, saved);
            }
        }
    }
}

fn build_from(nodes: &[Node], i: usize, visited: &mut usize) -> Result<Tree, Error> {
    *visited += 1;
    if *visited > nodes.len() {
        return Err(Error::InvalidModel(
            "node arena contains a cycle or shared child".into(),
        ));
    }
    match &nodes[i] {
        Node::Leaf { value } => Ok(Tree::leaf(value.clone())),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() {
                return Err(Error::InvalidModel(format!(
                    "node {i} has out-of-order children {left} and {right}"
                )));
            }
            let l = build_from(nodes, *left, visited)?;
            let r = build_from(nodes, *right, visited)?;
            Tree::split(*feature, *threshold, l, r)
        }
    }
}

fn offset(node: Node, by: usize) -> Node {
    match node {
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => Node::Split {
            feature,
            threshold,
            left: left + by,
            right: right + by,
        },
        leaf => leaf,
    }
}

/// Final transform applied to the sum of tree outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostProcess {
    Identity,
    /// Divide the sum by the number of trees (random forest averaging).
    Divisor,
    /// Softmax over the summed scores (gradient boosting classifiers).
    Softmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    trees: Vec<Tree>,
    post_process: PostProcess,
    n_features: usize,
    n_outputs: usize,
}

impl Ensemble {
    pub fn new(trees: Vec<Tree>, post_process: PostProcess, n_features: usize) -> Result<Self, Error> {
        let first = trees
            .first()
            .ok_or_else(|| Error::InvalidModel("ensemble has no trees".into()))?;
        if n_features == 0 {
            return Err(Error::InvalidModel("ensemble has no input features".into()));
        }
        let n_outputs = first.n_outputs;
        if n_outputs == 0 {
            return Err(Error::InvalidModel("leaves have no components".into()));
        }
        for (i, t) in trees.iter().enumerate() {
            if t.n_outputs != n_outputs {
                return Err(Error::InvalidModel(format!(
                    "tree {i} has leaf arity {}, expected {n_outputs}",
                    t.n_outputs
                )));
            }
            if let Some(f) = t.max_feature.filter(|&f| f >= n_features) {
                return Err(Error::InvalidModel(format!(
                    "tree {i} splits on feature {f}, but the model has {n_features} features"
                )));
            }
        }
        Ok(Ensemble {
            trees,
            post_process,
            n_features,
            n_outputs,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn into_trees(self) -> Vec<Tree> {
        self.trees
    }

    pub fn post_process(&self) -> PostProcess {
        self.post_process
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Sum of tree outputs, accumulated in tree order, before post-processing.
    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        check_dim(self.n_features, x.len())?;
        let mut sum = vec![0.0; self.n_outputs];
        for t in &self.trees {
            add_assign(&mut sum, t.predict(x));
        }
        Ok(sum)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        let mut scores = self.raw_scores(x)?;
        self.finish(&mut scores);
        Ok(scores)
    }

    /// Applies the post-processing step to an exact tree sum in place.
    pub fn finish(&self, sum: &mut [f64]) {
        match self.post_process {
            PostProcess::Identity => {}
            PostProcess::Divisor => {
                let b = self.trees.len() as f64;
                sum.iter_mut().for_each(|v| *v /= b);
            }
            PostProcess::Softmax => softmax_in_place(sum),
        }
    }

    /// Predicted class (0-based), ties resolved towards the lowest index.
    pub fn classify(&self, x: &[f64]) -> Result<usize, Error> {
        Ok(argmax(&self.predict(x)?))
    }
}

pub(crate) fn add_assign(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += *b);
}

/// Numerically stable softmax: shift by the maximum before exponentiating.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Index of the largest component; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_ensemble, t1, two_tree_ensemble};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn routing_is_inclusive_left() {
        let t = t1();
        assert_eq!(t.predict(&[-1.0]), &[1.0, 0.0]);
        assert_eq!(t.predict(&[0.0]), &[1.0, 0.0]);
        assert_eq!(t.predict(&[0.5]), &[0.0, 1.0]);
    }

    #[test]
    fn divisor_ensemble_averages() {
        let ens = two_tree_ensemble(PostProcess::Divisor);
        assert_eq!(ens.predict(&[1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(ens.predict(&[-1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(ens.classify(&[1.0]).unwrap(), 0);
        assert_eq!(ens.classify(&[3.0]).unwrap(), 1);
        assert_eq!(
            ens.predict(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn single_tree_identity_matches_tree() {
        let ens = Ensemble::new(vec![t1()], PostProcess::Identity, 1).unwrap();
        for x in [-3.0, 0.0, 0.25, 9.0] {
            assert_eq!(ens.predict(&[x]).unwrap(), t1().predict(&[x]));
        }
    }

    #[test]
    fn leaf_regions_of_single_split() {
        let regions = t1().leaf_regions(1);
        assert_eq!(
            regions,
            vec![
                (HyperRect::new(vec![Interval::at_most(0.0)]), vec![1.0, 0.0]),
                (HyperRect::new(vec![Interval::greater_than(0.0)]), vec![0.0, 1.0]),
            ]
        );
        let stump = Tree::leaf(vec![4.0]);
        assert_eq!(stump.leaf_regions(3), vec![(HyperRect::unbounded(3), vec![4.0])]);
    }

    #[test]
    fn validation_rejects_bad_models() {
        assert!(Ensemble::new(vec![], PostProcess::Identity, 1).is_err());
        assert!(Ensemble::new(vec![t1()], PostProcess::Identity, 0).is_err());
        let three = Tree::leaf(vec![1.0, 2.0, 3.0]);
        assert!(Ensemble::new(vec![t1(), three], PostProcess::Identity, 1).is_err());
        let wide = Tree::split(4, 0.0, Tree::leaf(vec![1.0]), Tree::leaf(vec![0.0])).unwrap();
        assert!(Ensemble::new(vec![wide], PostProcess::Identity, 2).is_err());
        assert!(Tree::split(0, f64::NAN, Tree::leaf(vec![1.0]), Tree::leaf(vec![0.0])).is_err());
        assert!(Tree::split(0, 1.0, Tree::leaf(vec![1.0]), Tree::leaf(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn arena_round_trip() {
        let t = Tree::split(1, 0.5, t1(), Tree::leaf(vec![0.25, 0.75])).unwrap();
        assert_eq!(Tree::from_nodes(t.nodes()).unwrap(), t);
        let mut nodes = t.nodes().to_vec();
        if let Node::Split { right, .. } = &mut nodes[0] {
            *right = 1;
        }
        assert!(Tree::from_nodes(&nodes).is_err());
        assert!(Tree::from_nodes(&[]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[3.0]), 0);
    }

    #[test]
    fn leaf_regions_partition_and_agree_with_predict() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let ens = random_ensemble(&mut rng, 1, 4, 3, 2);
            let tree = &ens.trees()[0];
            let regions = tree.leaf_regions(ens.n_features());
            for _ in 0..200 {
                let x: Vec<f64> = (0..ens.n_features())
                    .map(|_| rng.random_range(-4i32..=4) as f64 * 0.5)
                    .collect();
                let hits: Vec<_> = regions.iter().filter(|(r, _)| r.contains(&x).unwrap()).collect();
                assert_eq!(hits.len(), 1);
                assert_eq!(hits[0].1.as_slice(), tree.predict(&x));
            }
        }
    }

    #[test]
    fn post_processing_preserves_argmax() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let ens = random_ensemble(&mut rng, 4, 3, 2, 3);
            let with = |pp| Ensemble::new(ens.trees().to_vec(), pp, ens.n_features()).unwrap();
            let (id, div, soft) = (
                with(PostProcess::Identity),
                with(PostProcess::Divisor),
                with(PostProcess::Softmax),
            );
            for _ in 0..100 {
                let x: Vec<f64> = (0..ens.n_features()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let c = id.classify(&x).unwrap();
                assert_eq!(div.classify(&x).unwrap(), c);
                assert_eq!(soft.classify(&x).unwrap(), c);
            }
        }
    }
}
