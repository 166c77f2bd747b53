//! Seeded random models for fixtures, benchmarks and property tests.

use rand::Rng;
use treecert_core::{Ensemble, PostProcess, Tree};

use crate::format::alt::{AltModel, AltNode};

#[derive(Clone, Debug)]
pub struct Shape {
    pub trees: usize,
    pub max_depth: usize,
    pub features: usize,
    pub outputs: usize,
    pub post_process: PostProcess,
    /// Chance that a node above `max_depth` becomes a leaf anyway.
    pub early_leaf: f64,
    /// Thresholds are drawn uniformly from this range...
    pub threshold_range: (f64, f64),
    /// ...and rounded to a multiple of this step when it is positive, which
    /// makes thresholds collide across trees.
    pub threshold_step: f64,
}

impl Shape {
    pub fn new(trees: usize, max_depth: usize, features: usize, outputs: usize) -> Self {
        Shape {
            trees,
            max_depth,
            features,
            outputs,
            post_process: PostProcess::Identity,
            early_leaf: 0.2,
            threshold_range: (-2.0, 2.0),
            threshold_step: 0.25,
        }
    }

    fn threshold(&self, rng: &mut impl Rng) -> f64 {
        let (lo, hi) = self.threshold_range;
        let t = rng.random_range(lo..=hi);
        if self.threshold_step > 0.0 {
            (t / self.threshold_step).round() * self.threshold_step
        } else {
            t
        }
    }
}

pub fn random_tree(rng: &mut impl Rng, shape: &Shape) -> Tree {
    fn grow(rng: &mut impl Rng, shape: &Shape, depth: usize) -> Tree {
        if depth == shape.max_depth || (depth > 0 && rng.random_bool(shape.early_leaf)) {
            let value = (0..shape.outputs)
                .map(|_| rng.random_range(-8..=8) as f64 / 8.0)
                .collect();
            return Tree::leaf(value);
        }
        let feature = rng.random_range(0..shape.features);
        let threshold = shape.threshold(rng);
        let left = grow(rng, shape, depth + 1);
        let right = grow(rng, shape, depth + 1);
        Tree::split(feature, threshold, left, right).expect("generated children share arity")
    }
    grow(rng, shape, 0)
}

pub fn random_ensemble(rng: &mut impl Rng, shape: &Shape) -> Ensemble {
    let trees = (0..shape.trees).map(|_| random_tree(rng, shape)).collect();
    Ensemble::new(trees, shape.post_process, shape.features).expect("generated ensemble is well formed")
}

/// A random integer-leaf model. Thresholds are arbitrary finite floats with
/// a bias towards zero, small integers and their neighbours.
pub fn random_alt_model(
    rng: &mut impl Rng,
    features: usize,
    classes: usize,
    trees: usize,
    max_depth: usize,
) -> AltModel {
    fn threshold(rng: &mut impl Rng) -> f64 {
        match rng.random_range(0..5) {
            0 => 0.0,
            1 => rng.random_range(-16..=16) as f64,
            2 => (rng.random_range(-16..=16) as f64).next_up(),
            3 => rng.random_range(-1.0e6..1.0e6),
            _ => rng.random_range(-1.0..1.0),
        }
    }
    fn grow(rng: &mut impl Rng, features: usize, classes: usize, depth: usize) -> AltNode {
        if depth == 0 || rng.random_bool(0.15) {
            let mut counts: Vec<u32> = (0..classes)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        0
                    } else {
                        rng.random_range(1..=1000)
                    }
                })
                .collect();
            if counts.iter().all(|&c| c == 0) {
                counts[rng.random_range(0..classes)] = rng.random_range(1..=u32::MAX);
            }
            return AltNode::Leaf(counts);
        }
        AltNode::Split {
            feature: rng.random_range(0..features),
            threshold: threshold(rng),
            left: Box::new(grow(rng, features, classes, depth - 1)),
            right: Box::new(grow(rng, features, classes, depth - 1)),
        }
    }
    AltModel {
        n_features: features,
        n_classes: classes,
        trees: (0..trees).map(|_| grow(rng, features, classes, max_depth)).collect(),
    }
}
