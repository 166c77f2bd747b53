use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::ensemble::{Ensemble, PostProcess, Tree};

/// `x0 <= 0 -> (1, 0)`, else `(0, 1)`.
pub fn t1() -> Tree {
    Tree::split(0, 0.0, Tree::leaf(vec![1.0, 0.0]), Tree::leaf(vec![0.0, 1.0])).unwrap()
}

/// `x0 <= 2 -> (1, 0)`, else `(0, 1)`.
pub fn t2() -> Tree {
    Tree::split(0, 2.0, Tree::leaf(vec![1.0, 0.0]), Tree::leaf(vec![0.0, 1.0])).unwrap()
}

pub fn two_tree_ensemble(pp: PostProcess) -> Ensemble {
    Ensemble::new(vec![t1(), t2()], pp, 1).unwrap()
}

/// Random tree over a coarse grid: thresholds are multiples of 0.5 in
/// [-2, 2] and leaf components multiples of 0.25 in [-1, 1], so sums are
/// exact and sampled points often land on split boundaries.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, n: usize, m: usize) -> Tree {
    if depth == 0 || rng.random_bool(0.2) {
        return Tree::leaf((0..m).map(|_| rng.random_range(-4i32..=4) as f64 * 0.25).collect());
    }
    let feature = rng.random_range(0..n);
    let threshold = rng.random_range(-4i32..=4) as f64 * 0.5;
    let left = random_tree(rng, depth - 1, n, m);
    let right = random_tree(rng, depth - 1, n, m);
    Tree::split(feature, threshold, left, right).unwrap()
}

pub fn random_ensemble<R: Rng>(
    rng: &mut R,
    max_trees: usize,
    max_depth: usize,
    max_n: usize,
    max_m: usize,
) -> Ensemble {
    let b = rng.random_range(1..=max_trees);
    let d = rng.random_range(0..=max_depth);
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let pp = match rng.random_range(0..3) {
        0 => PostProcess::Identity,
        1 => PostProcess::Divisor,
        _ => PostProcess::Softmax,
    };
    let trees: Vec<Tree> = (0..b).map(|_| random_tree(rng, d, n, m)).collect();
    Ensemble::new(trees, pp, n).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-6i32..=6) as f64 * 0.5).collect()
}
