//! Alternate model files with integer-count leaves, their conversion to
//! native ensembles, and translation validation of that conversion.
//!
//! ```text
//! treecert-alt 1
//! features 1
//! classes 2
//! trees 1
//! tree 0
//! split 0 0.5
//!   leaf 3 1
//!   leaf 0 2
//! ```
//!
//! The format differs from the native one in two ways that the conversion has
//! to get right: a split sends `x` left iff `x[feature] < threshold`
//! (strict), and leaves hold non-negative 32-bit class counts that are
//! normalised into frequencies. A converted model averages its trees.
//!
//! Validation converts a model, inverts the result and diffs the two
//! alternate models node by node. Exact inversion of the normalised leaves
//! is possible only through the [`Provenance`] recorded by [`convert`].

use std::fmt::{self, Write as _};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use treecert_core::{argmax, Ensemble, Node, PostProcess, Tree};

use super::lines::{fmt_f64, parse_token, Lines};
use super::model::{read_magic, read_node, read_tree_header};
use crate::error::{Error, Result};

pub const MAGIC: &str = "treecert-alt";

#[derive(Clone, Debug, PartialEq)]
pub enum AltNode {
    /// Left iff `x[feature] < threshold`.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<AltNode>,
        right: Box<AltNode>,
    },
    Leaf(Vec<u32>),
}

impl AltNode {
    fn predict(&self, x: &[f64]) -> &[u32] {
        let mut node = self;
        loop {
            match node {
                AltNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
                AltNode::Leaf(counts) => return counts,
            }
        }
    }

    fn visit_thresholds(&self, f: &mut impl FnMut(usize, f64)) {
        if let AltNode::Split {
            feature,
            threshold,
            left,
            right,
        } = self
        {
            f(*feature, *threshold);
            left.visit_thresholds(f);
            right.visit_thresholds(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AltModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<AltNode>,
}

impl AltModel {
    /// Class predicted by the model under its own semantics: strict routing
    /// and averaged vote frequencies.
    pub fn classify(&self, x: &[f64]) -> usize {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let counts = tree.predict(x);
            let total: u64 = counts.iter().map(|&c| c as u64).sum();
            for (v, &c) in votes.iter_mut().zip(counts) {
                *v += c as f64 / total as f64;
            }
        }
        let b = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= b);
        argmax(&votes)
    }
}

pub fn parse(text: &str) -> Result<AltModel> {
    let mut lines = Lines::new(text);
    read_magic(&mut lines, MAGIC)?;
    let n_features: usize = lines.keyed_value("features")?;
    let n_classes: usize = lines.keyed_value("classes")?;
    let n_trees: usize = lines.keyed_value("trees")?;
    if n_features == 0 || n_classes == 0 || n_trees == 0 {
        return Err(Error::parse(
            lines.line_number(),
            "features, classes and trees must all be positive",
        ));
    }
    let mut trees = Vec::with_capacity(n_trees);
    for index in 0..n_trees {
        read_tree_header(&mut lines, index)?;
        let tree = read_node(
            &mut lines,
            0,
            &mut |line, values: &[&str]| {
                if values.len() != n_classes {
                    return Err(Error::parse(
                        line,
                        format!("tree {index}: leaf has {} counts, expected {n_classes}", values.len()),
                    ));
                }
                let counts = values
                    .iter()
                    .map(|v| parse_token::<u32>(line, v, "leaf count"))
                    .collect::<Result<Vec<u32>>>()?;
                if counts.iter().all(|&c| c == 0) {
                    return Err(Error::parse(line, format!("tree {index}: leaf counts are all zero")));
                }
                Ok(AltNode::Leaf(counts))
            },
            &mut |line, feature, threshold, left, right| {
                if feature >= n_features {
                    return Err(Error::parse(
                        line,
                        format!("tree {index}: feature {feature} out of range for {n_features} features"),
                    ));
                }
                Ok(AltNode::Split {
                    feature,
                    threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            },
        )?;
        trees.push(tree);
    }
    if let Some((line, extra)) = lines.next_line() {
        return Err(Error::parse(
            line,
            format!("trailing content after {n_trees} trees: `{extra}`"),
        ));
    }
    Ok(AltModel {
        n_features,
        n_classes,
        trees,
    })
}

pub fn serialize(model: &AltModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {}", super::model::VERSION);
    let _ = writeln!(out, "features {}", model.n_features);
    let _ = writeln!(out, "classes {}", model.n_classes);
    let _ = writeln!(out, "trees {}", model.trees.len());
    for (i, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {i}");
        write_node(&mut out, tree, 0);
    }
    out
}

fn write_node(out: &mut String, node: &AltNode, depth: usize) {
    let indent = "  ".repeat(depth);
    match node {
        AltNode::Leaf(counts) => {
            let counts: Vec<String> = counts.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{indent}leaf {}", counts.join(" "));
        }
        AltNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "{indent}split {feature} {}", fmt_f64(*threshold));
            write_node(out, left, depth + 1);
            write_node(out, right, depth + 1);
        }
    }
}

pub fn read(path: &Path) -> Result<AltModel> {
    parse(&super::read_text(path)?).map_err(|e| e.in_file(path))
}

/// Class counts to frequencies: each component divided by the total.
pub fn leaf_normalize(counts: &[u32]) -> Result<Vec<f64>> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(Error::Invalid(
            "cannot normalise a leaf whose counts sum to zero".into(),
        ));
    }
    let total = total as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Original integer leaves of a converted model, per tree in pre-order.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub leaves: Vec<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Converted {
    pub ensemble: Ensemble,
    pub provenance: Provenance,
}

/// Strict-routing threshold to the equivalent inclusive one: for floats,
/// `x < t` holds exactly when `x <= next_down(t)`.
fn to_inclusive(t: f64) -> Option<f64> {
    let v = t.next_down();
    v.is_finite().then_some(v)
}

fn to_strict(t: f64) -> Option<f64> {
    let v = t.next_up();
    // next_up(-tiny) is -0.0; both zeros route identically, keep the positive one.
    let v = if v == 0.0 { 0.0 } else { v };
    v.is_finite().then_some(v)
}

pub fn convert(model: &AltModel) -> Result<Converted> {
    let mut trees = Vec::with_capacity(model.trees.len());
    let mut provenance = Vec::with_capacity(model.trees.len());
    for (i, root) in model.trees.iter().enumerate() {
        let mut leaves = Vec::new();
        trees.push(convert_node(root, i, &mut leaves)?);
        provenance.push(leaves);
    }
    Ok(Converted {
        ensemble: Ensemble::new(trees, PostProcess::Divisor, model.n_features)?,
        provenance: Provenance { leaves: provenance },
    })
}

fn convert_node(node: &AltNode, tree: usize, leaves: &mut Vec<Vec<u32>>) -> Result<Tree> {
    match node {
        AltNode::Leaf(counts) => {
            leaves.push(counts.clone());
            Ok(Tree::leaf(leaf_normalize(counts)?))
        }
        AltNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let t = to_inclusive(*threshold).ok_or_else(|| {
                Error::Invalid(format!(
                    "tree {tree}: threshold {threshold} has no inclusive equivalent"
                ))
            })?;
            let l = convert_node(left, tree, leaves)?;
            let r = convert_node(right, tree, leaves)?;
            Ok(Tree::split(*feature, t, l, r)?)
        }
    }
}

/// A node where two models disagree. `path` spells the route from the root
/// with `L`/`R`; an empty path is the root, and `tree: None` is the header.
#[derive(Clone, Debug, PartialEq)]
pub struct Discrepancy {
    pub tree: Option<usize>,
    pub path: String,
    pub field: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tree {
            Some(t) => write!(f, "tree {t} node /{}: ", self.path)?,
            None => f.write_str("header: ")?,
        }
        write!(f, "{} expected {} found {}", self.field, self.expected, self.found)
    }
}

/// Converts a native ensemble back to the alternate format. Leaves can only
/// be recovered from provenance, and only where the ensemble's leaf still
/// equals the normalised provenance counts bit for bit; every leaf or
/// threshold that cannot be inverted is reported.
pub fn invert(ens: &Ensemble, provenance: Option<&Provenance>) -> Result<AltModel, Vec<Discrepancy>> {
    let Some(provenance) = provenance else {
        return Err(vec![Discrepancy {
            tree: None,
            path: String::new(),
            field: "provenance".into(),
            expected: "integer leaf provenance".into(),
            found: "none (normalised leaves are not invertible)".into(),
        }]);
    };
    let mut problems = Vec::new();
    if ens.post_process() != PostProcess::Divisor {
        problems.push(Discrepancy {
            tree: None,
            path: String::new(),
            field: "post_process".into(),
            expected: format!("{:?}", PostProcess::Divisor),
            found: format!("{:?}", ens.post_process()),
        });
    }
    if provenance.leaves.len() != ens.n_trees() {
        problems.push(Discrepancy {
            tree: None,
            path: String::new(),
            field: "provenance trees".into(),
            expected: ens.n_trees().to_string(),
            found: provenance.leaves.len().to_string(),
        });
        return Err(problems);
    }
    let mut trees = Vec::with_capacity(ens.n_trees());
    for (i, (tree, leaves)) in ens.trees().iter().zip(&provenance.leaves).enumerate() {
        let mut next_leaf = 0;
        let mut path = String::new();
        let node = invert_node(tree.nodes(), 0, i, leaves, &mut next_leaf, &mut path, &mut problems);
        if next_leaf != leaves.len() {
            problems.push(Discrepancy {
                tree: Some(i),
                path: String::new(),
                field: "leaf count".into(),
                expected: leaves.len().to_string(),
                found: next_leaf.to_string(),
            });
        }
        trees.push(node);
    }
    if problems.is_empty() {
        Ok(AltModel {
            n_features: ens.n_features(),
            n_classes: ens.n_outputs(),
            trees,
        })
    } else {
        Err(problems)
    }
}

fn invert_node(
    nodes: &[Node],
    i: usize,
    tree: usize,
    leaves: &[Vec<u32>],
    next_leaf: &mut usize,
    path: &mut String,
    problems: &mut Vec<Discrepancy>,
) -> AltNode {
    match &nodes[i] {
        Node::Leaf { value } => {
            let k = *next_leaf;
            *next_leaf += 1;
            let Some(counts) = leaves.get(k) else {
                problems.push(Discrepancy {
                    tree: Some(tree),
                    path: path.clone(),
                    field: "leaf".into(),
                    expected: "provenance entry".into(),
                    found: "none".into(),
                });
                return AltNode::Leaf(Vec::new());
            };
            let same = leaf_normalize(counts)
                .map(|n| n.len() == value.len() && n.iter().zip(value).all(|(a, b)| a.to_bits() == b.to_bits()))
                .unwrap_or(false);
            if !same {
                problems.push(Discrepancy {
                    tree: Some(tree),
                    path: path.clone(),
                    field: "leaf".into(),
                    expected: format!("normalised {counts:?}"),
                    found: format!("{value:?}"),
                });
            }
            AltNode::Leaf(counts.clone())
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let strict = to_strict(*threshold).unwrap_or_else(|| {
                problems.push(Discrepancy {
                    tree: Some(tree),
                    path: path.clone(),
                    field: "threshold".into(),
                    expected: "a finite strict threshold".into(),
                    found: fmt_f64(*threshold),
                });
                *threshold
            });
            path.push('L');
            let l = invert_node(nodes, *left, tree, leaves, next_leaf, path, problems);
            path.pop();
            path.push('R');
            let r = invert_node(nodes, *right, tree, leaves, next_leaf, path, problems);
            path.pop();
            AltNode::Split {
                feature: *feature,
                threshold: strict,
                left: Box::new(l),
                right: Box::new(r),
            }
        }
    }
}

/// Node-by-node differences between two alternate models. Trees are compared
/// by position, so a reordering shows up as differences.
pub fn structural_diff(expected: &AltModel, found: &AltModel) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let header = |field: &str, e: usize, f: usize, out: &mut Vec<Discrepancy>| {
        if e != f {
            out.push(Discrepancy {
                tree: None,
                path: String::new(),
                field: field.into(),
                expected: e.to_string(),
                found: f.to_string(),
            });
        }
    };
    header("features", expected.n_features, found.n_features, &mut out);
    header("classes", expected.n_classes, found.n_classes, &mut out);
    header("trees", expected.trees.len(), found.trees.len(), &mut out);
    for (i, (a, b)) in expected.trees.iter().zip(&found.trees).enumerate() {
        diff_node(a, b, i, &mut String::new(), &mut out);
    }
    out
}

fn diff_node(a: &AltNode, b: &AltNode, tree: usize, path: &mut String, out: &mut Vec<Discrepancy>) {
    let mut push = |field: &str, e: String, f: String| {
        out.push(Discrepancy {
            tree: Some(tree),
            path: path.clone(),
            field: field.into(),
            expected: e,
            found: f,
        })
    };
    match (a, b) {
        (AltNode::Leaf(x), AltNode::Leaf(y)) => {
            if x != y {
                push("leaf", format!("{x:?}"), format!("{y:?}"));
            }
        }
        (
            AltNode::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            AltNode::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => {
            if fa != fb {
                push("feature", fa.to_string(), fb.to_string());
            }
            if ta.to_bits() != tb.to_bits() {
                push("threshold", fmt_f64(*ta), fmt_f64(*tb));
            }
            path.push('L');
            diff_node(la, lb, tree, path, out);
            path.pop();
            path.push('R');
            diff_node(ra, rb, tree, path, out);
            path.pop();
        }
        (x, y) => push("kind", kind(x).into(), kind(y).into()),
    }
}

fn kind(n: &AltNode) -> &'static str {
    match n {
        AltNode::Leaf(_) => "leaf",
        AltNode::Split { .. } => "split",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub discrepancies: Vec<Discrepancy>,
    /// Whether the inverted model serializes to exactly the original text.
    pub byte_identical: bool,
    pub semantic_samples: usize,
    /// Sampled inputs on which the original and converted models classify
    /// differently.
    pub semantic_mismatches: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.discrepancies.is_empty() && self.byte_identical && self.semantic_mismatches == 0
    }
}

pub const SEMANTIC_SAMPLES: usize = 1000;

/// Checks that converting `original` and inverting the result reproduces it.
pub fn roundtrip_validate(original: &AltModel) -> ValidationReport {
    roundtrip_validate_with(original, None, |_| {})
}

/// Like [`roundtrip_validate`], comparing bytes against `original_text` when
/// given (otherwise against the canonical serialization), and letting
/// `inject` tamper with the converted model before inversion.
pub fn roundtrip_validate_with(
    original: &AltModel,
    original_text: Option<&str>,
    inject: impl FnOnce(&mut Converted),
) -> ValidationReport {
    let canonical;
    let original_text = match original_text {
        Some(t) => t,
        None => {
            canonical = serialize(original);
            &canonical
        }
    };
    let mut converted = match convert(original) {
        Ok(c) => c,
        Err(e) => {
            return ValidationReport {
                discrepancies: vec![Discrepancy {
                    tree: None,
                    path: String::new(),
                    field: "conversion".into(),
                    expected: "success".into(),
                    found: e.to_string(),
                }],
                byte_identical: false,
                semantic_samples: 0,
                semantic_mismatches: 0,
            }
        }
    };
    inject(&mut converted);
    let (discrepancies, byte_identical) = match invert(&converted.ensemble, Some(&converted.provenance)) {
        Ok(back) => (structural_diff(original, &back), serialize(&back) == original_text),
        Err(problems) => (problems, false),
    };
    let (semantic_samples, semantic_mismatches) = semantic_check(original, &converted.ensemble);
    ValidationReport {
        discrepancies,
        byte_identical,
        semantic_samples,
        semantic_mismatches,
    }
}

/// Compares classifications at seeded random inputs. Half the coordinates
/// are drawn from the split thresholds and their float neighbours, where
/// strict and inclusive routing would disagree if translated wrongly.
fn semantic_check(original: &AltModel, converted: &Ensemble) -> (usize, usize) {
    if converted.n_features() != original.n_features || converted.n_outputs() != original.n_classes {
        return (0, SEMANTIC_SAMPLES);
    }
    let mut per_feature: Vec<Vec<f64>> = vec![Vec::new(); original.n_features];
    for tree in &original.trees {
        tree.visit_thresholds(&mut |f, t| {
            per_feature[f].extend([t, t.next_down(), t.next_up()]);
        });
    }
    let mut rng = StdRng::seed_from_u64(0x7265_6365_7274);
    let mut mismatches = 0;
    let mut x = vec![0.0; original.n_features];
    for _ in 0..SEMANTIC_SAMPLES {
        for (f, v) in x.iter_mut().enumerate() {
            let candidates = &per_feature[f];
            *v = if candidates.is_empty() || rng.random_bool(0.5) {
                let (lo, hi) = candidates
                    .iter()
                    .fold((-1.0f64, 1.0f64), |(lo, hi), &t| (lo.min(t - 1.0), hi.max(t + 1.0)));
                rng.random_range(lo..hi)
            } else {
                candidates[rng.random_range(0..candidates.len())]
            };
        }
        let ours = converted.classify(&x).ok();
        if ours != Some(original.classify(&x)) {
            mismatches += 1;
        }
    }
    (SEMANTIC_SAMPLES, mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
treecert-alt 1
features 2
classes 2
trees 2
tree 0
split 0 0.5
  leaf 3 1
  split 1 0.0
    leaf 0 2
    leaf 1 1
tree 1
split 1 0.1
  leaf 5 0
  leaf 1 4
";

    fn set_threshold(conv: &mut Converted, tree: usize, node: usize, value: f64) {
        let mut trees = conv.ensemble.clone().into_trees();
        let mut nodes = trees[tree].nodes().to_vec();
        if let Node::Split { threshold, .. } = &mut nodes[node] {
            *threshold = value;
        }
        trees[tree] = Tree::from_nodes(&nodes).unwrap();
        conv.ensemble = Ensemble::new(trees, PostProcess::Divisor, 2).unwrap();
    }

    #[test]
    fn normalizes_counts() {
        assert_eq!(leaf_normalize(&[3, 1]).unwrap(), vec![0.75, 0.25]);
        assert_eq!(leaf_normalize(&[1, 0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(leaf_normalize(&[5, 0, 0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(leaf_normalize(&[0, 0]).is_err());
        let v = leaf_normalize(&[7, 11, 13]).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() <= 3.0 * f64::EPSILON);
    }

    #[test]
    fn conversion_flips_routing_strictness() {
        let model = parse(SMALL).unwrap();
        let conv = convert(&model).unwrap();
        let Node::Split { threshold, .. } = conv.ensemble.trees()[0].node(0) else {
            panic!()
        };
        assert_eq!(*threshold, 0.5f64.next_down());
        // At the threshold itself the strict model goes right.
        for x in [
            [0.5, 0.0],
            [0.5f64.next_down(), 0.0],
            [0.5, 0.1],
            [0.5, 0.1f64.next_down()],
            [0.0, 0.0],
        ] {
            assert_eq!(conv.ensemble.classify(&x).unwrap(), model.classify(&x), "x = {x:?}");
        }
    }

    #[test]
    fn clean_round_trip() {
        let model = parse(SMALL).unwrap();
        assert_eq!(serialize(&model), SMALL);
        let report = roundtrip_validate_with(&model, Some(SMALL), |_| {});
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.semantic_samples, SEMANTIC_SAMPLES);
    }

    #[test]
    fn perturbed_threshold_is_reported_once() {
        let model = parse(SMALL).unwrap();
        let report = roundtrip_validate_with(&model, None, |c| set_threshold(c, 0, 2, 0.25));
        assert_eq!(report.discrepancies.len(), 1, "{:?}", report.discrepancies);
        let d = &report.discrepancies[0];
        assert_eq!((d.tree, d.path.as_str(), d.field.as_str()), (Some(0), "R", "threshold"));
        assert!(!report.byte_identical);
    }

    #[test]
    fn changed_post_processing_is_reported() {
        let model = parse(SMALL).unwrap();
        let report = roundtrip_validate_with(&model, None, |c| {
            c.ensemble = Ensemble::new(c.ensemble.clone().into_trees(), PostProcess::Softmax, 2).unwrap();
        });
        assert_eq!(report.discrepancies.len(), 1, "{:?}", report.discrepancies);
        assert_eq!(report.discrepancies[0].field, "post_process");
    }

    #[test]
    fn permuted_trees_are_reported() {
        let model = parse(SMALL).unwrap();
        let report = roundtrip_validate_with(&model, None, |c| {
            let mut trees = c.ensemble.clone().into_trees();
            trees.swap(0, 1);
            c.ensemble = Ensemble::new(trees, PostProcess::Divisor, 2).unwrap();
            c.provenance.leaves.swap(0, 1);
        });
        assert!(report.discrepancies.iter().any(|d| d.tree == Some(0)));
        assert!(report.discrepancies.iter().any(|d| d.tree == Some(1)));
        assert!(!report.is_clean());
    }

    #[test]
    fn invert_without_provenance_refuses() {
        let conv = convert(&parse(SMALL).unwrap()).unwrap();
        let err = invert(&conv.ensemble, None).unwrap_err();
        assert_eq!(err[0].field, "provenance");
        assert_eq!(
            invert(&conv.ensemble, Some(&conv.provenance)).unwrap(),
            parse(SMALL).unwrap()
        );
    }

    #[test]
    fn zero_thresholds_round_trip() {
        let text = SMALL
            .replace("split 0 0.5", "split 0 0.0")
            .replace("split 1 0.1", "split 1 -0.0");
        let model = parse(&text).unwrap();
        let report = roundtrip_validate_with(&model, Some(&text), |_| {});
        // +0.0 round-trips; -0.0 routes identically but comes back as +0.0.
        assert_eq!(report.discrepancies.len(), 1, "{:?}", report.discrepancies);
        assert_eq!(report.discrepancies[0].tree, Some(1));
        assert_eq!(report.semantic_mismatches, 0);
    }

    #[test]
    fn rejects_bad_leaves() {
        assert!(parse(&SMALL.replace("leaf 5 0", "leaf 0 0")).is_err());
        assert!(parse(&SMALL.replace("leaf 5 0", "leaf -1 6")).is_err());
        assert!(parse(&SMALL.replace("leaf 5 0", "leaf 5")).is_err());
    }
}
