//! Native model files.
//!
//! ```text
//! treecert-model 1
//! features 1
//! outputs 2
//! post_process divisor
//! trees 2
//! tree 0
//! split 0 0.0
//!   leaf 1.0 0.0
//!   leaf 0.0 1.0
//! tree 1
//! split 0 2.0
//!   leaf 1.0 0.0
//!   leaf 0.0 1.0
//! ```
//!
//! Nodes are listed in pre-order: a `split <feature> <threshold>` record is
//! followed by its left subtree (taken when `x[feature] <= threshold`) and
//! then its right subtree. Indentation is cosmetic. Tree order in the file is
//! the order in which the engine refines.

use std::fmt::Write as _;
use std::path::Path;

use treecert_core::{Ensemble, Node, PostProcess, Tree};

use super::lines::{fmt_f64, parse_finite, parse_token, Lines};
use crate::error::{Error, Result};

pub const MAGIC: &str = "treecert-model";
pub const VERSION: u32 = 1;

/// Nesting limit for tree records; deeper trees are rejected instead of
/// exhausting the stack.
pub(crate) const MAX_DEPTH: usize = 1024;

pub fn parse(text: &str) -> Result<Ensemble> {
    let mut lines = Lines::new(text);
    read_magic(&mut lines, MAGIC)?;
    let n_features: usize = lines.keyed_value("features")?;
    let n_outputs: usize = lines.keyed_value("outputs")?;
    let (pp_line, pp) = lines.keyed("post_process")?;
    let post_process = match pp.as_slice() {
        ["identity"] => PostProcess::Identity,
        ["divisor"] => PostProcess::Divisor,
        ["softmax"] => PostProcess::Softmax,
        _ => {
            return Err(Error::parse(
                pp_line,
                "post_process must be one of identity, divisor, softmax",
            ))
        }
    };
    let n_trees: usize = lines.keyed_value("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for index in 0..n_trees {
        read_tree_header(&mut lines, index)?;
        let tree = read_node(
            &mut lines,
            0,
            &mut |line, values: &[&str]| {
                if values.len() != n_outputs {
                    return Err(Error::parse(
                        line,
                        format!("tree {index}: leaf has {} values, expected {n_outputs}", values.len()),
                    ));
                }
                let value = values
                    .iter()
                    .map(|v| parse_finite(line, v, "leaf value"))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Tree::leaf(value))
            },
            &mut |line, feature, threshold, left, right| {
                if feature >= n_features {
                    return Err(Error::parse(
                        line,
                        format!("tree {index}: feature {feature} out of range for {n_features} features"),
                    ));
                }
                Tree::split(feature, threshold, left, right).map_err(|e| Error::parse(line, e.to_string()))
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
    Ok(Ensemble::new(trees, post_process, n_features)?)
}

pub fn serialize(ens: &Ensemble) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "features {}", ens.n_features());
    let _ = writeln!(out, "outputs {}", ens.n_outputs());
    let pp = match ens.post_process() {
        PostProcess::Identity => "identity",
        PostProcess::Divisor => "divisor",
        PostProcess::Softmax => "softmax",
    };
    let _ = writeln!(out, "post_process {pp}");
    let _ = writeln!(out, "trees {}", ens.n_trees());
    for (i, tree) in ens.trees().iter().enumerate() {
        let _ = writeln!(out, "tree {i}");
        write_node(&mut out, tree.nodes(), 0, 0, &|v: &Vec<f64>| {
            v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
        });
    }
    out
}

pub fn read(path: &Path) -> Result<Ensemble> {
    parse(&super::read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn write(path: &Path, ens: &Ensemble) -> Result<()> {
    super::write_text(path, &serialize(ens))
}

pub(crate) fn read_magic(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    let (n, rest) = lines.keyed(magic)?;
    match rest.as_slice() {
        [v] if parse_token::<u32>(n, v, "version")? == VERSION => Ok(()),
        [v] => Err(Error::parse(n, format!("unsupported {magic} version {v}"))),
        _ => Err(Error::parse(n, format!("expected `{magic} {VERSION}`"))),
    }
}

pub(crate) fn read_tree_header(lines: &mut Lines<'_>, index: usize) -> Result<()> {
    let (n, rest) = lines.keyed("tree")?;
    match rest.as_slice() {
        [v] if parse_token::<usize>(n, v, "tree index")? == index => Ok(()),
        _ => Err(Error::parse(n, format!("expected `tree {index}`"))),
    }
}

/// Recursive pre-order reader shared by the native and alternate formats.
pub(crate) fn read_node<T>(
    lines: &mut Lines<'_>,
    depth: usize,
    leaf: &mut dyn FnMut(usize, &[&str]) -> Result<T>,
    split: &mut dyn FnMut(usize, usize, f64, T, T) -> Result<T>,
) -> Result<T> {
    let (n, line) = lines.require("a `split` or `leaf` record")?;
    let mut tokens = line.split_whitespace();
    match tokens.next() {
        Some("leaf") => leaf(n, &tokens.collect::<Vec<_>>()),
        Some("split") => {
            if depth >= MAX_DEPTH {
                return Err(Error::parse(n, format!("tree deeper than {MAX_DEPTH} levels")));
            }
            let rest: Vec<&str> = tokens.collect();
            let [feature, threshold] = rest.as_slice() else {
                return Err(Error::parse(n, "`split` takes a feature index and a threshold"));
            };
            let feature: usize = parse_token(n, feature, "feature index")?;
            let threshold = parse_finite(n, threshold, "threshold")?;
            let left = read_node(lines, depth + 1, leaf, split)?;
            let right = read_node(lines, depth + 1, leaf, split)?;
            split(n, feature, threshold, left, right)
        }
        Some(other) => Err(Error::parse(n, format!("expected `split` or `leaf`, found `{other}`"))),
        None => unreachable!("blank lines are skipped"),
    }
}

fn write_node(out: &mut String, nodes: &[Node], i: usize, depth: usize, leaf: &dyn Fn(&Vec<f64>) -> String) {
    let indent = "  ".repeat(depth);
    match &nodes[i] {
        Node::Leaf { value } => {
            let _ = writeln!(out, "{indent}leaf {}", leaf(value));
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "{indent}split {feature} {}", fmt_f64(*threshold));
            write_node(out, nodes, *left, depth + 1, leaf);
            write_node(out, nodes, *right, depth + 1, leaf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TREES: &str = "\
treecert-model 1
features 1
outputs 2
post_process divisor
trees 2
tree 0
split 0 0.0
  leaf 1.0 0.0
  leaf 0.0 1.0
tree 1
split 0 2.0
  leaf 1.0 0.0
  leaf 0.0 1.0
";

    #[test]
    fn parses_and_reserializes_canonical_text() {
        let ens = parse(TWO_TREES).unwrap();
        assert_eq!(ens.n_trees(), 2);
        assert_eq!(ens.post_process(), PostProcess::Divisor);
        assert_eq!(ens.predict(&[1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(serialize(&ens), TWO_TREES);
        assert_eq!(parse(&serialize(&ens)).unwrap(), ens);
    }

    #[test]
    fn inexact_threshold_survives_bitwise() {
        let t = Tree::split(0, 0.1, Tree::leaf(vec![1.0]), Tree::leaf(vec![-0.0])).unwrap();
        let ens = Ensemble::new(vec![t], PostProcess::Identity, 1).unwrap();
        let back = parse(&serialize(&ens)).unwrap();
        let Node::Split { threshold, .. } = back.trees()[0].node(0) else {
            panic!()
        };
        assert_eq!(threshold.to_bits(), 0.1f64.to_bits());
        let Node::Leaf { value } = back.trees()[0].node(2) else {
            panic!()
        };
        assert_eq!(value[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn wrong_leaf_arity_names_the_tree() {
        let bad = TWO_TREES.replace("  leaf 0.0 1.0\ntree 1", "  leaf 0.0\ntree 1");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line 9"), "{err}");
        assert!(err.contains("tree 0"), "{err}");
    }

    #[test]
    fn rejects_malformed_files() {
        let cases = [
            TWO_TREES.replace("treecert-model 1", "treecert-model 7"),
            TWO_TREES.replace("post_process divisor", "post_process mean"),
            TWO_TREES.replace("split 0 2.0", "split 3 2.0"),
            TWO_TREES.replace("split 0 2.0", "split 0 NaN"),
            TWO_TREES.replace("split 0 2.0", "split 0 inf"),
            TWO_TREES.replace("trees 2", "trees 3"),
            TWO_TREES.replace("trees 2", "trees 1"),
            TWO_TREES.replace("tree 1", "tree 4"),
            TWO_TREES.replace("leaf 1.0 0.0", "node 1.0 0.0"),
        ];
        for case in &cases {
            assert!(matches!(parse(case), Err(Error::Parse { .. })), "accepted:\n{case}");
        }
    }
}
