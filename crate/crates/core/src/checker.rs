//! Property checkers: three-valued predicates over (input box, output box).
//!
//! A checker answers `Pass` only when every concrete output in the box
//! satisfies the property and `Fail` only when every one violates it. On a
//! singleton output box both built-in checkers are always decisive, which is
//! what lets the refinement engine terminate.

use alloc::format;
use alloc::vec::Vec;

use crate::cells::enumerate_cells_within;
use crate::ensemble::{argmax, Ensemble};
use crate::error::Error;
use crate::interval::Interval;
use crate::rect::HyperRect;
use crate::transform::OutputSemantics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckOutcome {
    Pass,
    Fail,
    Unsure,
}

impl CheckOutcome {
    fn and(self, other: CheckOutcome) -> CheckOutcome {
        use CheckOutcome::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Pass, Pass) => Pass,
            _ => Unsure,
        }
    }

    fn or(self, other: CheckOutcome) -> CheckOutcome {
        use CheckOutcome::*;
        match (self, other) {
            (Pass, _) | (_, Pass) => Pass,
            (Fail, Fail) => Fail,
            _ => Unsure,
        }
    }
}

pub trait PropertyChecker {
    fn check(&self, input: &HyperRect, output: &HyperRect) -> CheckOutcome;

    /// Which post-processing the engine must apply before calling `check`.
    fn semantics(&self) -> OutputSemantics {
        OutputSemantics::Scores
    }
}

impl<C: PropertyChecker + ?Sized> PropertyChecker for &C {
    fn check(&self, input: &HyperRect, output: &HyperRect) -> CheckOutcome {
        (**self).check(input, output)
    }

    fn semantics(&self) -> OutputSemantics {
        (**self).semantics()
    }
}

/// Every output in the box has argmax `label` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RobustnessChecker {
    pub label: usize,
}

impl RobustnessChecker {
    pub fn new(label: usize, n_outputs: usize) -> Result<Self, Error> {
        if label >= n_outputs {
            return Err(Error::InvalidProperty(format!(
                "label {label} out of range for {n_outputs} classes"
            )));
        }
        Ok(RobustnessChecker { label })
    }
}

impl PropertyChecker for RobustnessChecker {
    fn check(&self, _input: &HyperRect, output: &HyperRect) -> CheckOutcome {
        robustness_check(self.label, output)
    }

    fn semantics(&self) -> OutputSemantics {
        OutputSemantics::Argmax
    }
}

/// Decides whether every score vector in `output` has argmax `label`.
///
/// With lowest-index tie-breaking, `label` wins against a lower index only
/// strictly and against a higher index on ties, hence the mixed strictness.
pub fn robustness_check(label: usize, output: &HyperRect) -> CheckOutcome {
    let dims = output.intervals();
    let own = dims[label];
    let mut certain = true;
    for (j, other) in dims.iter().enumerate() {
        if j == label {
            continue;
        }
        let (beats, loses) = if j < label {
            (own.lo() > other.hi(), other.lo() >= own.hi())
        } else {
            (own.lo() >= other.hi(), other.lo() > own.hi())
        };
        if loses {
            return CheckOutcome::Fail;
        }
        certain &= beats;
    }
    if certain {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Unsure
    }
}

/// Whether some vector in `output` has argmax `class`: push `class` to its
/// upper bound and every rival to its lower bound.
fn class_possible(class: usize, dims: &[Interval]) -> bool {
    let own = dims[class].hi();
    dims.iter()
        .enumerate()
        .all(|(j, other)| j == class || if j < class { own > other.lo() } else { own >= other.lo() })
}

/// Declarative assertion over the ensemble output. Class indices are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Assertion {
    /// The predicted class is one of these.
    ClassIn(Vec<usize>),
    ScoreLe {
        class: usize,
        bound: f64,
    },
    ScoreGe {
        class: usize,
        bound: f64,
    },
    /// `score[winner] > score[loser]`.
    Dominates {
        winner: usize,
        loser: usize,
    },
    And(Vec<Assertion>),
    Or(Vec<Assertion>),
}

impl Assertion {
    pub fn validate(&self, n_outputs: usize) -> Result<(), Error> {
        let in_range = |c: usize| {
            if c < n_outputs {
                Ok(())
            } else {
                Err(Error::InvalidProperty(format!(
                    "class {c} out of range for {n_outputs} classes"
                )))
            }
        };
        match self {
            Assertion::ClassIn(classes) => {
                if classes.is_empty() {
                    return Err(Error::InvalidProperty("class set is empty".into()));
                }
                classes.iter().try_for_each(|&c| in_range(c))
            }
            Assertion::ScoreLe { class, bound } | Assertion::ScoreGe { class, bound } => {
                if bound.is_nan() {
                    return Err(Error::InvalidProperty("score bound is NaN".into()));
                }
                in_range(*class)
            }
            Assertion::Dominates { winner, loser } => {
                in_range(*winner)?;
                in_range(*loser)
            }
            Assertion::And(parts) | Assertion::Or(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidProperty("empty conjunction or disjunction".into()));
                }
                parts.iter().try_for_each(|p| p.validate(n_outputs))
            }
        }
    }

    /// Kleene three-valued evaluation over an output box.
    pub fn evaluate(&self, output: &HyperRect) -> CheckOutcome {
        let dims = output.intervals();
        match self {
            Assertion::ClassIn(classes) => {
                let mut any_inside = false;
                let mut any_outside = false;
                for c in (0..dims.len()).filter(|&c| class_possible(c, dims)) {
                    if classes.contains(&c) {
                        any_inside = true;
                    } else {
                        any_outside = true;
                    }
                }
                match (any_inside, any_outside) {
                    (true, false) => CheckOutcome::Pass,
                    (false, true) => CheckOutcome::Fail,
                    _ => CheckOutcome::Unsure,
                }
            }
            Assertion::ScoreLe { class, bound } => {
                let s = dims[*class];
                decide(s.hi() <= *bound, s.lo() > *bound)
            }
            Assertion::ScoreGe { class, bound } => {
                let s = dims[*class];
                decide(s.lo() >= *bound, s.hi() < *bound)
            }
            Assertion::Dominates { winner, loser } => {
                let (w, l) = (dims[*winner], dims[*loser]);
                decide(w.lo() > l.hi(), w.hi() <= l.lo())
            }
            Assertion::And(parts) => parts
                .iter()
                .map(|p| p.evaluate(output))
                .fold(CheckOutcome::Pass, CheckOutcome::and),
            Assertion::Or(parts) => parts
                .iter()
                .map(|p| p.evaluate(output))
                .fold(CheckOutcome::Fail, CheckOutcome::or),
        }
    }

    /// Concrete truth value on one output vector.
    pub fn holds(&self, scores: &[f64]) -> bool {
        match self {
            Assertion::ClassIn(classes) => classes.contains(&argmax(scores)),
            Assertion::ScoreLe { class, bound } => scores[*class] <= *bound,
            Assertion::ScoreGe { class, bound } => scores[*class] >= *bound,
            Assertion::Dominates { winner, loser } => scores[*winner] > scores[*loser],
            Assertion::And(parts) => parts.iter().all(|p| p.holds(scores)),
            Assertion::Or(parts) => parts.iter().any(|p| p.holds(scores)),
        }
    }
}

fn decide(pass: bool, fail: bool) -> CheckOutcome {
    if pass {
        CheckOutcome::Pass
    } else if fail {
        CheckOutcome::Fail
    } else {
        CheckOutcome::Unsure
    }
}

/// A precondition region plus the assertion that must hold on it.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertySpec {
    pub input: HyperRect,
    pub assertion: Assertion,
    pub interpretation: OutputSemantics,
}

impl PropertySpec {
    pub fn new(input: HyperRect, assertion: Assertion, interpretation: OutputSemantics) -> Self {
        PropertySpec {
            input,
            assertion,
            interpretation,
        }
    }

    /// Checks the spec against a model's dimensions.
    pub fn validate(&self, n_features: usize, n_outputs: usize) -> Result<(), Error> {
        if self.input.dim() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                found: self.input.dim(),
            });
        }
        if self.input.is_empty() {
            return Err(Error::InvalidProperty("input region is empty".into()));
        }
        self.assertion.validate(n_outputs)
    }

    pub fn checker(&self) -> AssertionChecker<'_> {
        AssertionChecker { spec: self }
    }
}

pub fn assertion_check(spec: &PropertySpec, _input: &HyperRect, output: &HyperRect) -> CheckOutcome {
    spec.assertion.evaluate(output)
}

#[derive(Clone, Copy, Debug)]
pub struct AssertionChecker<'a> {
    spec: &'a PropertySpec,
}

impl PropertyChecker for AssertionChecker<'_> {
    fn check(&self, input: &HyperRect, output: &HyperRect) -> CheckOutcome {
        assertion_check(self.spec, input, output)
    }

    fn semantics(&self) -> OutputSemantics {
        self.spec.interpretation
    }
}

/// Open L-infinity box `(x_i - eps, x_i + eps)`, optionally clipped to a
/// feature domain.
pub fn perturbation_box(x: &[f64], eps: f64, domain: Option<&HyperRect>) -> Result<HyperRect, Error> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::NonPositiveEpsilon);
    }
    let open = HyperRect::new(x.iter().map(|&v| Interval::open(v - eps, v + eps)).collect());
    match domain {
        Some(d) => open.meet(d),
        None => Ok(open),
    }
}

/// Exact robustness by cell enumeration: true iff every cell meeting the
/// open `eps`-box around `x` classifies as `label`.
pub fn brute_force_robustness(ens: &Ensemble, x: &[f64], label: usize, eps: f64, cap: u128) -> Result<bool, Error> {
    let region = perturbation_box(x, eps, None)?;
    let mut cells = enumerate_cells_within(ens, &region, cap)?;
    Ok(cells.all(|c| argmax(&c.output) == label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PostProcess;
    use crate::testutil::two_tree_ensemble;
    use crate::DEFAULT_CELL_CAP;
    use alloc::vec;
    use proptest::prelude::*;

    fn out(bounds: &[(f64, f64)]) -> HyperRect {
        HyperRect::new(bounds.iter().map(|&(l, h)| Interval::closed(l, h)).collect())
    }

    #[test]
    fn robustness_examples() {
        assert_eq!(robustness_check(0, &out(&[(1.0, 1.0), (0.0, 0.0)])), CheckOutcome::Pass);
        assert_eq!(
            robustness_check(0, &out(&[(0.0, 0.5), (0.5, 1.0)])),
            CheckOutcome::Unsure
        );
        assert_eq!(robustness_check(1, &out(&[(0.5, 0.5), (0.5, 0.5)])), CheckOutcome::Fail);
        assert_eq!(robustness_check(0, &out(&[(0.5, 0.5), (0.5, 0.5)])), CheckOutcome::Pass);
    }

    #[test]
    fn assertion_examples() {
        let any = out(&[(0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(Assertion::ClassIn(vec![0, 1]).evaluate(&any), CheckOutcome::Pass);
        let s = out(&[(0.5, 0.9), (0.0, 0.0)]);
        assert_eq!(
            Assertion::ScoreLe { class: 0, bound: 0.4 }.evaluate(&s),
            CheckOutcome::Fail
        );
        let dom = Assertion::Dominates { winner: 1, loser: 0 };
        assert_eq!(dom.evaluate(&out(&[(0.0, 0.5), (0.5, 1.0)])), CheckOutcome::Unsure);
        assert_eq!(dom.evaluate(&out(&[(0.0, 0.4), (0.5, 1.0)])), CheckOutcome::Pass);
    }

    #[test]
    fn kleene_connectives() {
        let b = out(&[(0.0, 1.0), (2.0, 3.0)]);
        let pass = Assertion::ScoreGe { class: 1, bound: 2.0 };
        let fail = Assertion::ScoreGe { class: 0, bound: 5.0 };
        let unsure = Assertion::ScoreLe { class: 0, bound: 0.5 };
        let and = |v: Vec<Assertion>| Assertion::And(v).evaluate(&b);
        let or = |v: Vec<Assertion>| Assertion::Or(v).evaluate(&b);
        assert_eq!(and(vec![pass.clone(), unsure.clone()]), CheckOutcome::Unsure);
        assert_eq!(and(vec![unsure.clone(), fail.clone()]), CheckOutcome::Fail);
        assert_eq!(or(vec![unsure.clone(), pass.clone()]), CheckOutcome::Pass);
        assert_eq!(or(vec![fail.clone(), unsure]), CheckOutcome::Unsure);
        assert_eq!(or(vec![fail.clone(), fail]), CheckOutcome::Fail);
    }

    #[test]
    fn validation_catches_bad_classes() {
        assert!(Assertion::ClassIn(vec![2]).validate(2).is_err());
        assert!(Assertion::And(vec![]).validate(2).is_err());
        assert!(Assertion::Dominates { winner: 0, loser: 3 }.validate(2).is_err());
        assert!(Assertion::Or(vec![Assertion::ClassIn(vec![1])]).validate(2).is_ok());
        assert!(RobustnessChecker::new(2, 2).is_err());
    }

    #[test]
    fn perturbation_box_is_open_and_clippable() {
        let b = perturbation_box(&[5.0], 1.0, None).unwrap();
        assert_eq!(b, HyperRect::new(vec![Interval::open(4.0, 6.0)]));
        let domain = HyperRect::closed(&[0.0], &[255.0]).unwrap();
        let b = perturbation_box(&[0.0], 1.0, Some(&domain)).unwrap();
        assert_eq!(b, HyperRect::new(vec![Interval::new(0.0, true, 1.0, false)]));
        assert!(b.contains(&[0.0]).unwrap());
        assert_eq!(perturbation_box(&[0.0], 0.0, None), Err(Error::NonPositiveEpsilon));
    }

    #[test]
    fn brute_force_examples() {
        let ens = two_tree_ensemble(PostProcess::Divisor);
        assert!(brute_force_robustness(&ens, &[1.0], 0, 0.5, DEFAULT_CELL_CAP).unwrap());
        assert!(!brute_force_robustness(&ens, &[1.9], 0, 0.5, DEFAULT_CELL_CAP).unwrap());
        let constant = Ensemble::new(
            vec![crate::ensemble::Tree::leaf(vec![0.2, 0.7, 0.1])],
            PostProcess::Softmax,
            2,
        )
        .unwrap();
        assert!(brute_force_robustness(&constant, &[3.0, -8.0], 1, 10.0, DEFAULT_CELL_CAP).unwrap());
    }

    fn arb_output(m: usize) -> impl Strategy<Value = HyperRect> {
        proptest::collection::vec((-4i32..4, 0i32..4), m).prop_map(|v| {
            HyperRect::new(
                v.into_iter()
                    .map(|(l, w)| Interval::closed(l as f64 * 0.25, (l + w) as f64 * 0.25))
                    .collect(),
            )
        })
    }

    fn arb_assertion(m: usize) -> impl Strategy<Value = Assertion> {
        let leaf = prop_oneof![
            proptest::collection::vec(0..m, 1..=m).prop_map(Assertion::ClassIn),
            (0..m, -4i32..4).prop_map(|(c, b)| Assertion::ScoreLe {
                class: c,
                bound: b as f64 * 0.25
            }),
            (0..m, -4i32..4).prop_map(|(c, b)| Assertion::ScoreGe {
                class: c,
                bound: b as f64 * 0.25
            }),
            (0..m, 0..m).prop_map(|(w, l)| Assertion::Dominates { winner: w, loser: l }),
        ];
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..3).prop_map(Assertion::And),
                proptest::collection::vec(inner, 1..3).prop_map(Assertion::Or),
            ]
        })
    }

    fn corners_and_grid(b: &HyperRect) -> Vec<Vec<f64>> {
        // Every vector on the quarter grid inside the box: the same grid the
        // boxes and bounds are drawn from, so boundary cases are all covered.
        let mut pts: Vec<Vec<f64>> = vec![vec![]];
        for iv in b.intervals() {
            let mut next = Vec::new();
            let mut v = iv.lo();
            while v <= iv.hi() {
                for p in &pts {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
                v += 0.25;
            }
            pts = next;
        }
        pts
    }

    proptest! {
        #[test]
        fn singleton_outputs_are_decisive(v in proptest::collection::vec(-4i32..4, 3), label in 0usize..3,
                                          a in arb_assertion(3)) {
            let p: Vec<f64> = v.iter().map(|&x| x as f64 * 0.25).collect();
            let b = HyperRect::point(&p);
            prop_assert_ne!(robustness_check(label, &b), CheckOutcome::Unsure);
            let expected = if argmax(&p) == label { CheckOutcome::Pass } else { CheckOutcome::Fail };
            prop_assert_eq!(robustness_check(label, &b), expected);
            let outcome = a.evaluate(&b);
            prop_assert_ne!(outcome, CheckOutcome::Unsure);
            prop_assert_eq!(outcome == CheckOutcome::Pass, a.holds(&p));
        }

        #[test]
        fn three_valued_soundness(b in arb_output(3), a in arb_assertion(3), label in 0usize..3) {
            let pts = corners_and_grid(&b);
            match a.evaluate(&b) {
                CheckOutcome::Pass => prop_assert!(pts.iter().all(|p| a.holds(p))),
                CheckOutcome::Fail => prop_assert!(pts.iter().all(|p| !a.holds(p))),
                CheckOutcome::Unsure => {}
            }
            match robustness_check(label, &b) {
                CheckOutcome::Pass => prop_assert!(pts.iter().all(|p| argmax(p) == label)),
                CheckOutcome::Fail => prop_assert!(pts.iter().all(|p| argmax(p) != label)),
                CheckOutcome::Unsure => {}
            }
        }

        #[test]
        fn decisiveness_is_monotone(outer in arb_output(3),
                                    cuts in proptest::collection::vec((0.0..0.5f64, 0.0..0.5f64), 3),
                                    label in 0usize..3) {
            let inner = HyperRect::new(outer.intervals().iter().zip(&cuts).map(|(iv, &(a, b))| {
                let w = iv.width();
                Interval::closed(iv.lo() + a * w, iv.hi() - b * w)
            }).collect());
            prop_assert!(inner.is_subset_of(&outer).unwrap());
            let o = robustness_check(label, &outer);
            if o != CheckOutcome::Unsure {
                prop_assert_eq!(robustness_check(label, &inner), o);
            }
        }
    }
}
