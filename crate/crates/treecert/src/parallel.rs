//! Batch verification over a fixed-size worker pool.
//!
//! Each work item is an independent engine run with its own wall-clock
//! deadline. Workers pull item indices from a shared counter and send
//! finished reports back over a channel; the driver puts them back in input
//! order, so the result never depends on scheduling.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use treecert_core::{
    find_concrete_witness, perturbation_box, vote_verify, Ensemble, Error as CoreError, HyperRect, Interval,
    PropertyChecker, PropertySpec, RobustnessChecker, TransformStats, Verdict,
};

use crate::format::dataset::Sample;

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub jobs: usize,
    /// Per-item wall-clock budget; `None` runs every item to completion.
    pub deadline: Option<Duration>,
    /// Feature domain that perturbation boxes are clipped to.
    pub clamp: Option<HyperRect>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            jobs: 1,
            deadline: None,
            clamp: None,
        }
    }
}

pub struct WorkItem<C> {
    pub id: usize,
    pub region: HyperRect,
    pub checker: C,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ItemVerdict {
    Verified,
    Falsified,
    Timeout,
    Error(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemReport {
    pub id: usize,
    pub verdict: ItemVerdict,
    pub wall: Duration,
    pub stats: TransformStats,
    /// A concrete input violating the property, for falsified items.
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub verified: usize,
    pub falsified: usize,
    pub timeout: usize,
    pub errors: usize,
    pub wall: Duration,
    pub peak_depth: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchReport {
    pub items: Vec<ItemReport>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

impl BatchReport {
    fn new(items: Vec<ItemReport>, wall: Duration, warnings: Vec<String>) -> Self {
        let mut summary = Summary {
            wall,
            ..Summary::default()
        };
        for item in &items {
            match item.verdict {
                ItemVerdict::Verified => summary.verified += 1,
                ItemVerdict::Falsified => summary.falsified += 1,
                ItemVerdict::Timeout => summary.timeout += 1,
                ItemVerdict::Error(_) => summary.errors += 1,
            }
            summary.peak_depth = summary.peak_depth.max(item.stats.max_recursion_depth);
        }
        BatchReport {
            items,
            summary,
            warnings,
        }
    }

    /// True iff every item was verified: the conjunction over the batch.
    pub fn all_verified(&self) -> bool {
        self.summary.verified == self.items.len()
    }
}

fn run_item<C: PropertyChecker>(ens: &Ensemble, item: &WorkItem<C>, deadline: Option<Duration>) -> ItemReport {
    let start = Instant::now();
    let expired = || deadline.is_some_and(|d| start.elapsed() >= d);
    let result = vote_verify(ens, &item.region, &item.checker, &expired);
    let wall = start.elapsed();
    let (verdict, stats, witness) = match result {
        Ok(r) => {
            let witness = r.counterexample.map(|c| find_concrete_witness(&c.region));
            match (r.verdict, witness) {
                (Verdict::Verified, _) => (ItemVerdict::Verified, r.stats, None),
                (Verdict::Timeout, _) => (ItemVerdict::Timeout, r.stats, None),
                (Verdict::Falsified, Some(Ok(w))) => (ItemVerdict::Falsified, r.stats, Some(w)),
                (Verdict::Falsified, _) => (
                    ItemVerdict::Error("falsified without a concrete witness".into()),
                    r.stats,
                    None,
                ),
            }
        }
        Err(e) => (ItemVerdict::Error(e.to_string()), TransformStats::default(), None),
    };
    ItemReport {
        id: item.id,
        verdict,
        wall,
        stats,
        witness,
    }
}

/// Item constructor for the pool. Items are built by the worker that claims
/// them, so at most `jobs` regions are alive at once; a construction error
/// is reported as that item's verdict.
type Build<'a, C> = dyn Fn(usize) -> Result<WorkItem<C>, String> + Sync + 'a;

/// Runs items `0..count` and returns their reports in input order.
fn run_pool<C: PropertyChecker>(
    ens: &Ensemble,
    count: usize,
    build: &Build<'_, C>,
    opts: &BatchOptions,
) -> Vec<ItemReport> {
    let run = |i: usize| match build(i) {
        Ok(item) => run_item(ens, &item, opts.deadline),
        Err(msg) => ItemReport {
            id: i,
            verdict: ItemVerdict::Error(msg),
            wall: Duration::ZERO,
            stats: TransformStats::default(),
            witness: None,
        },
    };
    let jobs = opts.jobs.clamp(1, count.max(1));
    if jobs == 1 {
        return (0..count).map(run).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, run) = (&next, &run);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                if tx.send((i, run(i))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<ItemReport>> = vec![None; count];
    for (i, report) in rx {
        slots[i] = Some(report);
    }
    slots
        .into_iter()
        .map(|s| s.expect("every item index is claimed by exactly one worker"))
        .collect()
}

/// One robustness item per sample: does every input in the open
/// `eps`-box around the sample classify as its label?
pub fn is_robust_parallel(ens: &Ensemble, samples: &[Sample], eps: f64, opts: &BatchOptions) -> BatchReport {
    let start = Instant::now();
    let build = |id: usize| -> Result<WorkItem<RobustnessChecker>, String> {
        let s = &samples[id];
        let item = || -> Result<_, CoreError> {
            let checker = RobustnessChecker::new(s.label, ens.n_outputs())?;
            let region = perturbation_box(&s.features, eps, opts.clamp.as_ref())?;
            Ok(WorkItem { id, region, checker })
        };
        item().map_err(|e| e.to_string())
    };
    let reports = run_pool(ens, samples.len(), &build, opts);
    BatchReport::new(reports, start.elapsed(), Vec::new())
}

/// Splits `spec.input` into up to `split` disjoint boxes and verifies each as
/// a separate item. The property holds iff every item is verified.
pub fn verify_property_parallel(
    ens: &Ensemble,
    spec: &PropertySpec,
    split: usize,
    opts: &BatchOptions,
) -> Result<BatchReport, CoreError> {
    spec.validate(ens.n_features(), ens.n_outputs())?;
    let start = Instant::now();
    let mut warnings = Vec::new();
    let parts = bisect(&spec.input, split.max(1));
    if parts.len() < split {
        warnings.push(format!(
            "input region could only be split into {} of the requested {split} parts",
            parts.len()
        ));
    }
    let checker = spec.checker();
    let build = |id: usize| {
        Ok(WorkItem {
            id,
            region: parts[id].clone(),
            checker,
        })
    };
    let reports = run_pool(ens, parts.len(), &build, opts);
    Ok(BatchReport::new(reports, start.elapsed(), warnings))
}

/// Halves of `iv` at its midpoint: `lo..mid]` and `(mid..hi`, keeping the
/// outer inclusivity. `None` when the interval is unbounded or too narrow
/// for both halves to be non-empty.
fn halve(iv: &Interval) -> Option<(Interval, Interval)> {
    if !iv.is_bounded() {
        return None;
    }
    let mid = iv.lo() + (iv.hi() - iv.lo()) / 2.0;
    if !(mid > iv.lo() && mid < iv.hi()) {
        return None;
    }
    Some((
        Interval::new(iv.lo(), iv.lo_closed(), mid, true),
        Interval::new(mid, false, iv.hi(), iv.hi_closed()),
    ))
}

/// Breadth-first bisection along the widest splittable dimension of each box.
pub fn bisect(region: &HyperRect, parts: usize) -> Vec<HyperRect> {
    let mut queue = VecDeque::from([region.clone()]);
    let mut done = Vec::new();
    while queue.len() + done.len() < parts {
        let Some(b) = queue.pop_front() else { break };
        let widest = (0..b.dim())
            .filter_map(|i| halve(b.interval(i)).map(|h| (i, b.interval(i).width(), h)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        match widest {
            Some((i, _, (left, right))) => {
                let mut dims = b.into_intervals();
                let mut other = dims.clone();
                dims[i] = left;
                other[i] = right;
                queue.push_back(HyperRect::new(dims));
                queue.push_back(HyperRect::new(other));
            }
            None => done.push(b),
        }
    }
    done.extend(queue);
    done
}

#[cfg(test)]
mod tests {
    use super::*;
    use treecert_core::{brute_force_robustness, Assertion, OutputSemantics, PostProcess, Tree, DEFAULT_CELL_CAP};

    fn t(threshold: f64) -> Tree {
        Tree::split(0, threshold, Tree::leaf(vec![1.0, 0.0]), Tree::leaf(vec![0.0, 1.0])).unwrap()
    }

    fn ens() -> Ensemble {
        Ensemble::new(vec![t(0.0), t(2.0)], PostProcess::Divisor, 1).unwrap()
    }

    fn sample(label: usize, x: f64) -> Sample {
        Sample {
            label,
            features: vec![x],
        }
    }

    #[test]
    fn robustness_examples_and_order() {
        let samples = [sample(0, 1.0), sample(0, 1.9), sample(1, 5.0), sample(7, 0.0)];
        for jobs in [1, 3, 8] {
            let r = is_robust_parallel(
                &ens(),
                &samples,
                0.5,
                &BatchOptions {
                    jobs,
                    ..Default::default()
                },
            );
            let verdicts: Vec<_> = r.items.iter().map(|i| i.verdict.clone()).collect();
            assert_eq!(
                verdicts[..3],
                [ItemVerdict::Verified, ItemVerdict::Falsified, ItemVerdict::Verified]
            );
            assert!(matches!(verdicts[3], ItemVerdict::Error(_)));
            assert_eq!(r.items.iter().map(|i| i.id).collect::<Vec<_>>(), [0, 1, 2, 3]);
            assert_eq!((r.summary.verified, r.summary.falsified, r.summary.errors), (2, 1, 1));
            let w = r.items[1].witness.as_ref().unwrap();
            assert_ne!(ens().classify(w).unwrap(), 0);
            assert!(!r.all_verified());
        }
        let r = is_robust_parallel(&ens(), &samples[..3], 0.5, &BatchOptions::default());
        for (s, item) in samples.iter().zip(&r.items) {
            let robust = brute_force_robustness(&ens(), &s.features, s.label, 0.5, DEFAULT_CELL_CAP).unwrap();
            assert_eq!(robust, item.verdict == ItemVerdict::Verified);
        }
    }

    #[test]
    fn clamp_is_applied() {
        let samples = [sample(1, 2.5)];
        let r = is_robust_parallel(&ens(), &samples, 1.0, &BatchOptions::default());
        assert_eq!(r.items[0].verdict, ItemVerdict::Falsified);
        let opts = BatchOptions {
            clamp: Some(HyperRect::closed(&[2.5], &[10.0]).unwrap()),
            ..Default::default()
        };
        let r = is_robust_parallel(&ens(), &samples, 1.0, &opts);
        assert_eq!(r.items[0].verdict, ItemVerdict::Verified);
    }

    #[test]
    fn property_split_examples() {
        let spec = PropertySpec::new(
            HyperRect::new(vec![Interval::new(0.0, false, 2.0, true)]),
            Assertion::ClassIn(vec![0]),
            OutputSemantics::Argmax,
        );
        let r = verify_property_parallel(&ens(), &spec, 4, &BatchOptions::default()).unwrap();
        assert_eq!(r.items.len(), 4);
        assert!(r.all_verified());
        assert!(r.warnings.is_empty());

        let unbounded = PropertySpec::new(
            HyperRect::unbounded(1),
            Assertion::ClassIn(vec![1]),
            OutputSemantics::Argmax,
        );
        let r = verify_property_parallel(&ens(), &unbounded, 4, &BatchOptions::default()).unwrap();
        assert_eq!(r.items.len(), 1);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.items[0].verdict, ItemVerdict::Falsified);
    }

    #[test]
    fn bisection_partitions_the_box() {
        let b = HyperRect::new(vec![
            Interval::new(0.0, false, 4.0, true),
            Interval::closed(-1.0, 1.0),
            Interval::greater_than(3.0),
        ]);
        let parts = bisect(&b, 7);
        assert_eq!(parts.len(), 7);
        let mut rng = rand::rng();
        use rand::Rng;
        for _ in 0..2000 {
            let p = [
                rng.random_range(-1..=9) as f64 * 0.5,
                rng.random_range(-3..=3) as f64 * 0.5,
                rng.random_range(4..=8) as f64 * 0.5,
            ];
            let hits = parts.iter().filter(|r| r.contains(&p[..]).unwrap()).count();
            assert_eq!(hits, usize::from(b.contains(&p[..]).unwrap()), "{p:?}");
        }
    }
}
