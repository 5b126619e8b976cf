//! Greedy nearest-neighbor matching on a scalar score.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Without replacement; each control used at most once.
    OneToOne,
    /// With replacement; every treated unit takes its nearest control.
    ManyToOne,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::OneToOne => "one_to_one",
            MatchMode::ManyToOne => "many_to_one",
        }
    }

    /// Group-size ratio above which matching switches to many-to-one.
    pub const IMBALANCE_RATIO: f64 = 3.0;

    /// One-to-one unless one group outnumbers the other by more than 3:1.
    pub fn auto(n_treated: usize, n_control: usize) -> Self {
        let (lo, hi) = (n_treated.min(n_control) as f64, n_treated.max(n_control) as f64);
        if hi > Self::IMBALANCE_RATIO * lo {
            MatchMode::ManyToOne
        } else {
            MatchMode::OneToOne
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair<T> {
    /// Index of the treated unit.
    pub treated: usize,
    /// Index of the control unit.
    pub control: usize,
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching<T> {
    pub mode: MatchMode,
    /// In processing order.
    pub pairs: Vec<Pair<T>>,
    /// Treated units left without a partner (controls exhausted or outside
    /// the caliper).
    pub dropped_treated: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Key<'a, T> {
    score: T,
    id: &'a str,
    index: usize,
}

impl<T: Scalar> PartialEq for Key<'_, T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Key<'_, T> {}
impl<T: Scalar> PartialOrd for Key<'_, T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Key<'_, T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .expect("scores are finite")
            .then_with(|| self.id.cmp(other.id))
            .then_with(|| self.index.cmp(&other.index))
    }
}

/// Order in which treated units are processed: descending score, ties by id.
pub fn processing_order<T: Scalar>(ids: &[String], scores: &[T], treated: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).filter(|&i| treated[i]).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order
}

/// Nearest control to `s` in the set; equal distances go to the smaller id.
fn nearest<'a, T: Scalar>(set: &BTreeSet<Key<'a, T>>, s: T) -> Option<Key<'a, T>> {
    let probe = Key { score: s, id: "", index: 0 };
    // Largest score <= s, then the smallest id at that score.
    let below = set.range(..probe).next_back().map(|k| Key { id: "", index: 0, ..*k });
    let below = below.and_then(|b| set.range(b..).next().copied()).filter(|k| k.score <= s);
    // Exact score ties sort at or after the probe.
    let above = set.range(probe..).next().copied();
    match (below, above) {
        (None, x) | (x, None) => x,
        (Some(b), Some(a)) => {
            let (db, da) = (s - b.score, a.score - s);
            match db.partial_cmp(&da).expect("finite distances") {
                Ordering::Less => Some(b),
                Ordering::Greater => Some(a),
                Ordering::Equal => Some(if b.id <= a.id { b } else { a }),
            }
        }
    }
}

/// Greedy matching of treated to control units on `scores`.
///
/// Treated units are processed in descending score order (ties by id); each
/// takes the control minimizing `|score difference|`, equal distances going
/// to the smaller control id. One-to-one removes used controls; many-to-one
/// keeps them available. With a `caliper`, a treated unit whose nearest
/// control is farther than the caliper is dropped.
pub fn match_pairs<T: Scalar>(
    ids: &[String],
    scores: &[T],
    treated: &[bool],
    mode: MatchMode,
    caliper: Option<T>,
) -> Matching<T> {
    assert_eq!(ids.len(), scores.len(), "one score per unit");
    assert_eq!(ids.len(), treated.len(), "one label per unit");
    let mut controls: BTreeSet<Key<T>> = (0..ids.len())
        .filter(|&i| !treated[i])
        .map(|i| Key { score: scores[i], id: ids[i].as_str(), index: i })
        .collect();
    let mut pairs = Vec::new();
    let mut dropped_treated = Vec::new();
    for t in processing_order(ids, scores, treated) {
        let Some(c) = nearest(&controls, scores[t]) else {
            dropped_treated.push(t);
            continue;
        };
        let distance = (scores[t] - c.score).abs();
        if caliper.is_some_and(|cal| distance > cal) {
            dropped_treated.push(t);
            continue;
        }
        if mode == MatchMode::OneToOne {
            controls.remove(&c);
        }
        pairs.push(Pair { treated: t, control: c.index, distance });
    }
    Matching { mode, pairs, dropped_treated }
}
