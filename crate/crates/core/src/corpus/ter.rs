//! Translation edit rate with block shifts.
//!
//! The search runs in two phases.
//!
//! 1. Greedy: at every step all block moves of the current hypothesis are
//!    tried, and the one with the largest reduction in word-level Levenshtein
//!    distance is applied (ties go to the leftmost start, then the longest
//!    block, then the leftmost destination). Only moves that reduce the
//!    distance are taken and at most `|target|` shifts are made. The minimum of
//!    `shifts + distance` along the path becomes the incumbent.
//! 2. Refinement: a breadth-first branch-and-bound over shift sequences,
//!    pruned with the bag-of-words distance (a lower bound on the Levenshtein
//!    distance that no shift can change). When it finishes inside its budget
//!    the result is the exact minimum and [`TerScore::exact`] is set.
//!
//! Greedy alone is not optimal: `a a a b c` against `a c b a a` costs 3
//! greedily but 2 with the right pair of shifts.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerScore {
    /// Insertions + deletions + substitutions + shifts.
    pub edits: usize,
    pub shifts: usize,
    pub ref_len: usize,
    pub value: f64,
    /// True when the shift search proved `edits` minimal.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerOptions {
    /// Maximum number of arrangements the refinement phase may visit.
    /// Zero disables refinement, leaving only the greedy phase.
    pub search_budget: usize,
}

impl Default for TerOptions {
    fn default() -> Self {
        TerOptions {
            search_budget: 20_000,
        }
    }
}

/// Word-level Levenshtein distance with unit costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Moves `tokens[start..start + len]` so that it begins at index `dest` of
/// the result.
pub(crate) fn apply_shift<T: Clone>(tokens: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let block = &tokens[start..start + len];
    let mut rest: Vec<T> = Vec::with_capacity(tokens.len());
    rest.extend_from_slice(&tokens[..start]);
    rest.extend_from_slice(&tokens[start + len..]);
    let mut out = Vec::with_capacity(tokens.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(block);
    out.extend_from_slice(&rest[dest..]);
    out
}

struct Shift {
    start: usize,
    len: usize,
    dest: usize,
    distance: usize,
}

fn best_shift<T: PartialEq + Clone>(current: &[T], target: &[T], base: usize) -> Option<Shift> {
    let n = current.len();
    let mut best: Option<Shift> = None;
    for start in 0..n {
        // longer blocks first so that ties keep the longest one
        for len in (1..=n - start).rev() {
            for dest in 0..=(n - len) {
                if dest == start {
                    continue;
                }
                let moved = apply_shift(current, start, len, dest);
                let distance = levenshtein(&moved, target);
                if distance >= base {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => distance < b.distance,
                };
                if better {
                    best = Some(Shift {
                        start,
                        len,
                        dest,
                        distance,
                    });
                }
            }
        }
    }
    best
}

/// `max(|a|, |b|) - |a ∩ b|` over multisets. Shifts permute tokens, so this
/// bounds the Levenshtein distance of every arrangement of `a` from below.
fn bag_distance<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let mut counts: HashMap<&T, isize> = HashMap::new();
    for t in a {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in b {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    a.len().max(b.len()) - common
}

fn greedy<T: PartialEq + Clone>(hyp: &[T], target: &[T]) -> (usize, usize) {
    let mut current = hyp.to_vec();
    let mut distance = levenshtein(&current, target);
    let mut best = (distance, 0);
    let mut shifts = 0;
    while shifts < target.len() && distance > 0 {
        let Some(shift) = best_shift(&current, target, distance) else {
            break;
        };
        current = apply_shift(&current, shift.start, shift.len, shift.dest);
        distance = shift.distance;
        shifts += 1;
        if shifts + distance < best.0 {
            best = (shifts + distance, shifts);
        }
    }
    best
}

/// Returns the improved `(edits, shifts)` and whether the search completed.
fn refine<T: Eq + Hash + Clone>(
    hyp: &[T],
    target: &[T],
    incumbent: (usize, usize),
    budget: usize,
) -> ((usize, usize), bool) {
    let floor = bag_distance(hyp, target);
    let mut best = incumbent;
    let mut seen: HashSet<Vec<T>> = HashSet::new();
    seen.insert(hyp.to_vec());
    let mut frontier = vec![hyp.to_vec()];
    let mut depth = 0usize;
    let n = hyp.len();
    while !frontier.is_empty() {
        // children sit at depth + 1 and cost at least depth + 1 + floor
        if depth + 1 + floor >= best.0 {
            return (best, true);
        }
        let mut next = Vec::new();
        for state in &frontier {
            for start in 0..n {
                for len in 1..=n - start {
                    for dest in 0..=(n - len) {
                        if dest == start {
                            continue;
                        }
                        let moved = apply_shift(state, start, len, dest);
                        if seen.contains(&moved) {
                            continue;
                        }
                        if seen.len() >= budget {
                            return (best, false);
                        }
                        let total = depth + 1 + levenshtein(&moved, target);
                        if total < best.0 {
                            best = (total, depth + 1);
                        }
                        seen.insert(moved.clone());
                        next.push(moved);
                    }
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    (best, true)
}

/// Computes TER of `hyp` against `target` with default search options.
///
/// Fails when `target` is empty since the rate is normalized by its length.
pub fn compute_ter<T: Eq + Hash + Clone>(hyp: &[T], target: &[T]) -> Result<TerScore> {
    compute_ter_with(hyp, target, TerOptions::default())
}

pub fn compute_ter_with<T: Eq + Hash + Clone>(
    hyp: &[T],
    target: &[T],
    options: TerOptions,
) -> Result<TerScore> {
    if target.is_empty() {
        return Err(Error::contract("TER target must contain at least one token"));
    }
    let incumbent = greedy(hyp, target);
    let ((edits, shifts), exact) = if options.search_budget == 0 {
        (incumbent, incumbent.0 == bag_distance(hyp, target))
    } else {
        refine(hyp, target, incumbent, options.search_budget)
    };
    Ok(TerScore {
        edits,
        shifts,
        ref_len: target.len(),
        value: edits as f64 / target.len() as f64,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_zero() {
        let t = compute_ter(&toks("a b c"), &toks("a b c")).unwrap();
        assert_eq!(t.edits, 0);
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn one_deletion() {
        let t = compute_ter(&toks("a b c d"), &toks("a b c")).unwrap();
        assert_eq!(t.edits, 1);
        assert!((t.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_block_shift() {
        let t = compute_ter(&toks("c a b"), &toks("a b c")).unwrap();
        assert_eq!(t.edits, 1);
        assert_eq!(t.shifts, 1);
    }

    #[test]
    fn disjoint_is_all_substitutions() {
        let t = compute_ter(&toks("w x y z"), &toks("a b c d")).unwrap();
        assert_eq!(t.edits, 4);
        assert_eq!(t.value, 1.0);
    }

    #[test]
    fn rate_can_exceed_one() {
        let t = compute_ter(&toks("x y z"), &toks("a")).unwrap();
        assert_eq!(t.value, 3.0);
    }

    #[test]
    fn empty_target_is_rejected() {
        let empty: Vec<&str> = Vec::new();
        assert!(matches!(compute_ter(&toks("a"), &empty), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_hypothesis_counts_insertions() {
        let empty: Vec<&str> = Vec::new();
        assert_eq!(compute_ter(&empty, &toks("a b")).unwrap().edits, 2);
    }

    #[test]
    fn refinement_beats_greedy_path() {
        let hyp = toks("a a a b c");
        let target = toks("a c b a a");
        let greedy_only = compute_ter_with(&hyp, &target, TerOptions { search_budget: 0 }).unwrap();
        assert_eq!(greedy_only.edits, 3);
        let full = compute_ter(&hyp, &target).unwrap();
        assert_eq!(full.edits, 2);
        assert!(full.exact);
    }

    #[test]
    fn exhausted_budget_is_reported() {
        let hyp = toks("q r s t u v w x a b c d e f g h");
        let target = toks("h g f e d c b a x w v u t s r q");
        let t = compute_ter_with(&hyp, &target, TerOptions { search_budget: 50 }).unwrap();
        assert!(!t.exact);
        assert!(t.edits <= levenshtein(&hyp, &target));
    }

    #[test]
    fn apply_shift_moves_block() {
        assert_eq!(apply_shift(&[1, 2, 3, 4], 0, 2, 2), vec![3, 4, 1, 2]);
        assert_eq!(apply_shift(&[1, 2, 3, 4], 3, 1, 0), vec![4, 1, 2, 3]);
    }
}
