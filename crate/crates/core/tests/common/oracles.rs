use std::collections::{HashMap, VecDeque};

pub fn lev_oracle(a: &[u8], b: &[u8]) -> usize {
    // full-matrix recursion, written independently of the library routine
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        d[i][0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
        }
    }
    d[a.len()][b.len()]
}

fn all_block_moves(t: &[u8]) -> Vec<Vec<u8>> {
    let n = t.len();
    let mut out = Vec::new();
    for s in 0..n {
        for l in 1..=n - s {
            let block: Vec<u8> = t[s..s + l].to_vec();
            let mut rest: Vec<u8> = t[..s].to_vec();
            rest.extend_from_slice(&t[s + l..]);
            for p in 0..=rest.len() {
                let mut v = rest[..p].to_vec();
                v.extend_from_slice(&block);
                v.extend_from_slice(&rest[p..]);
                out.push(v);
            }
        }
    }
    out
}

/// Every arrangement reachable from `hyp` by block moves, with the fewest
/// moves needed to reach it, found by breadth-first search.
pub fn arrangements(hyp: &[u8]) -> Vec<(Vec<u8>, usize)> {
    let mut dist: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(hyp.to_vec(), 0);
    queue.push_back(hyp.to_vec());
    while let Some(cur) = queue.pop_front() {
        let d = dist[&cur];
        for next in all_block_moves(&cur) {
            if !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    dist.into_iter().collect()
}

/// Minimum over precomputed arrangements of (moves + Levenshtein distance).
pub fn min_ter_edits(arrangements: &[(Vec<u8>, usize)], target: &[u8]) -> usize {
    arrangements
        .iter()
        .map(|(arr, d)| d + lev_oracle(arr, target))
        .min()
        .unwrap()
}

/// Minimum over every reachable arrangement of (number of block moves +
/// Levenshtein distance).
pub fn exhaustive_ter_edits(hyp: &[u8], target: &[u8]) -> usize {
    min_ter_edits(&arrangements(hyp), target)
}

/// Every string of length `0..=max_len` over `alphabet`.
pub fn all_strings(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &c in alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Pair-count oracle for segment-level tau: each tuple is judged on its own
/// with an explicit three-way comparison.
pub fn brute_force_darr_counts(better: &[f64], worse: &[f64]) -> (u64, u64) {
    let mut c = 0;
    let mut d = 0;
    for i in 0..better.len() {
        match better[i].partial_cmp(&worse[i]) {
            Some(std::cmp::Ordering::Greater) => c += 1,
            _ => d += 1,
        }
    }
    (c, d)
}

/// Classic Kendall tau-a between two tie-free rankings of the same items.
pub fn tau_a(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in 0..n {
            if i < j {
                let a = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
                s += a as i64;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}
