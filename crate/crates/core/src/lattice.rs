//! Queue-emptying patterns over the green period.
//!
//! For a queue starting the cycle at level `l`, the vector of arrival counts
//! `(n_1, ..., n_j)` drives the queue to empty for the first time exactly at
//! the end of green slot `j` when every partial level stays positive before
//! `j` and hits zero at `j`:
//!
//! ```text
//! l + n_1 + ... + n_m - m > 0   for m = 0, ..., j-1
//! l + n_1 + ... + n_j - j = 0
//! ```
//!
//! The sets `G[j][l]` of all such vectors are finite and reusable; every
//! transform formula in the solver and the output-process calculation iterates
//! over them.

use crate::error::{Error, Result};

/// Indicator that the queue empties at some point along the path.
///
/// Returns 1 iff `min_{0<=m<=k} (x0 + n_1 + ... + n_m - m) <= 0`.
pub fn indicator_t(x0: u32, counts: &[u32]) -> u8 {
    let mut level = x0 as i64;
    if level <= 0 {
        return 1;
    }
    for &n in counts {
        level += n as i64 - 1;
        if level <= 0 {
            return 1;
        }
    }
    0
}

/// All nonempty emptiness-pattern sets for a green period of `g` slots.
#[derive(Debug, Clone)]
pub struct GTable {
    green: usize,
    /// `sets[j][l]` lists the vectors of `G_{j,l}` in lexicographic order.
    sets: Vec<Vec<Vec<Vec<u32>>>>,
}

impl GTable {
    pub fn green(&self) -> usize {
        self.green
    }

    /// Vectors of `G_{j,l}`; empty for `j < l`, for `l = 0 < j`, and for
    /// arguments at or beyond `g`.
    pub fn set(&self, j: usize, l: usize) -> &[Vec<u32>] {
        static EMPTY: Vec<Vec<u32>> = Vec::new();
        self.sets
            .get(j)
            .and_then(|row| row.get(l))
            .map(|v| v.as_slice())
            .unwrap_or(&EMPTY)
    }

    /// Iterate over all `(j, l, vector)` triples with nonempty sets.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Vec<u32>)> {
        self.sets.iter().enumerate().flat_map(|(j, row)| {
            row.iter()
                .enumerate()
                .flat_map(move |(l, vecs)| vecs.iter().map(move |v| (j, l, v)))
        })
    }
}

/// Enumerate every `G_{j,l}` for `0 <= l <= j <= g-1`.
///
/// The variable-depth loops of the reference enumeration are realized as a
/// depth recursion with the same bounds: entry `n_i` ranges over
/// `max(0, i+1-l-sum) ..= j-l-sum` where `sum` is the partial sum so far, and
/// the last entries are forced. Vectors come out in lexicographic order.
pub fn enumerate_g_sets(green: usize) -> Result<GTable> {
    if green == 0 {
        return Err(Error::InvalidParameter("green period must be >= 1".into()));
    }
    let mut sets = vec![vec![Vec::new(); green]; green];
    // Empty queue at the cycle start: the empty vector, only at (0, 0).
    sets[0][0].push(Vec::new());
    for l in 1..green {
        for j in l..green {
            let mut out = Vec::new();
            let mut prefix = Vec::with_capacity(j);
            extend(l as i64, j, &mut prefix, &mut out);
            sets[j][l] = out;
        }
    }
    Ok(GTable { green, sets })
}

fn extend(l: i64, j: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let m = prefix.len();
    let sum: i64 = prefix.iter().map(|&n| n as i64).sum();
    if m == j {
        debug_assert_eq!(l + sum - j as i64, 0);
        out.push(prefix.clone());
        return;
    }
    // Partial level after slot m+1 must stay positive unless this is slot j;
    // the total must still be reachable: n <= j - l - sum.
    let hi = j as i64 - l - sum;
    if hi < 0 {
        return;
    }
    let lo = if m + 1 == j {
        hi // last entry forced to close the path at zero
    } else {
        (m as i64 + 2 - l - sum).max(0)
    };
    for n in lo..=hi {
        prefix.push(n as u32);
        extend(l, j, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_examples() {
        assert_eq!(indicator_t(0, &[]), 1);
        assert_eq!(indicator_t(3, &[1, 1]), 0);
        assert_eq!(indicator_t(1, &[0]), 1);
    }

    #[test]
    fn small_sets() {
        let table = enumerate_g_sets(3).unwrap();
        assert_eq!(table.set(0, 0), &[Vec::<u32>::new()]);
        assert!(table.set(1, 0).is_empty());
        assert!(table.set(2, 0).is_empty());
        assert_eq!(table.set(1, 1), &[vec![0]]);
        assert_eq!(table.set(2, 1), &[vec![1, 0]]);
        assert_eq!(table.set(2, 2), &[vec![0, 0]]);
        assert!(table.set(1, 2).is_empty());
    }

    #[test]
    fn members_empty_exactly_at_j() {
        let table = enumerate_g_sets(7).unwrap();
        for (j, l, v) in table.iter() {
            assert_eq!(v.len(), j);
            assert_eq!(indicator_t(l as u32, v), 1, "member must empty the queue");
            // every strict prefix keeps the queue positive
            for m in 0..j {
                assert_eq!(
                    indicator_t(l as u32, &v[..m]),
                    if l == 0 { 1 } else { 0 },
                    "prefix of length {m} of {v:?} with l={l}"
                );
            }
        }
    }

    #[test]
    fn exhaustive_scan_recovers_sets() {
        // brute force over all candidate vectors with entries <= g
        for g in 1..=6usize {
            let table = enumerate_g_sets(g).unwrap();
            for l in 0..g {
                for j in 0..g {
                    let mut brute: Vec<Vec<u32>> = Vec::new();
                    let mut stack = vec![Vec::<u32>::new()];
                    while let Some(v) = stack.pop() {
                        if v.len() == j {
                            if satisfies(l as i64, j, &v) {
                                brute.push(v);
                            }
                            continue;
                        }
                        for n in (0..=g as u32).rev() {
                            let mut w = v.clone();
                            w.push(n);
                            stack.push(w);
                        }
                    }
                    brute.sort();
                    let mut got: Vec<Vec<u32>> = table.set(j, l).to_vec();
                    got.sort();
                    assert_eq!(got, brute, "g={g} j={j} l={l}");
                }
            }
        }
    }

    fn satisfies(l: i64, j: usize, v: &[u32]) -> bool {
        let mut sum = 0i64;
        for m in 0..j {
            if l + sum - m as i64 <= 0 {
                return false;
            }
            sum += v[m] as i64;
        }
        l + sum - j as i64 == 0
    }

    #[test]
    fn membership_extends_with_any_suffix() {
        let table = enumerate_g_sets(5).unwrap();
        for (j, l, v) in table.iter() {
            for suffix in [vec![], vec![3], vec![0, 2, 5]] {
                let mut path = v.clone();
                path.extend(&suffix);
                assert_eq!(indicator_t(l as u32, &path), 1);
            }
            let _ = j;
        }
    }
}
