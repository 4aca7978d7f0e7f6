//! Null expectations of sqrt(degree-to-category) under independence of the
//! graph and the attribute labels.
//!
//! Two routes are provided. The permutation route is exact: labels are a
//! uniform permutation with fixed category counts, so the labels on a node's
//! neighbours are a draw without replacement from the other labels. Because a
//! mutual neighbour contributes two to d_{i,l}, singles and mutuals are
//! tracked separately (a bivariate hypergeometric). The binomial route is the
//! cheap large-network approximation: sqrt of Binomial(size, p).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

/// How a regularized homophily term computes its null expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMode {
    /// Exact permutation null.
    Exact,
    /// sqrt(Binomial) approximation sized by the node's total degree.
    Binomial,
    /// Exact for networks of at most [`AUTO_EXACT_MAX_NODES`] nodes, binomial above.
    #[default]
    Auto,
}

pub const AUTO_EXACT_MAX_NODES: usize = 30;

/// Largest network for which the exact null table is allowed.
pub const EXACT_MAX_NODES: usize = 100;

impl NullMode {
    /// Resolves `Auto` for a network of `n` nodes.
    pub fn resolve(self, n: usize) -> NullMode {
        match self {
            NullMode::Auto if n <= AUTO_EXACT_MAX_NODES => NullMode::Exact,
            NullMode::Auto => NullMode::Binomial,
            m => m,
        }
    }
}

/// A fully specified null distribution for one node's degree to a category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullDegree {
    /// d ~ Binomial(size, p).
    Binomial { size: usize, p: f64 },
    /// The node has `singles` one-directional neighbours and `mutuals`
    /// reciprocated ones; their labels are drawn without replacement from a
    /// pool of `pool` labels of which `successes` are the target category.
    Permutation { singles: usize, mutuals: usize, pool: usize, successes: usize },
}

/// E[sqrt(d)] under the given null.
pub fn expected_sqrt(null: NullDegree) -> f64 {
    match null {
        NullDegree::Binomial { size, p } => expected_sqrt_binomial(size, p),
        NullDegree::Permutation { singles, mutuals, pool, successes } => {
            expected_sqrt_permutation(singles, mutuals, pool, successes)
        }
    }
}

/// E[sqrt(B)] for B ~ Binomial(size, p).
pub fn expected_sqrt_binomial(size: usize, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    if size == 0 || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return (size as f64).sqrt();
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (1..=size as u64)
        .map(|k| {
            let ln_pmf = ln_binomial(size as u64, k) + k as f64 * lp + (size as u64 - k) as f64 * lq;
            ln_pmf.exp() * (k as f64).sqrt()
        })
        .sum()
}

/// E[sqrt(U + 2V)] where (U, V) count target labels among `singles` and
/// `mutuals` neighbours drawn without replacement from `pool` labels holding
/// `successes` targets.
pub fn expected_sqrt_permutation(singles: usize, mutuals: usize, pool: usize, successes: usize) -> f64 {
    assert!(singles + mutuals <= pool, "more neighbours than pool labels");
    assert!(successes <= pool, "more successes than pool labels");
    if singles + mutuals == 0 || successes == 0 {
        return 0.0;
    }
    let rest = (pool - singles - mutuals) as u64;
    let ln_total = ln_binomial(pool as u64, successes as u64);
    let mut acc = 0.0;
    for u in 0..=singles.min(successes) {
        for v in 0..=mutuals.min(successes - u) {
            let r = (successes - u - v) as u64;
            if r > rest || u + 2 * v == 0 {
                continue;
            }
            let ln_w = ln_binomial(singles as u64, u as u64)
                + ln_binomial(mutuals as u64, v as u64)
                + ln_binomial(rest, r)
                - ln_total;
            acc += ln_w.exp() * ((u + 2 * v) as f64).sqrt();
        }
    }
    acc
}

/// Lazily filled lookup table of null expectations for one network size.
#[derive(Debug)]
pub(crate) struct NullTable {
    n: usize,
    mode: NullMode,
    cells: Vec<OnceLock<f64>>,
}

impl NullTable {
    /// `mode` must already be resolved (not `Auto`).
    pub(crate) fn new(n: usize, mode: NullMode) -> Self {
        let len = match mode {
            // (total degree in 0..2n-1) x (category count in 0..=n)
            NullMode::Binomial => (2 * n - 1).max(1) * (n + 1),
            // (singles, mutuals, successes) each in 0..n
            NullMode::Exact => n * n * n,
            NullMode::Auto => unreachable!("null mode must be resolved"),
        };
        NullTable { n, mode, cells: (0..len).map(|_| OnceLock::new()).collect() }
    }

    /// Null expectation of sqrt(d_{i,l}) for a node with the given degree
    /// profile. `count` is n_l(x) over all nodes; `own_is_target` says whether
    /// the node itself carries label l (it is then excluded from the pool).
    #[inline]
    pub(crate) fn lookup(&self, total: usize, mutual: usize, count: usize, own_is_target: bool) -> f64 {
        let n = self.n;
        match self.mode {
            NullMode::Binomial => *self.cells[total * (n + 1) + count]
                .get_or_init(|| expected_sqrt_binomial(total, count as f64 / n as f64)),
            NullMode::Exact => {
                let singles = total - 2 * mutual;
                let successes = count - own_is_target as usize;
                *self.cells[(singles * n + mutual) * n + successes]
                    .get_or_init(|| expected_sqrt_permutation(singles, mutual, n - 1, successes))
            }
            NullMode::Auto => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn zero_degree_is_zero_in_both_modes() {
        assert_eq!(expected_sqrt_binomial(0, 0.3), 0.0);
        assert_eq!(expected_sqrt_permutation(0, 0, 9, 4), 0.0);
    }

    #[test]
    fn single_tie_gives_the_proportion() {
        for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert!((expected_sqrt_binomial(1, p) - p).abs() < 1e-14);
        }
        // One single neighbour drawn from 10 labels holding 3 targets.
        assert!((expected_sqrt_permutation(1, 0, 10, 3) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn sqrt_binomial_four_half() {
        // pmf enumeration: (4*1 + 6*sqrt2 + 4*sqrt3 + 1*2) / 16
        let want = (4.0 + 6.0 * 2f64.sqrt() + 4.0 * 3f64.sqrt() + 2.0) / 16.0;
        assert!((want - 1.338_34).abs() < 1e-5);
        assert!((expected_sqrt_binomial(4, 0.5) - want).abs() < 1e-12);
    }

    #[test]
    fn permutation_matches_direct_enumeration() {
        // Brute force over all C(pool, successes) placements of the targets.
        let (singles, mutuals, pool, successes) = (3usize, 2usize, 8usize, 4usize);
        let mut total = 0.0;
        let mut count = 0.0;
        for mask in 0u32..(1 << pool) {
            if mask.count_ones() as usize != successes {
                continue;
            }
            // Slots 0..singles are single neighbours, then mutual neighbours.
            let u = (0..singles).filter(|&s| mask >> s & 1 == 1).count();
            let v = (singles..singles + mutuals).filter(|&s| mask >> s & 1 == 1).count();
            total += ((u + 2 * v) as f64).sqrt();
            count += 1.0;
        }
        assert_eq!(count, binom(8, 4));
        let want = total / count;
        assert!((expected_sqrt_permutation(singles, mutuals, pool, successes) - want).abs() < 1e-12);
    }

    #[test]
    fn permutation_without_mutuals_is_hypergeometric() {
        let (a, pool, succ) = (5u64, 12u64, 7u64);
        let want: f64 = (0..=a.min(succ))
            .map(|k| binom(a, k) * binom(pool - a, succ - k) / binom(pool, succ) * (k as f64).sqrt())
            .sum();
        assert!((expected_sqrt_permutation(5, 0, 12, 7) - want).abs() < 1e-12);
    }

    #[test]
    fn auto_resolution() {
        assert_eq!(NullMode::Auto.resolve(30), NullMode::Exact);
        assert_eq!(NullMode::Auto.resolve(31), NullMode::Binomial);
        assert_eq!(NullMode::Binomial.resolve(5), NullMode::Binomial);
    }

    #[test]
    fn table_agrees_with_direct_calls() {
        let t = NullTable::new(10, NullMode::Exact);
        let got = t.lookup(5, 1, 4, true);
        assert!((got - expected_sqrt_permutation(3, 1, 9, 3)).abs() < 1e-15);
        let b = NullTable::new(10, NullMode::Binomial);
        assert!((b.lookup(4, 2, 5, false) - expected_sqrt_binomial(4, 0.5)).abs() < 1e-15);
    }
}
