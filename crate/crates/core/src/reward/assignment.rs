//! Maximum-weight injective matching between two step sequences.
//!
//! The solver is an exact memoized search over subsets of the ground-truth
//! side. It is written so that golden tests and the brute-force oracle agree
//! bit for bit:
//!
//! * The total weight of a matching is always the right-fold
//!   `w1 + (w2 + (... + (wk + 0)))` over its pairs sorted by generated index.
//!   Every value the search produces is such a fold, so the optimum equals a
//!   brute-force maximum over all injective matchings exactly, with no
//!   floating-point tolerance.
//! * Ties are broken toward the matching whose
//!   `(generated index, ground-truth index)` pair list is lexicographically
//!   smallest. Zero-weight pairs are kept only when they make that list
//!   smaller.
//!
//! Complexity is `O(M * 2^N * N)` over reachable states, which is instant at
//! plan scale; the ground-truth side is capped at 64 steps.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One matched pair: generated step index, ground-truth step index, weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingPair {
    pub generated: usize,
    pub ground_truth: usize,
    pub weight: f64,
}

/// An injective matching with its total weight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Pairs sorted ascending by generated index.
    pub pairs: Vec<MatchingPair>,
    /// Right-fold of the pair weights in pair order.
    pub total_weight: f64,
}

impl Matching {
    /// Recompute the total in the canonical summation order.
    pub fn canonical_total(&self) -> f64 {
        self.pairs.iter().rev().fold(0.0, |acc, p| p.weight + acc)
    }
}

struct Search<'a> {
    sim: &'a [Vec<f64>],
    rows: usize,
    cols: usize,
    memo: HashMap<(usize, u64), f64>,
}

impl Search<'_> {
    /// Best suffix weight over generated steps `i..` with `used` ground-truth
    /// columns unavailable.
    fn best(&mut self, i: usize, used: u64) -> f64 {
        if i == self.rows {
            return 0.0;
        }
        if let Some(&v) = self.memo.get(&(i, used)) {
            return v;
        }
        let mut best = self.best(i + 1, used);
        for j in 0..self.cols {
            if used & (1 << j) == 0 {
                let v = self.sim[i][j] + self.best(i + 1, used | (1 << j));
                if v > best {
                    best = v;
                }
            }
        }
        self.memo.insert((i, used), best);
        best
    }
}

/// Solve the assignment over a row-major `M x N` similarity matrix with
/// nonnegative finite entries. Rows are generated steps, columns ground
/// truth. Either dimension may be zero; the matching is not necessarily
/// perfect (unmatched steps contribute nothing, as if matched to zero-weight
/// dummy nodes).
pub fn max_weight_matching(sim: &[Vec<f64>]) -> Matching {
    let rows = sim.len();
    let cols = sim.first().map_or(0, Vec::len);
    assert!(
        cols <= 64,
        "ground-truth side limited to 64 steps, got {cols}"
    );
    debug_assert!(sim.iter().all(|r| r.len() == cols), "ragged matrix");
    debug_assert!(
        sim.iter().flatten().all(|w| w.is_finite() && *w >= 0.0),
        "weights must be finite and nonnegative"
    );
    if rows == 0 || cols == 0 {
        return Matching::default();
    }

    let mut search = Search {
        sim,
        rows,
        cols,
        memo: HashMap::new(),
    };
    let total_weight = search.best(0, 0);

    // Greedy lexicographic reconstruction. A candidate continuation is
    // feasible iff folding the prefix weights over the best possible suffix
    // reproduces the optimal total bit for bit; the fold must be evaluated on
    // the full matching because rounding can collapse distinct suffix totals
    // into the same complete total. f64 addition is monotone, so checking
    // against the maximal suffix value is exact. The empty suffix is
    // lexicographically smallest, so stopping is preferred whenever the
    // prefix alone already folds to the optimum.
    let fold_prefix = |prefix: &[MatchingPair], suffix_total: f64| -> f64 {
        prefix
            .iter()
            .rev()
            .fold(suffix_total, |acc, p| p.weight + acc)
    };
    let mut pairs: Vec<MatchingPair> = Vec::new();
    let mut used = 0u64;
    for i in 0..rows {
        if fold_prefix(&pairs, 0.0) == total_weight {
            break;
        }
        for j in 0..cols {
            if used & (1 << j) != 0 {
                continue;
            }
            let with_j = sim[i][j] + search.best(i + 1, used | (1 << j));
            if fold_prefix(&pairs, with_j) == total_weight {
                pairs.push(MatchingPair {
                    generated: i,
                    ground_truth: j,
                    weight: sim[i][j],
                });
                used |= 1 << j;
                break;
            }
        }
    }

    let matching = Matching {
        pairs,
        total_weight,
    };
    debug_assert_eq!(matching.canonical_total(), matching.total_weight);
    matching
}
