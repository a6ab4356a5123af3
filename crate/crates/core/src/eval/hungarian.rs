//! Maximum-cardinality, maximum-score bipartite matching.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One-to-one assignment of predictions (rows) to ground truths (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(pred_index, gt_index)`, ascending by prediction.
    pub pairs: Vec<(usize, usize)>,
    /// Scores of eligible pairs, `None` where ineligible.
    pub score_matrix: Vec<Vec<Option<f64>>>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_score(&self) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j)| self.score_matrix[i][j].unwrap_or(0.0))
            .sum()
    }
}

fn shape(m: &[Vec<impl Sized>]) -> Result<(usize, usize), EvalError> {
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(EvalError::ShapeMismatch("ragged matrix".into()));
    }
    Ok((m.len(), cols))
}

/// Finds a matching over eligible pairs that has the most pairs and, among
/// those, the largest total score.
///
/// Eligible pair weights are lifted by a constant larger than any possible
/// score gain, so one extra pair always outweighs score differences; the
/// lifted problem is then solved exactly with the potentials-based
/// Hungarian method in `O(n² m)`.
pub fn hungarian_match(scores: &[Vec<f64>], eligible: &[Vec<bool>]) -> Result<Matching, EvalError> {
    let (n, m) = shape(scores)?;
    let (en, em) = shape(eligible)?;
    if (n, m) != (en, em) && !(n == 0 && en == 0) {
        return Err(EvalError::ShapeMismatch(format!(
            "scores are {n}x{m}, eligibility is {en}x{em}"
        )));
    }
    let mut score_matrix = vec![vec![None; m]; n];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..m {
            if eligible[i][j] {
                let s = scores[i][j];
                if !s.is_finite() {
                    return Err(EvalError::NonFiniteScore { row: i, col: j });
                }
                score_matrix[i][j] = Some(s);
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
    }
    if lo > hi {
        return Ok(Matching {
            pairs: Vec::new(),
            score_matrix,
        });
    }
    let lift = 1.0 + n.min(m) as f64 * (hi - lo);
    let weight = |i: usize, j: usize| score_matrix[i][j].map_or(0.0, |s| lift + (s - lo));

    let transpose = n > m;
    let (rows, cols) = if transpose { (m, n) } else { (n, m) };
    let cost = |r: usize, c: usize| {
        if transpose {
            -weight(c, r)
        } else {
            -weight(r, c)
        }
    };
    let assignment = solve_min_cost(rows, cols, cost);
    let mut pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .map(|(r, c)| if transpose { (c, r) } else { (r, c) })
        .filter(|&(i, j)| score_matrix[i][j].is_some())
        .collect();
    pairs.sort_unstable();
    Ok(Matching {
        pairs,
        score_matrix,
    })
}

/// Rectangular assignment (`rows ≤ cols`): every row gets a distinct column
/// and the summed cost is minimal. Returns the column of each row.
fn solve_min_cost(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(rows <= cols);
    // 1-based with a virtual column 0, following the classic formulation
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for row in 1..=rows {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}
