//! Rectangular assignment: optimal (shortest augmenting path) and greedy
//! solvers shared by every matcher in the tracker stack.
//!
//! Both solvers take a dense row-major cost matrix and a feasibility
//! threshold: entries with `cost >= infeasible_above` are never matched.
//! Among all maximum-cardinality feasible matchings the optimal solver
//! returns one of minimum total cost.

use thiserror::Error;

const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("cost matrix data length {got} does not match {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if data.len() != rows * cols {
            return Err(AssignError::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn validate_finite(&self) -> Result<(), AssignError> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.get(r, c).is_finite() {
                    return Err(AssignError::NonFiniteCost { row: r, col: c });
                }
            }
        }
        Ok(())
    }
}

/// The outcome of an assignment: every row and column index appears exactly
/// once, either inside `matches` or in the corresponding unmatched list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentResult {
    /// `(row, column)` pairs, sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_columns: Vec<usize>,
}

impl AssignmentResult {
    fn from_matches(matches: Vec<(usize, usize)>, rows: usize, cols: usize) -> Self {
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &matches {
            row_used[r] = true;
            col_used[c] = true;
        }
        let unmatched_rows = (0..rows).filter(|&r| !row_used[r]).collect();
        let unmatched_columns = (0..cols).filter(|&c| !col_used[c]).collect();
        Self {
            matches,
            unmatched_rows,
            unmatched_columns,
        }
    }

    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, c)| cost.get(r, c)).sum()
    }
}

/// Minimum-cost maximum-cardinality assignment.
///
/// Infeasible entries (`cost >= infeasible_above`) and square-padding cells
/// are priced at a level high enough that the solver always prefers one more
/// feasible match over any combination of cheaper feasible entries, which
/// makes the padded square solve equivalent to maximum-cardinality matching
/// followed by cost minimization.
pub fn solve_optimal(
    cost: &CostMatrix,
    infeasible_above: f64,
) -> Result<AssignmentResult, AssignError> {
    cost.validate_finite()?;
    let (rows, cols) = (cost.rows, cost.cols);
    let n = rows.max(cols);
    if n == 0 {
        return Ok(AssignmentResult::from_matches(Vec::new(), rows, cols));
    }

    let mut max_abs: f64 = 1.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = cost.get(r, c);
            if v < infeasible_above {
                max_abs = max_abs.max(v.abs());
            }
        }
    }
    let pad = 2.0 * n as f64 * max_abs + 1.0;

    let mut square = vec![pad; n * n];
    for r in 0..rows {
        for c in 0..cols {
            let v = cost.get(r, c);
            if v < infeasible_above {
                square[r * n + c] = v;
            }
        }
    }

    let col4row = shortest_augmenting_paths(n, &square);

    let mut matches = Vec::new();
    for (r, &c) in col4row.iter().enumerate() {
        if r < rows && c < cols && cost.get(r, c) < infeasible_above {
            matches.push((r, c));
        }
    }
    Ok(AssignmentResult::from_matches(matches, rows, cols))
}

/// Solve the square assignment problem exactly, one shortest augmenting path
/// per row (Crouse's variant of Jonker-Volgenant, as used by SciPy's
/// `linear_sum_assignment`). Returns the matched column for every row.
fn shortest_augmenting_paths(n: usize, cost: &[f64]) -> Vec<usize> {
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];
    let mut shortest = vec![0.0f64; n];
    let mut path = vec![NONE; n];
    let mut in_rows = vec![false; n];
    let mut in_cols = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        shortest.fill(f64::INFINITY);
        path.fill(NONE);
        in_rows.fill(false);
        in_cols.fill(false);
        // Reverse fill makes ties resolve toward low column indices.
        for (it, slot) in remaining.iter_mut().enumerate() {
            *slot = n - it - 1;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0f64;
        let mut i = cur_row;
        let mut sink = NONE;

        while sink == NONE {
            in_rows[i] = true;
            let mut index = NONE;
            let mut lowest = f64::INFINITY;
            for (it, &j) in remaining[..num_remaining].iter().enumerate() {
                let reduced = min_val + cost[i * n + j] - u[i] - v[j];
                if reduced < shortest[j] {
                    path[j] = i;
                    shortest[j] = reduced;
                }
                // Prefer an unassigned column on ties: it terminates the path.
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            debug_assert!(
                min_val.is_finite(),
                "padded square problem is always feasible"
            );

            let j = remaining[index];
            if row4col[j] == NONE {
                sink = j;
            } else {
                i = row4col[j];
            }
            in_cols[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for r in 0..n {
            if in_rows[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..n {
            if in_cols[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let i = path[j];
            row4col[j] = i;
            std::mem::swap(&mut col4row[i], &mut j);
            if i == cur_row {
                break;
            }
        }
    }
    col4row
}

/// Greedy assignment: repeatedly match the globally smallest remaining
/// feasible entry. Ties break on lowest row, then lowest column.
pub fn solve_greedy(
    cost: &CostMatrix,
    infeasible_above: f64,
) -> Result<AssignmentResult, AssignError> {
    cost.validate_finite()?;
    let mut entries: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..cost.rows {
        for c in 0..cost.cols {
            let v = cost.get(r, c);
            if v < infeasible_above {
                entries.push((v, r, c));
            }
        }
    }
    entries.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("validated finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut row_used = vec![false; cost.rows];
    let mut col_used = vec![false; cost.cols];
    let mut matches = Vec::new();
    for (_, r, c) in entries {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            matches.push((r, c));
        }
    }
    matches.sort_unstable();
    Ok(AssignmentResult::from_matches(
        matches, cost.rows, cost.cols,
    ))
}

/// Exhaustive minimum over all feasible matchings, maximum cardinality first.
/// Exponential; intended for verifying the optimal solver on small inputs.
pub fn brute_force_optimal(cost: &CostMatrix, infeasible_above: f64) -> (usize, f64) {
    fn recurse(
        cost: &CostMatrix,
        infeasible_above: f64,
        row: usize,
        col_used: &mut Vec<bool>,
        cardinality: usize,
        total: f64,
        best: &mut (usize, f64),
    ) {
        if row == cost.rows() {
            if cardinality > best.0 || (cardinality == best.0 && total < best.1) {
                *best = (cardinality, total);
            }
            return;
        }
        recurse(
            cost,
            infeasible_above,
            row + 1,
            col_used,
            cardinality,
            total,
            best,
        );
        for c in 0..cost.cols() {
            if !col_used[c] && cost.get(row, c) < infeasible_above {
                col_used[c] = true;
                recurse(
                    cost,
                    infeasible_above,
                    row + 1,
                    col_used,
                    cardinality + 1,
                    total + cost.get(row, c),
                    best,
                );
                col_used[c] = false;
            }
        }
    }

    let mut best = (0usize, f64::INFINITY);
    let mut col_used = vec![false; cost.cols()];
    recurse(cost, infeasible_above, 0, &mut col_used, 0, 0.0, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    (best.0, best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(rows: usize, cols: usize, data: &[f64]) -> CostMatrix {
        CostMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn optimal_two_by_two() {
        let cost = cm(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = solve_optimal(&cost, f64::INFINITY).unwrap();
        assert_eq!(r.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(r.total_cost(&cost), 2.0);
        assert!(r.unmatched_rows.is_empty());
        assert!(r.unmatched_columns.is_empty());
    }

    #[test]
    fn optimal_three_by_three() {
        let cost = cm(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let r = solve_optimal(&cost, f64::INFINITY).unwrap();
        assert_eq!(r.matches, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(r.total_cost(&cost), 5.0);
    }

    #[test]
    fn optimal_empty_matrix() {
        let cost = cm(0, 0, &[]);
        let r = solve_optimal(&cost, f64::INFINITY).unwrap();
        assert!(r.matches.is_empty());
        assert!(r.unmatched_rows.is_empty());
        assert!(r.unmatched_columns.is_empty());
    }

    #[test]
    fn optimal_respects_threshold() {
        // Only the (0,1) entry is feasible.
        let cost = cm(1, 2, &[0.4, 0.1]);
        let r = solve_optimal(&cost, 0.3).unwrap();
        assert_eq!(r.matches, vec![(0, 1)]);
        assert_eq!(r.unmatched_columns, vec![0]);
    }

    #[test]
    fn optimal_prefers_cardinality_over_cost() {
        // Matching both rows costs 10+10; matching only row 0 to column 0
        // costs 1. Maximum cardinality must win.
        let cost = cm(2, 2, &[1.0, 10.0, 10.0, 100.0]);
        let r = solve_optimal(&cost, f64::INFINITY).unwrap();
        assert_eq!(r.matches.len(), 2);
        assert_eq!(r.total_cost(&cost), 20.0);
    }

    #[test]
    fn non_finite_cost_rejected() {
        let cost = cm(1, 2, &[0.0, f64::NAN]);
        assert_eq!(
            solve_optimal(&cost, f64::INFINITY),
            Err(AssignError::NonFiniteCost { row: 0, col: 1 })
        );
        assert_eq!(
            solve_greedy(&cost, f64::INFINITY),
            Err(AssignError::NonFiniteCost { row: 0, col: 1 })
        );
    }

    #[test]
    fn greedy_matches_optimal_when_unambiguous() {
        let cost = cm(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = solve_greedy(&cost, f64::INFINITY).unwrap();
        assert_eq!(r.matches, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn greedy_can_be_suboptimal() {
        let cost = cm(2, 2, &[1.0, 1.0, 1.0, 5.0]);
        let greedy = solve_greedy(&cost, f64::INFINITY).unwrap();
        assert_eq!(greedy.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(greedy.total_cost(&cost), 6.0);
        let optimal = solve_optimal(&cost, f64::INFINITY).unwrap();
        assert_eq!(optimal.total_cost(&cost), 2.0);
    }

    #[test]
    fn greedy_single_row_threshold() {
        let cost = cm(1, 2, &[0.4, 0.1]);
        let r = solve_greedy(&cost, 0.3).unwrap();
        assert_eq!(r.matches, vec![(0, 1)]);
    }

    fn arb_matrix() -> impl Strategy<Value = CostMatrix> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(0.0..10.0f64, r * c)
                .prop_map(move |data| CostMatrix::new(r, c, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn optimal_equals_brute_force(cost in arb_matrix(), thresh in prop_oneof![Just(f64::INFINITY), (2.0..9.0f64)]) {
            let r = solve_optimal(&cost, thresh).unwrap();
            let (card, total) = brute_force_optimal(&cost, thresh);
            prop_assert_eq!(r.matches.len(), card);
            prop_assert_eq!(r.total_cost(&cost), total);
        }

        #[test]
        fn partition_and_feasibility(cost in arb_matrix(), thresh in prop_oneof![Just(f64::INFINITY), (2.0..9.0f64)]) {
            for result in [solve_optimal(&cost, thresh).unwrap(), solve_greedy(&cost, thresh).unwrap()] {
                let mut rows: Vec<usize> = result.matches.iter().map(|m| m.0).collect();
                rows.extend(&result.unmatched_rows);
                rows.sort_unstable();
                prop_assert_eq!(rows, (0..cost.rows()).collect::<Vec<_>>());

                let mut cols: Vec<usize> = result.matches.iter().map(|m| m.1).collect();
                cols.extend(&result.unmatched_columns);
                cols.sort_unstable();
                prop_assert_eq!(cols, (0..cost.cols()).collect::<Vec<_>>());

                for &(r, c) in &result.matches {
                    prop_assert!(cost.get(r, c) < thresh);
                }
            }
        }

        #[test]
        fn deterministic(cost in arb_matrix()) {
            let a = solve_optimal(&cost, f64::INFINITY).unwrap();
            let b = solve_optimal(&cost, f64::INFINITY).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
