//! Dense two-phase simplex for the small assignment LPs built in [`crate::model`].
//!
//! Problems arrive as `optimize c·x  s.t.  A·x ≤ q, e·x = 1, x ≥ 0` with at
//! most a few hundred columns, so a full-tableau method with row scaling is
//! simpler and more transparent than sparse machinery. Pivoting is
//! deterministic: Dantzig's rule with lowest-index tie-breaks, falling back to
//! Bland's rule (which cannot cycle) after a pivot budget, and erroring out at
//! a hard cap. Optimal bases also yield dual multipliers so callers can
//! certify optimality independently.

use crate::model::{LpProblem, Sense};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Shape(String),
    #[error("pivot limit {limit} exceeded (degenerate cycling?)")]
    PivotLimit { limit: usize },
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Multipliers certifying optimality.
///
/// For `Maximize`: `y ≥ 0`, `Aᵀy + z·1 ≥ c` componentwise and
/// `q·y + z = objective_value`. For `Minimize` the inequalities flip
/// (`y ≤ 0`, `Aᵀy + z·1 ≤ c`). Rows with an infinite bound carry `y = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub ineq: Vec<f64>,
    pub eq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Optimal assignment; empty unless `status == Optimal`. Entries within
    /// `-feasibility_tol` of zero are clamped to exactly zero.
    pub x: Vec<f64>,
    /// `c·x` at the optimum; NaN unless `status == Optimal`.
    pub objective_value: f64,
    pub status: SolutionStatus,
    pub duals: Option<DualSolution>,
}

impl Solution {
    fn non_optimal(status: SolutionStatus) -> Self {
        Solution { x: Vec::new(), objective_value: f64::NAN, status, duals: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative slack allowed when re-checking constraints on exit.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold for optimality.
    pub optimality_tol: f64,
    /// Hard pivot cap; `None` derives `10·(rows+cols)²` from the problem.
    pub max_pivots: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { feasibility_tol: 1e-9, optimality_tol: 1e-9, max_pivots: None }
    }
}

/// Equality-form tableau: kept inequality rows (slack added, negated when the
/// bound was negative) plus the mass row, artificials as needed.
struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    /// Column index of each kept row's slack, and its sign in the tableau.
    slack_cols: Vec<(usize, f64)>,
    art_cols: Vec<usize>,
    /// Columns barred from entering (artificials during phase 2).
    frozen: Vec<bool>,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        self.rhs[row] *= inv;
        // keep the pivot column exactly canonical
        self.rows[row][col] = 1.0;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor != 0.0 {
                let (pivot_row, target) = if r < row {
                    let (a, b) = self.rows.split_at_mut(row);
                    (&b[0], &mut a[r])
                } else {
                    let (a, b) = self.rows.split_at_mut(r);
                    (&a[row], &mut b[0])
                };
                for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                    *t -= factor * p;
                }
                target[col] = 0.0;
                self.rhs[r] -= factor * self.rhs[row];
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            let pivot_row = &self.rows[row];
            for (t, p) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *t -= factor * p;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Run simplex iterations until optimal/unbounded, flipping to Bland's
    /// rule after `bland_after` pivots. `pivots` accumulates across phases.
    fn iterate(
        &mut self,
        config: &SolverConfig,
        bland_after: usize,
        limit: usize,
        pivots: &mut usize,
    ) -> Result<PivotOutcome, LpError> {
        let tol = config.optimality_tol;
        loop {
            let bland = *pivots >= bland_after;
            let mut entering = None;
            let mut best = -tol;
            for j in 0..self.cost.len() {
                if self.frozen[j] {
                    continue;
                }
                let rc = self.cost[j];
                if rc < best {
                    entering = Some(j);
                    if bland {
                        break; // first eligible column suffices
                    }
                    best = rc;
                }
            }
            let Some(col) = entering else {
                return Ok(PivotOutcome::Optimal);
            };
            // ratio test; ties resolved toward the smallest basis variable so
            // the Bland fallback genuinely cannot cycle
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > 1e-12 {
                    let ratio = self.rhs[r] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio < lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(PivotOutcome::Unbounded);
            };
            self.pivot(row, col);
            *pivots += 1;
            if *pivots > limit {
                return Err(LpError::PivotLimit { limit });
            }
        }
    }
}

/// Solve the LP. Infeasible and unbounded outcomes are reported in
/// [`Solution::status`]; `Err` is reserved for malformed input and solver
/// breakdown (pivot cap, failed exit checks).
pub fn solve(problem: &LpProblem, config: &SolverConfig) -> Result<Solution, LpError> {
    problem.validate().map_err(|e| LpError::Shape(e.to_string()))?;
    let n = problem.n_cols();

    // internal form is minimization
    let sign = match problem.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    let obj_scale = problem.objective.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let objective: Vec<f64> =
        problem.objective.iter().map(|&c| sign * c / obj_scale).collect();

    // keep only finite bounds; scale rows so tolerances are meaningful
    let mut kept: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut row_scale: Vec<f64> = Vec::new();
    let mut negated: Vec<bool> = Vec::new();
    for (r, row) in problem.ineq.iter().enumerate() {
        let bound = problem.ineq_rhs[r];
        if bound == f64::INFINITY {
            continue;
        }
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(bound.abs()).max(1e-300);
        let mut scaled: Vec<f64> = row.iter().map(|v| v / scale).collect();
        let mut b = bound / scale;
        let neg = b < 0.0;
        if neg {
            for v in scaled.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        kept.push(r);
        rows.push(scaled);
        rhs.push(b);
        row_scale.push(scale);
        negated.push(neg);
    }
    let eq_scale = problem.eq_row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    rows.push(problem.eq_row.iter().map(|v| v / eq_scale).collect());
    rhs.push(1.0 / eq_scale);
    let eq_row_idx = rows.len() - 1;

    let n_kept = kept.len();
    let n_rows = rows.len();
    // columns: structural | one slack per kept row | artificials
    let n_art = negated.iter().filter(|&&v| v).count() + 1;
    let total = n + n_kept + n_art;
    let mut tab_rows = vec![vec![0.0; total]; n_rows];
    for (r, row) in rows.iter().enumerate() {
        tab_rows[r][..n].copy_from_slice(row);
    }
    let mut slack_cols = Vec::with_capacity(n_kept);
    for r in 0..n_kept {
        let sign = if negated[r] { -1.0 } else { 1.0 };
        tab_rows[r][n + r] = sign;
        slack_cols.push((n + r, sign));
    }
    let mut art_cols = Vec::new();
    let mut basis = vec![usize::MAX; n_rows];
    let mut next_art = n + n_kept;
    for r in 0..n_rows {
        let needs_art = r == eq_row_idx || negated[r];
        if needs_art {
            tab_rows[r][next_art] = 1.0;
            basis[r] = next_art;
            art_cols.push(next_art);
            next_art += 1;
        } else {
            basis[r] = n + r;
        }
    }

    let limit = config
        .max_pivots
        .unwrap_or_else(|| 10 * (n_rows + total) * (n_rows + total));
    let bland_after = limit / 2;
    let mut pivots = 0usize;

    // phase 1: drive the artificials to zero
    let mut cost = vec![0.0; total];
    for r in 0..n_rows {
        if art_cols.contains(&basis[r]) {
            for j in 0..total {
                cost[j] -= tab_rows[r][j];
            }
        }
    }
    for &a in &art_cols {
        cost[a] = 0.0; // priced out: they start basic
    }
    let mut tableau = Tableau {
        rows: tab_rows,
        rhs,
        basis,
        cost,

        slack_cols,
        art_cols,
        frozen: vec![false; total],
    };
    match tableau.iterate(config, bland_after, limit, &mut pivots)? {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded => {
            return Err(LpError::Numerical("phase 1 reported unbounded".into()))
        }
    }
    // residual of min Σ artificials = phase1_obj + cost-row constant; track it
    // directly from the artificial basic values instead
    let residual: f64 = tableau
        .basis
        .iter()
        .enumerate()
        .filter(|(_, b)| tableau.art_cols.contains(b))
        .map(|(r, _)| tableau.rhs[r])
        .sum();
    if residual > config.feasibility_tol.max(1e-9) {
        return Ok(Solution::non_optimal(SolutionStatus::Infeasible));
    }

    // pivot lingering zero-level artificials out of the basis when possible;
    // rows with no real coefficients are redundant and can be ignored safely
    // because their rhs is zero
    for r in 0..tableau.rows.len() {
        if tableau.art_cols.contains(&tableau.basis[r]) {
            let col = (0..n + tableau.slack_cols.len())
                .find(|&j| tableau.rows[r][j].abs() > 1e-9);
            if let Some(col) = col {
                tableau.pivot(r, col);
                pivots += 1;
            }
        }
    }

    // phase 2: real objective, artificials barred from re-entering
    for &a in &tableau.art_cols.clone() {
        tableau.frozen[a] = true;
    }
    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&objective);
    for r in 0..tableau.rows.len() {
        let b = tableau.basis[r];
        let cb = if b < n { objective[b] } else { 0.0 };
        if cb != 0.0 {
            let row = tableau.rows[r].clone();
            for (j, v) in row.iter().enumerate() {
                cost[j] -= cb * v;
            }
        }
    }
    for r in 0..tableau.rows.len() {
        cost[tableau.basis[r]] = 0.0;
    }
    tableau.cost = cost;
    match tableau.iterate(config, bland_after, limit, &mut pivots)? {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded => return Ok(Solution::non_optimal(SolutionStatus::Unbounded)),
    }

    // extract x
    let mut x = vec![0.0; n];
    for r in 0..tableau.rows.len() {
        let b = tableau.basis[r];
        if b < n {
            x[b] = tableau.rhs[r];
        }
    }
    let clamp = config.feasibility_tol.max(1e-12);
    for v in x.iter_mut() {
        if *v < 0.0 {
            if *v < -clamp * 1e3 {
                return Err(LpError::Numerical(format!("negative basic value {v}")));
            }
            *v = 0.0;
        }
    }

    // independent feasibility recheck against the original data
    let tol = config.feasibility_tol;
    for (r, row) in problem.ineq.iter().enumerate() {
        let bound = problem.ineq_rhs[r];
        if bound == f64::INFINITY {
            continue;
        }
        let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + bound.abs() + row.iter().zip(&x).map(|(a, v)| (a * v).abs()).sum::<f64>();
        if lhs - bound > tol * scale {
            return Err(LpError::Numerical(format!(
                "row {r} violated on exit: {lhs} > {bound}"
            )));
        }
    }
    let mass: f64 = problem.eq_row.iter().zip(&x).map(|(a, v)| a * v).sum();
    if (mass - 1.0).abs() > tol * 1e3 {
        return Err(LpError::Numerical(format!("mass row drifted to {mass}")));
    }

    let objective_value: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // dual multipliers from the final reduced costs under the initial basis
    // columns: the slack column of row r reads -μ_r (row negation and slack
    // sign are the same factor, so they cancel), the mass row's artificial
    // reads -μ_eq
    let mut mu = vec![0.0; problem.ineq.len()];
    for (k, &(col, _)) in tableau.slack_cols.iter().enumerate() {
        mu[kept[k]] = -tableau.cost[col] * obj_scale / row_scale[k];
    }
    let eq_art = *tableau.art_cols.last().expect("mass row artificial");
    let mu_eq = -tableau.cost[eq_art] * obj_scale / eq_scale;
    let duals = match problem.sense {
        Sense::Minimize => DualSolution { ineq: mu, eq: mu_eq },
        Sense::Maximize => {
            DualSolution { ineq: mu.iter().map(|v| -v).collect(), eq: -mu_eq }
        }
    };

    Ok(Solution {
        x,
        objective_value,
        status: SolutionStatus::Optimal,
        duals: Some(duals),
    })
}
