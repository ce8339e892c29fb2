//! Dense two-phase simplex.
//!
//! Free variables are split into positive parts, inequality rows get slacks,
//! and phase one drives a full artificial basis to zero. Pricing is Dantzig's
//! rule until the objective stalls on degenerate pivots, at which point
//! Bland's rule engages permanently to guarantee termination. The reported
//! objective and residuals are recomputed from the original problem data, not
//! read off the (drift-prone) tableau.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::LinearProgram;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    /// Primal feasibility tolerance (phase-one acceptance, ratio test).
    pub feasibility_tol: T,
    /// Reduced-cost tolerance for declaring optimality.
    pub optimality_tol: T,
    /// Hard cap on pivots across both phases.
    pub max_pivots: usize,
    /// Consecutive non-improving pivots before Bland's rule engages.
    pub stall_pivots: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            feasibility_tol: T::of(1e-8),
            optimality_tol: T::of(1e-8),
            max_pivots: 200_000,
            stall_pivots: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    /// Values of the original variables.
    pub x: Vec<T>,
    /// `c^T x` recomputed from the original objective.
    pub objective: T,
    pub pivots: usize,
    /// Max violation of the original constraints at `x`.
    pub max_residual: T,
    /// Max reduced cost over admissible columns at termination.
    pub max_reduced_cost: T,
    /// Whether Bland's anti-cycling rule was engaged during the solve.
    pub anti_cycling_engaged: bool,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    cost: Vec<T>,
    basis: Vec<usize>,
    num_cols: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, r: usize) -> T {
        self.rows[r][self.num_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot_value = self.rows[row][col];
        let inv = T::one() / pivot_value;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, current) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = current[col];
            if factor != T::zero() {
                for (v, p) in current.iter_mut().zip(&pivot_row) {
                    *v -= factor * *p;
                }
                current[col] = T::zero();
            }
        }
        let factor = self.cost[col];
        if factor != T::zero() {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= factor * *p;
            }
            self.cost[col] = T::zero();
        }
        self.basis[row] = col;
    }

    /// One simplex phase: maximize until no admissible column has positive
    /// reduced cost. Returns Err(Unbounded) when a column has no blocking row.
    fn run_phase(
        &mut self,
        allowed: &dyn Fn(usize) -> bool,
        opts: &SolveOptions<T>,
        pivots: &mut usize,
        bland: &mut bool,
    ) -> Result<()> {
        let m = self.rows.len();
        let mut stall = 0usize;
        loop {
            if *pivots >= opts.max_pivots {
                return Err(Error::NumericFailure(format!(
                    "pivot limit {} reached",
                    opts.max_pivots
                )));
            }
            let entering = if *bland {
                (0..self.num_cols).find(|&j| allowed(j) && self.cost[j] > opts.optimality_tol)
            } else {
                let mut best: Option<(usize, T)> = None;
                for j in 0..self.num_cols {
                    if allowed(j)
                        && self.cost[j] > opts.optimality_tol
                        && best.is_none_or(|(_, c)| self.cost[j] > c)
                    {
                        best = Some((j, self.cost[j]));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(());
            };

            let mut leaving: Option<(usize, T)> = None;
            for r in 0..m {
                let a = self.rows[r][col];
                if a > opts.feasibility_tol {
                    let ratio = self.rhs(r) / a;
                    let better = match leaving {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - opts.feasibility_tol
                                || ((ratio - lratio).abs() <= opts.feasibility_tol
                                    && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(Error::Unbounded);
            };

            if ratio.abs() <= opts.feasibility_tol {
                stall += 1;
                if stall >= opts.stall_pivots {
                    *bland = true;
                }
            } else {
                stall = 0;
            }

            self.pivot(row, col);
            *pivots += 1;
        }
    }
}

/// Solve `lp` to optimality.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, opts: &SolveOptions<T>) -> Result<LpSolution<T>> {
    lp.check_shape()?;

    // Column layout: for each original variable one column, plus a negative
    // part appended for free variables; then slacks; then artificials.
    let n = lp.num_vars;
    let neg_part: Vec<Option<usize>> = {
        let mut next = n;
        lp.free
            .iter()
            .map(|&f| {
                if f {
                    let c = next;
                    next += 1;
                    Some(c)
                } else {
                    None
                }
            })
            .collect()
    };
    let num_split = neg_part.iter().flatten().count();

    let m = lp.eq.len() + lp.le.len();
    // Rows are normalized to nonnegative rhs. A `<=` row keeps its slack
    // column (it becomes a surplus when the row is sign flipped); flipped and
    // equality rows additionally get an artificial basic variable.
    let slack_base = n + num_split;
    let art_base = slack_base + lp.le.len();
    let num_cols = art_base + m;

    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    let mut is_artificial = vec![false; num_cols];
    let mut art_used = 0usize;
    let mut slack_used = 0usize;

    let mut push_row = |coeffs: &[T],
                        rhs: T,
                        is_eq: bool,
                        rows: &mut Vec<Vec<T>>,
                        basis: &mut Vec<usize>,
                        is_artificial: &mut Vec<bool>| {
        let flip = rhs < T::zero();
        let sign = if flip { -T::one() } else { T::one() };
        let mut row = vec![T::zero(); num_cols + 1];
        for (j, &c) in coeffs.iter().enumerate() {
            row[j] = sign * c;
            if let Some(neg) = neg_part[j] {
                row[neg] = -sign * c;
            }
        }
        row[num_cols] = sign * rhs;
        let r = rows.len();
        if !is_eq {
            // Slack (or surplus when the row was flipped).
            let col = slack_base + slack_used;
            slack_used += 1;
            row[col] = sign;
            if !flip {
                basis[r] = col;
                rows.push(row);
                return;
            }
        }
        let col = art_base + art_used;
        art_used += 1;
        row[col] = T::one();
        is_artificial[col] = true;
        basis[r] = col;
        rows.push(row);
    };

    for (coeffs, &rhs) in lp.le.iter().zip(&lp.le_rhs) {
        push_row(
            coeffs,
            rhs,
            false,
            &mut rows,
            &mut basis,
            &mut is_artificial,
        );
    }
    for (coeffs, &rhs) in lp.eq.iter().zip(&lp.eq_rhs) {
        push_row(coeffs, rhs, true, &mut rows, &mut basis, &mut is_artificial);
    }
    drop(push_row);

    let mut tableau = Tableau {
        rows,
        cost: vec![T::zero(); num_cols + 1],
        basis,
        num_cols,
    };

    let mut pivots = 0usize;
    let mut bland = false;

    // Phase one: maximize minus the sum of artificials, canonicalized by
    // adding every artificial-basic row into the cost row.
    if art_used > 0 {
        for j in 0..num_cols {
            if is_artificial[j] {
                tableau.cost[j] = -T::one();
            }
        }
        let mut canon = vec![T::zero(); num_cols + 1];
        for r in 0..m {
            if is_artificial[tableau.basis[r]] {
                for (c, v) in canon.iter_mut().zip(&tableau.rows[r]) {
                    *c += *v;
                }
            }
        }
        for (c, v) in tableau.cost.iter_mut().zip(&canon) {
            *c += *v;
        }
        tableau.run_phase(&|_| true, opts, &mut pivots, &mut bland)?;
        // The cost row tracks minus the phase objective, so the residual
        // infeasibility (sum of artificials) is read off directly.
        let infeasibility = tableau.cost[num_cols];
        if infeasibility > opts.feasibility_tol {
            return Err(Error::Infeasible(infeasibility.to_f64_lossy()));
        }
        // Pivot artificials out of the basis so phase two cannot lift them
        // above zero. Rows with no eligible column are redundant constraints.
        for r in 0..m {
            if !is_artificial[tableau.basis[r]] {
                continue;
            }
            let col = (0..num_cols)
                .find(|&j| !is_artificial[j] && tableau.rows[r][j].abs() > opts.feasibility_tol);
            if let Some(col) = col {
                tableau.pivot(r, col);
                pivots += 1;
            }
        }
    }

    // Phase two: original objective over non-artificial columns.
    for j in 0..num_cols {
        tableau.cost[j] = T::zero();
    }
    tableau.cost[num_cols] = T::zero();
    for j in 0..n {
        tableau.cost[j] = lp.objective[j];
        if let Some(neg) = neg_part[j] {
            tableau.cost[neg] = -lp.objective[j];
        }
    }
    for r in 0..m {
        let b = tableau.basis[r];
        let factor = tableau.cost[b];
        if factor != T::zero() {
            let row = tableau.rows[r].clone();
            for (c, v) in tableau.cost.iter_mut().zip(&row) {
                *c -= factor * *v;
            }
            tableau.cost[b] = T::zero();
        }
    }
    let allowed = |j: usize| !is_artificial[j];
    tableau.run_phase(&allowed, opts, &mut pivots, &mut bland)?;

    // Read the solution back in original variables.
    let mut dense = vec![T::zero(); num_cols];
    for r in 0..m {
        dense[tableau.basis[r]] = tableau.rhs(r);
    }
    let mut x = vec![T::zero(); n];
    for j in 0..n {
        x[j] = dense[j];
        if let Some(neg) = neg_part[j] {
            x[j] -= dense[neg];
        }
    }

    let objective = lp.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum::<T>();

    let mut max_residual = T::zero();
    for (coeffs, &rhs) in lp.eq.iter().zip(&lp.eq_rhs) {
        let lhs: T = coeffs.iter().zip(&x).map(|(&c, &v)| c * v).sum();
        max_residual = max_residual.max((lhs - rhs).abs());
    }
    for (coeffs, &rhs) in lp.le.iter().zip(&lp.le_rhs) {
        let lhs: T = coeffs.iter().zip(&x).map(|(&c, &v)| c * v).sum();
        max_residual = max_residual.max((lhs - rhs).max(T::zero()));
    }
    for (j, &v) in x.iter().enumerate() {
        if !lp.free[j] {
            max_residual = max_residual.max((-v).max(T::zero()));
        }
    }
    if max_residual > T::of(1e4) * opts.feasibility_tol {
        return Err(Error::NumericFailure(format!(
            "primal residual {max_residual} after optimal termination"
        )));
    }

    let mut max_reduced_cost = T::zero();
    for j in 0..num_cols {
        if !is_artificial[j] {
            max_reduced_cost = max_reduced_cost.max(tableau.cost[j]);
        }
    }

    Ok(LpSolution {
        x,
        objective,
        pivots,
        max_residual,
        max_reduced_cost,
        anti_cycling_engaged: bland,
    })
}
