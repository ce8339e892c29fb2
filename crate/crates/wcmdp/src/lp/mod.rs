//! Exact linear-programming machinery: the Gini-weighted occupancy LP over
//! the joint model, the utilitarian count-space dual LP, policy extraction,
//! and a self-contained dense simplex.
//!
//! Both builders fix their variable orders (auditable through
//! [`LinearProgram::names`]) so bases and extracted policies are reproducible
//! run to run.

pub mod mps;
pub mod simplex;

use std::time::Instant;

use crate::count::{CountAction, CountModel};
use crate::error::{Error, Result};
use crate::fairness::GgfWeights;
use crate::model::JointModel;
use crate::scalar::Scalar;

pub use simplex::{solve, LpSolution, SolveOptions};

/// Occupancy entries may dip this far below zero before validation fails.
pub const Q_NONNEG_TOL: f64 = 1e-9;
/// Max allowed flow-conservation residual per state.
pub const FLOW_RESIDUAL_TOL: f64 = 1e-7;
/// Tolerance on the total discounted mass `Σ q = 1 / (1 - γ)`.
pub const MASS_TOL: f64 = 1e-6;
/// Occupancy row sums at or below this are treated as unreached states.
pub const UNREACHED_TOL: f64 = 1e-12;

/// A dense `max c^T x` program with equality rows, `<=` rows, and per-variable
/// lower bounds of either zero or minus infinity (`free`).
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub eq: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub le: Vec<Vec<T>>,
    pub le_rhs: Vec<T>,
    pub free: Vec<bool>,
    /// Human-readable variable names for audits and the MPS dump.
    pub names: Vec<String>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn constraint_count(&self) -> usize {
        self.eq.len() + self.le.len()
    }

    pub fn variable_count(&self) -> usize {
        self.num_vars
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let n = self.num_vars;
        let check_len = |len: usize, what: &str| {
            if len != n {
                Err(Error::InvalidModel(format!(
                    "{what} has {len} entries, expected {n}"
                )))
            } else {
                Ok(())
            }
        };
        check_len(self.objective.len(), "objective")?;
        check_len(self.free.len(), "free mask")?;
        check_len(self.names.len(), "name map")?;
        if self.eq.len() != self.eq_rhs.len() || self.le.len() != self.le_rhs.len() {
            return Err(Error::InvalidModel("row/rhs count mismatch".into()));
        }
        for row in self.eq.iter().chain(&self.le) {
            check_len(row.len(), "constraint row")?;
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective)
            || !finite(&self.eq_rhs)
            || !finite(&self.le_rhs)
            || !self.eq.iter().chain(&self.le).all(|r| finite(r))
        {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        Ok(())
    }
}

/// Sizes and wall times of one LP build/solve/extract cycle.
#[derive(Debug, Clone, Copy, Default)]
pub struct LpStats {
    pub constraint_count: usize,
    pub variable_count: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub extract_seconds: f64,
    pub pivots: usize,
}

/// Build the Gini-weighted occupancy LP over an expanded joint model.
///
/// Variables are ordered `λ_1..λ_N, ν_1..ν_N`, then `q(s, a)` with states
/// lexicographic and actions in feasible-list order. Constraints are the
/// `N^2` welfare rows `λ_i + ν_j <= w_i Σ r_j q` followed by one discounted
/// flow-conservation row per joint state.
pub fn build_ggf_lp<T: Scalar>(joint: &JointModel<T>, weights: &GgfWeights<T>) -> LinearProgram<T> {
    let n = joint.num_submdps();
    assert_eq!(weights.len(), n, "weights must cover every sub-MDP");
    let num_states = joint.num_states();
    let num_actions = joint.feasible_actions().len();
    let num_q = num_states * num_actions;
    let num_vars = 2 * n + num_q;
    let gamma = joint.discount();

    let q_var = |s: usize, a: usize| 2 * n + s * num_actions + a;

    let mut names = Vec::with_capacity(num_vars);
    for i in 0..n {
        names.push(format!("lambda[{i}]"));
    }
    for j in 0..n {
        names.push(format!("nu[{j}]"));
    }
    for s in 0..num_states {
        for a in 0..num_actions {
            names.push(format!("q[s{s},a{a}]"));
        }
    }

    let mut objective = vec![T::zero(); num_vars];
    for v in objective.iter_mut().take(2 * n) {
        *v = T::one();
    }

    let mut free = vec![false; num_vars];
    for f in free.iter_mut().take(2 * n) {
        *f = true;
    }

    // Welfare rows: lambda_i + nu_j - w_i * sum_{s,a} r_j(s,a) q(s,a) <= 0.
    let mut le = Vec::with_capacity(n * n);
    let mut le_rhs = Vec::with_capacity(n * n);
    for i in 0..n {
        let w_i = weights.as_slice()[i];
        for j in 0..n {
            let mut row = vec![T::zero(); num_vars];
            row[i] = T::one();
            row[n + j] = T::one();
            for s in 0..num_states {
                for a in 0..num_actions {
                    row[q_var(s, a)] = -w_i * joint.r(s, a, j);
                }
            }
            le.push(row);
            le_rhs.push(T::zero());
        }
    }

    // Flow conservation per state: sum_a q(s,a) - γ sum_{s',a} P(s|s',a) q(s',a) = μ(s).
    let mut eq = Vec::with_capacity(num_states);
    let mut eq_rhs = Vec::with_capacity(num_states);
    for s in 0..num_states {
        let mut row = vec![T::zero(); num_vars];
        for a in 0..num_actions {
            row[q_var(s, a)] += T::one();
        }
        for s_prev in 0..num_states {
            for a in 0..num_actions {
                let p = joint.p(s_prev, a, s);
                if p != T::zero() {
                    row[q_var(s_prev, a)] -= gamma * p;
                }
            }
        }
        eq.push(row);
        eq_rhs.push(joint.initial()[s]);
    }

    LinearProgram {
        num_vars,
        objective,
        eq,
        eq_rhs,
        le,
        le_rhs,
        free,
        names,
    }
}

/// Build the utilitarian dual LP over a count aggregation model: one
/// occupancy variable per feasible `(x, u)` pair, one flow row per count
/// state, objective `Σ r̄(x, u) q(x, u)`.
pub fn build_count_dual_lp<T: Scalar>(count: &CountModel<T>) -> LinearProgram<T> {
    let num_states = count.num_states();
    let gamma = count.discount();

    let mut offsets = Vec::with_capacity(num_states);
    let mut num_vars = 0usize;
    for i in 0..num_states {
        offsets.push(num_vars);
        num_vars += count.actions_of(i).len();
    }

    let mut names = Vec::with_capacity(num_vars);
    let mut objective = vec![T::zero(); num_vars];
    for i in 0..num_states {
        for (j, _) in count.actions_of(i).iter().enumerate() {
            names.push(format!("q[x{i},u{j}]"));
            objective[offsets[i] + j] = count.mean_reward_of(i, j);
        }
    }

    let mut eq = Vec::with_capacity(num_states);
    let mut eq_rhs = Vec::with_capacity(num_states);
    for target in 0..num_states {
        let mut row = vec![T::zero(); num_vars];
        for j in 0..count.actions_of(target).len() {
            row[offsets[target] + j] += T::one();
        }
        for source in 0..num_states {
            for j in 0..count.actions_of(source).len() {
                let p = count.transition_row(source, j)[target];
                if p != T::zero() {
                    row[offsets[source] + j] -= gamma * p;
                }
            }
        }
        eq.push(row);
        eq_rhs.push(count.initial()[target]);
    }

    LinearProgram {
        num_vars,
        objective,
        eq,
        eq_rhs,
        le: vec![],
        le_rhs: vec![],
        free: vec![false; num_vars],
        names,
    }
}

/// Solved occupancy measure for the joint model, with the welfare dual pair
/// `(λ, ν)` and the per-sub-MDP value vector.
#[derive(Debug, Clone)]
pub struct OccupancySolution<T> {
    /// `q[s * |A| + a]`, aligned with the joint model's feasible action list.
    pub q: Vec<T>,
    pub ggf_dual_lambda: Vec<T>,
    pub ggf_dual_nu: Vec<T>,
    pub objective_value: T,
    pub value_vector: Vec<T>,
}

impl<T: Scalar> OccupancySolution<T> {
    /// Check nonnegativity, flow conservation, and total discounted mass.
    pub fn validate(&self, joint: &JointModel<T>) -> Result<()> {
        let num_actions = joint.feasible_actions().len();
        let gamma = joint.discount();
        for &q in &self.q {
            if q < -T::tol(Q_NONNEG_TOL) {
                return Err(Error::NumericFailure(format!("occupancy entry {q} < 0")));
            }
        }
        for s in 0..joint.num_states() {
            let mut lhs = T::zero();
            for a in 0..num_actions {
                lhs += self.q[s * num_actions + a];
            }
            for s_prev in 0..joint.num_states() {
                for a in 0..num_actions {
                    lhs -= gamma * joint.p(s_prev, a, s) * self.q[s_prev * num_actions + a];
                }
            }
            if (lhs - joint.initial()[s]).abs() > T::tol(FLOW_RESIDUAL_TOL) {
                return Err(Error::NumericFailure(format!(
                    "flow residual {} at state {s}",
                    (lhs - joint.initial()[s]).abs()
                )));
            }
        }
        let mass: T = self.q.iter().copied().sum();
        let expected = T::one() / (T::one() - gamma);
        if (mass - expected).abs() > T::tol(MASS_TOL) {
            return Err(Error::NumericFailure(format!(
                "total mass {mass}, expected {expected}"
            )));
        }
        Ok(())
    }
}

/// Per-sub-MDP expected discounted values `V_n = Σ_(s,a) r_n(s,a) q(s,a)`.
pub fn value_vector_of<T: Scalar>(q: &[T], joint: &JointModel<T>) -> Vec<T> {
    let n = joint.num_submdps();
    let num_actions = joint.feasible_actions().len();
    let mut values = vec![T::zero(); n];
    for s in 0..joint.num_states() {
        for a in 0..num_actions {
            let weight = q[s * num_actions + a];
            if weight != T::zero() {
                for (i, value) in values.iter_mut().enumerate() {
                    *value += weight * joint.r(s, a, i);
                }
            }
        }
    }
    values
}

/// A stationary stochastic policy over the joint model's feasible action
/// list: `probs[s][a]` sums to one per state.
#[derive(Debug, Clone)]
pub struct JointPolicyTable<T> {
    pub probs: Vec<Vec<T>>,
}

impl<T: Scalar> JointPolicyTable<T> {
    pub fn sample_action<R: rand::Rng>(&self, state: usize, rng: &mut R) -> usize {
        sample_categorical(&self.probs[state], rng)
    }
}

/// Normalize occupancies into a stationary policy. Unreached states (zero
/// occupancy row) fall back to the all-idle joint action, which keeps the
/// extracted policy budget-feasible everywhere.
pub fn extract_policy<T: Scalar>(q: &[T], joint: &JointModel<T>) -> JointPolicyTable<T> {
    let num_actions = joint.feasible_actions().len();
    let mut probs = Vec::with_capacity(joint.num_states());
    for s in 0..joint.num_states() {
        let row = &q[s * num_actions..(s + 1) * num_actions];
        let total: T = row.iter().map(|&v| v.max(T::zero())).sum();
        if total <= T::of(UNREACHED_TOL) {
            let mut fallback = vec![T::zero(); num_actions];
            fallback[joint.idle_action_index()] = T::one();
            probs.push(fallback);
        } else {
            probs.push(row.iter().map(|&v| v.max(T::zero()) / total).collect());
        }
    }
    JointPolicyTable { probs }
}

/// Occupancy solution of the count-space dual LP.
#[derive(Debug, Clone)]
pub struct CountOccupancySolution<T> {
    /// `q[state][action_idx]`, aligned with `CountModel::actions_of`.
    pub q: Vec<Vec<T>>,
    pub objective_value: T,
}

/// A stationary stochastic policy over count states.
#[derive(Debug, Clone)]
pub struct CountPolicyTable<T> {
    pub probs: Vec<Vec<T>>,
}

impl<T: Scalar> CountPolicyTable<T> {
    pub fn sample_action<R: rand::Rng>(&self, state: usize, rng: &mut R) -> usize {
        sample_categorical(&self.probs[state], rng)
    }
}

/// Normalize count occupancies into a stationary count policy, falling back
/// to the all-idle count action on unreached states.
pub fn extract_count_policy<T: Scalar>(
    solution: &CountOccupancySolution<T>,
    count: &CountModel<T>,
) -> Result<CountPolicyTable<T>> {
    let idle = count
        .spec()
        .idle_action()
        .ok_or_else(|| Error::InvalidModel("count model lacks an idle action".into()))?;
    let mut probs = Vec::with_capacity(count.num_states());
    for (i, row) in solution.q.iter().enumerate() {
        let total: T = row.iter().map(|&v| v.max(T::zero())).sum();
        if total <= T::of(UNREACHED_TOL) {
            let x = &count.states()[i];
            let mut idle_rows = Vec::with_capacity(x.num_states());
            for s in 0..x.num_states() {
                let mut r = vec![0usize; count.spec().sub().num_actions()];
                r[idle] = x.counts()[s];
                idle_rows.push(r);
            }
            let idle_action = CountAction::from_rows(idle_rows);
            let idx = count
                .actions_of(i)
                .iter()
                .position(|u| *u == idle_action)
                .ok_or_else(|| {
                    Error::InfeasibleModel("all-idle count action missing from feasible set".into())
                })?;
            let mut fallback = vec![T::zero(); row.len()];
            fallback[idx] = T::one();
            probs.push(fallback);
        } else {
            probs.push(row.iter().map(|&v| v.max(T::zero()) / total).collect());
        }
    }
    Ok(CountPolicyTable { probs })
}

pub(crate) fn sample_categorical<T: Scalar, R: rand::Rng>(probs: &[T], rng: &mut R) -> usize {
    let total: T = probs.iter().copied().sum();
    let mut draw = T::of(rng.random::<f64>()) * total;
    for (i, &p) in probs.iter().enumerate() {
        draw -= p;
        if draw < T::zero() {
            return i;
        }
    }
    probs.len() - 1
}

/// Build, solve, and extract the Gini-weighted LP in one step.
pub fn solve_ggf_lp<T: Scalar>(
    joint: &JointModel<T>,
    weights: &GgfWeights<T>,
    opts: &SolveOptions<T>,
) -> Result<(OccupancySolution<T>, LpStats)> {
    let n = joint.num_submdps();
    let build_start = Instant::now();
    let lp = build_ggf_lp(joint, weights);
    let build_seconds = build_start.elapsed().as_secs_f64();

    let solve_start = Instant::now();
    let raw = solve(&lp, opts)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let extract_start = Instant::now();
    let q = raw.x[2 * n..].to_vec();
    let solution = OccupancySolution {
        ggf_dual_lambda: raw.x[..n].to_vec(),
        ggf_dual_nu: raw.x[n..2 * n].to_vec(),
        objective_value: raw.objective,
        value_vector: value_vector_of(&q, joint),
        q,
    };
    solution.validate(joint)?;
    let extract_seconds = extract_start.elapsed().as_secs_f64();

    Ok((
        solution,
        LpStats {
            constraint_count: lp.constraint_count(),
            variable_count: lp.variable_count(),
            build_seconds,
            solve_seconds,
            extract_seconds,
            pivots: raw.pivots,
        },
    ))
}

/// Build and solve the count-space dual LP in one step.
pub fn solve_count_dual_lp<T: Scalar>(
    count: &CountModel<T>,
    opts: &SolveOptions<T>,
) -> Result<(CountOccupancySolution<T>, LpStats)> {
    let build_start = Instant::now();
    let lp = build_count_dual_lp(count);
    let build_seconds = build_start.elapsed().as_secs_f64();

    let solve_start = Instant::now();
    let raw = solve(&lp, opts)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let extract_start = Instant::now();
    let mut q = Vec::with_capacity(count.num_states());
    let mut cursor = 0usize;
    for i in 0..count.num_states() {
        let len = count.actions_of(i).len();
        q.push(raw.x[cursor..cursor + len].to_vec());
        cursor += len;
    }
    // Total discounted mass in count space follows the same identity.
    let mass: T = q.iter().flatten().copied().sum();
    let expected = T::one() / (T::one() - count.discount());
    if (mass - expected).abs() > T::tol(MASS_TOL) {
        return Err(Error::NumericFailure(format!(
            "count occupancy mass {mass}, expected {expected}"
        )));
    }
    let solution = CountOccupancySolution {
        q,
        objective_value: raw.objective,
    };
    let extract_seconds = extract_start.elapsed().as_secs_f64();

    Ok((
        solution,
        LpStats {
            constraint_count: lp.constraint_count(),
            variable_count: lp.variable_count(),
            build_seconds,
            solve_seconds,
            extract_seconds,
            pivots: raw.pivots,
        },
    ))
}
