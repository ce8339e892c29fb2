//! Baseline policies: the Whittle index policy for binary-action sub-MDPs and
//! a uniform random policy over the feasible joint action set.
//!
//! Whittle indices are computed per state by bisecting the passive subsidy at
//! which the passive and active actions tie in the single-machine subsidized
//! MDP, with value iteration inside the bisection. Indexability is verified
//! by sweeping a subsidy grid and checking that the passive-optimal set only
//! grows. The index policy activates the top-`⌊b⌋` machines ranked by
//! the index of their current state.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{SubMdp, WcmdpSpec};
use crate::scalar::Scalar;

/// Number of subsidy points in the indexability sweep.
pub const INDEXABILITY_GRID: usize = 201;

/// Per-state Whittle indices for one binary-action sub-MDP.
#[derive(Debug, Clone)]
pub struct WhittleTable<T> {
    pub index: Vec<T>,
    pub indexable: bool,
    pub subsidy_tolerance: T,
}

impl<T: Scalar> WhittleTable<T> {
    /// Errors when the indexability sweep failed; ranking by index is still
    /// possible but loses its interpretation.
    pub fn require_indexable(&self) -> Result<&Self> {
        if self.indexable {
            Ok(self)
        } else {
            Err(Error::NotIndexable(f64::NAN))
        }
    }
}

/// Value iteration for the subsidized single-machine MDP: the passive action
/// earns `r(s, 0) + subsidy`. Iterates until the sup-norm residual drops
/// below `tol * (1 - γ) / (2 γ)`. `values` doubles as the warm start.
fn subsidized_value_iteration<T: Scalar>(
    sub: &SubMdp<T>,
    gamma: T,
    subsidy: T,
    tol: T,
    values: &mut [T],
) {
    let s_count = sub.num_states();
    let stop = if gamma > T::zero() {
        tol * (T::one() - gamma) / (T::of(2.0) * gamma)
    } else {
        T::infinity() // one sweep is exact when γ = 0
    };
    let mut next = vec![T::zero(); s_count];
    loop {
        let mut residual = T::zero();
        for s in 0..s_count {
            let mut passive = sub.r(s, 0) + subsidy;
            let mut active = sub.r(s, 1);
            for s2 in 0..s_count {
                passive += gamma * sub.p(s, 0, s2) * values[s2];
                active += gamma * sub.p(s, 1, s2) * values[s2];
            }
            next[s] = passive.max(active);
            residual = residual.max((next[s] - values[s]).abs());
        }
        values.copy_from_slice(&next);
        if residual < stop || gamma == T::zero() {
            break;
        }
    }
}

/// Action values of the converged subsidized MDP at one state.
fn action_gap<T: Scalar>(sub: &SubMdp<T>, gamma: T, subsidy: T, values: &[T], s: usize) -> T {
    let s_count = sub.num_states();
    let mut passive = sub.r(s, 0) + subsidy;
    let mut active = sub.r(s, 1);
    for s2 in 0..s_count {
        passive += gamma * sub.p(s, 0, s2) * values[s2];
        active += gamma * sub.p(s, 1, s2) * values[s2];
    }
    active - passive
}

/// Compute per-state Whittle indices by bisection over the subsidy.
pub fn whittle_indices<T: Scalar>(sub: &SubMdp<T>, gamma: T, tol: T) -> Result<WhittleTable<T>> {
    if sub.num_actions() != 2 {
        return Err(Error::NotBinaryAction(sub.num_actions()));
    }
    let s_count = sub.num_states();
    let r_max = (0..s_count)
        .flat_map(|s| [sub.r(s, 0).abs(), sub.r(s, 1).abs()])
        .fold(T::zero(), T::max);
    // Index magnitudes are bounded by achievable value differences.
    let bracket = (T::one() + r_max) / (T::one() - gamma);
    let vi_tol = tol.min(T::of(1e-9));

    let mut index = vec![T::zero(); s_count];
    for s in 0..s_count {
        let mut lo = -bracket;
        let mut hi = bracket;
        let mut values = vec![T::zero(); s_count];
        subsidized_value_iteration(sub, gamma, lo, vi_tol, &mut values);
        let gap_lo = action_gap(sub, gamma, lo, &values, s);
        subsidized_value_iteration(sub, gamma, hi, vi_tol, &mut values);
        let gap_hi = action_gap(sub, gamma, hi, &values, s);
        if gap_lo <= T::zero() {
            // Passive already preferred at the lower bracket edge.
            index[s] = lo;
            continue;
        }
        if gap_hi >= T::zero() {
            index[s] = hi;
            continue;
        }
        while hi - lo > tol {
            let mid = (lo + hi) / T::of(2.0);
            subsidized_value_iteration(sub, gamma, mid, vi_tol, &mut values);
            if action_gap(sub, gamma, mid, &values, s) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        index[s] = (lo + hi) / T::of(2.0);
    }

    let indexable = passive_sets_grow_monotonically(sub, gamma, bracket, vi_tol);
    Ok(WhittleTable {
        index,
        indexable,
        subsidy_tolerance: tol,
    })
}

/// Sweep the subsidy grid and verify the passive-optimal set never loses a
/// state as the subsidy grows.
fn passive_sets_grow_monotonically<T: Scalar>(
    sub: &SubMdp<T>,
    gamma: T,
    bracket: T,
    vi_tol: T,
) -> bool {
    let s_count = sub.num_states();
    let mut values = vec![T::zero(); s_count];
    let mut previous: Option<Vec<bool>> = None;
    let tie = T::of(1e-9);
    for i in 0..INDEXABILITY_GRID {
        let frac = T::of_usize(i) / T::of_usize(INDEXABILITY_GRID - 1);
        let subsidy = -bracket + frac * (bracket + bracket);
        subsidized_value_iteration(sub, gamma, subsidy, vi_tol, &mut values);
        let passive: Vec<bool> = (0..s_count)
            .map(|s| action_gap(sub, gamma, subsidy, &values, s) <= tie)
            .collect();
        if let Some(prev) = &previous {
            for s in 0..s_count {
                if prev[s] && !passive[s] {
                    return false;
                }
            }
        }
        previous = Some(passive);
    }
    true
}

/// Whittle index policy: activate the `⌊b⌋` machines whose current states
/// carry the largest positive index, ties broken by ascending machine
/// number; machines with non-positive index stay passive.
pub fn wip_act<T: Scalar>(joint_state: &[usize], table: &WhittleTable<T>, budget: T) -> Vec<usize> {
    let allowance = budget.max(T::zero()).floor().to_f64_lossy() as usize;
    let mut ranked: Vec<(usize, T)> = joint_state
        .iter()
        .enumerate()
        .filter_map(|(machine, &s)| {
            let value = table.index[s];
            (value > T::zero()).then_some((machine, value))
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut action = vec![0usize; joint_state.len()];
    for &(machine, _) in ranked.iter().take(allowance) {
        action[machine] = 1;
    }
    action
}

/// Uniform random joint policy over the budget-feasible action set.
///
/// With integer-valued consumption the draw is exact and never enumerates
/// the action set: suffix counts `f(n, remaining budget)` computed by
/// dynamic programming give the marginal probability of each machine's
/// action. Non-integer consumption falls back to enumerating the feasible
/// set once.
pub struct RandomJointPolicy<T> {
    consumption: Vec<Vec<Vec<T>>>,
    num_actions: Vec<usize>,
    integer: Option<IntegerBudgetSampler>,
    enumerated: Option<Vec<Vec<usize>>>,
}

struct IntegerBudgetSampler {
    /// `d[k][n][a]` as integers.
    consumption: Vec<Vec<Vec<i64>>>,
    budgets: Vec<i64>,
    /// Suffix counts keyed by (machine index, remaining budgets).
    memo: HashMap<(usize, Vec<i64>), f64>,
}

impl IntegerBudgetSampler {
    fn count(
        &mut self,
        n: usize,
        remaining: &[i64],
        num_machines: usize,
        actions: &[usize],
    ) -> f64 {
        if n == num_machines {
            return 1.0;
        }
        let key = (n, remaining.to_vec());
        if let Some(&c) = self.memo.get(&key) {
            return c;
        }
        let mut total = 0.0;
        for a in 0..actions[n] {
            if let Some(next) = self.spend(n, a, remaining) {
                total += self.count(n + 1, &next, num_machines, actions);
            }
        }
        self.memo.insert(key, total);
        total
    }

    fn spend(&self, n: usize, a: usize, remaining: &[i64]) -> Option<Vec<i64>> {
        let mut next = remaining.to_vec();
        for (k, rem) in next.iter_mut().enumerate() {
            *rem -= self.consumption[k][n][a];
            if *rem < 0 {
                return None;
            }
        }
        Some(next)
    }
}

impl<T: Scalar> RandomJointPolicy<T> {
    pub fn new(spec: &WcmdpSpec<T>) -> Self {
        let n = spec.num_submdps();
        let k_count = spec.num_resources();
        let consumption: Vec<Vec<Vec<T>>> = (0..k_count)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        (0..spec.sub_mdp(i).num_actions())
                            .map(|a| spec.consumption(k, i, a))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let num_actions: Vec<usize> = (0..n).map(|i| spec.sub_mdp(i).num_actions()).collect();

        let all_integer = consumption
            .iter()
            .flatten()
            .flatten()
            .all(|&d| d.fract() == T::zero() && d.to_f64_lossy() <= i64::MAX as f64);
        let integer = all_integer.then(|| IntegerBudgetSampler {
            consumption: consumption
                .iter()
                .map(|per| {
                    per.iter()
                        .map(|row| row.iter().map(|d| d.to_f64_lossy() as i64).collect())
                        .collect()
                })
                .collect(),
            budgets: spec
                .budgets()
                .iter()
                .map(|b| b.to_f64_lossy().floor() as i64)
                .collect(),
            memo: HashMap::new(),
        });
        let enumerated = (!all_integer).then(|| crate::model::feasible_joint_actions(spec));

        Self {
            consumption,
            num_actions,
            integer,
            enumerated,
        }
    }

    /// Draw a uniformly random feasible joint action.
    pub fn act<R: Rng>(&mut self, rng: &mut R) -> Vec<usize> {
        if let Some(sampler) = &mut self.integer {
            let num_machines = self.num_actions.len();
            let mut remaining = sampler.budgets.clone();
            let mut action = Vec::with_capacity(num_machines);
            for n in 0..num_machines {
                let total = sampler.count(n, &remaining, num_machines, &self.num_actions);
                debug_assert!(total > 0.0, "idle action guarantees a feasible suffix");
                let mut draw = rng.random::<f64>() * total;
                let mut chosen = None;
                for a in 0..self.num_actions[n] {
                    if let Some(next) = sampler.spend(n, a, &remaining) {
                        let suffix = sampler.count(n + 1, &next, num_machines, &self.num_actions);
                        draw -= suffix;
                        if draw < 0.0 {
                            chosen = Some((a, next));
                            break;
                        }
                    }
                }
                let (a, next) = chosen.unwrap_or_else(|| {
                    // Float underflow on the last feasible branch.
                    let a = (0..self.num_actions[n])
                        .rev()
                        .find(|&a| sampler.spend(n, a, &remaining).is_some())
                        .expect("at least the idle action is feasible");
                    (a, sampler.spend(n, a, &remaining).unwrap())
                });
                action.push(a);
                remaining = next;
            }
            action
        } else {
            let set = self.enumerated.as_ref().expect("fallback enumeration");
            set[rng.random_range(0..set.len())].clone()
        }
    }

    /// Resource use of a joint action, for the feasibility assertions.
    pub fn usage(&self, action: &[usize]) -> Vec<T> {
        (0..self.consumption.len())
            .map(|k| {
                action
                    .iter()
                    .enumerate()
                    .map(|(n, &a)| self.consumption[k][n][a])
                    .sum()
            })
            .collect()
    }
}
