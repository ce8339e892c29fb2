//! Count aggregation of symmetric weakly coupled MDPs.
//!
//! When all sub-MDPs are identical the joint state collapses to the vector of
//! state counts `x` (with `Σ_s x_s = N`) and the joint action to the matrix of
//! action counts `u(s, a)`. This module enumerates count states (size
//! `C(N+S-1, S-1)` instead of `S^N`), enumerates budget-feasible count
//! actions, and builds the aggregated transition, mean-reward, and initial
//! tables that the count-space LP and simulator consume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_symmetric, SubMdp, WcmdpSpec, SYMMETRY_TOL};
use crate::scalar::Scalar;

/// Row-sum tolerance for aggregated transition rows.
pub const COUNT_ROW_TOL: f64 = 1e-9;
/// Sum tolerance for the aggregated initial distribution.
pub const COUNT_INIT_TOL: f64 = 1e-10;

/// State counts `x` with `Σ_s x_s = N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountState {
    counts: Vec<usize>,
}

impl CountState {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Count proportions `x / N`, a point on the probability simplex.
    pub fn proportions<T: Scalar>(&self) -> Vec<T> {
        let n = T::of_usize(self.total().max(1));
        self.counts.iter().map(|&c| T::of_usize(c) / n).collect()
    }
}

/// Action counts `u(s, a)` paired with a [`CountState`]: row `s` sums to
/// `x_s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountAction {
    counts: Vec<usize>,
    num_actions: usize,
}

impl CountAction {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            counts: vec![0; num_states * num_actions],
            num_actions,
        }
    }

    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let num_actions = rows.first().map_or(0, Vec::len);
        Self {
            counts: rows.into_iter().flatten().collect(),
            num_actions,
        }
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> usize {
        self.counts[s * self.num_actions + a]
    }

    #[inline]
    pub fn add(&mut self, s: usize, a: usize, delta: usize) {
        self.counts[s * self.num_actions + a] += delta;
    }

    pub fn num_states(&self) -> usize {
        if self.num_actions == 0 {
            0
        } else {
            self.counts.len() / self.num_actions
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[usize] {
        &self.counts[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Symmetric view of a weakly coupled spec: one shared sub-MDP, sub-MDP
/// independent consumption `d[k][a]`, budgets, and the machine count.
#[derive(Debug, Clone)]
pub struct SymmetricSpec<T> {
    sub: SubMdp<T>,
    consumption: Vec<Vec<T>>,
    budgets: Vec<T>,
    num_submdps: usize,
    discount: T,
}

impl<T: Scalar> SymmetricSpec<T> {
    pub fn from_spec(spec: &WcmdpSpec<T>) -> Result<Self> {
        Self::from_spec_with_tol(spec, T::of(SYMMETRY_TOL))
    }

    pub fn from_spec_with_tol(spec: &WcmdpSpec<T>, tol: T) -> Result<Self> {
        if !is_symmetric(spec, tol) {
            return Err(Error::NotSymmetric(
                "count aggregation requires identical sub-MDPs, shared consumption, and a shared initial distribution".into(),
            ));
        }
        Ok(Self {
            sub: spec.sub_mdp(0).clone(),
            consumption: spec.shared_consumption(),
            budgets: spec.budgets().to_vec(),
            num_submdps: spec.num_submdps(),
            discount: spec.discount(),
        })
    }

    pub fn from_parts(
        sub: SubMdp<T>,
        consumption: Vec<Vec<T>>,
        budgets: Vec<T>,
        num_submdps: usize,
        discount: T,
    ) -> Self {
        Self {
            sub,
            consumption,
            budgets,
            num_submdps,
            discount,
        }
    }

    pub fn sub(&self) -> &SubMdp<T> {
        &self.sub
    }

    /// `d_k(a)`.
    #[inline]
    pub fn d(&self, k: usize, a: usize) -> T {
        self.consumption[k][a]
    }

    pub fn consumption(&self) -> &[Vec<T>] {
        &self.consumption
    }

    pub fn budgets(&self) -> &[T] {
        &self.budgets
    }

    pub fn num_resources(&self) -> usize {
        self.budgets.len()
    }

    pub fn num_submdps(&self) -> usize {
        self.num_submdps
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn max_consumption(&self, k: usize) -> T {
        self.consumption[k].iter().copied().fold(T::zero(), T::max)
    }

    pub fn idle_action(&self) -> Option<usize> {
        (0..self.sub.num_actions())
            .find(|&a| (0..self.num_resources()).all(|k| self.d(k, a) == T::zero()))
    }

    /// Rebuild the explicit weakly coupled spec (N cloned sub-MDPs).
    pub fn to_wcmdp(&self) -> WcmdpSpec<T> {
        WcmdpSpec::new(
            vec![self.sub.clone(); self.num_submdps],
            self.consumption
                .iter()
                .map(|row| vec![row.clone(); self.num_submdps])
                .collect(),
            self.budgets.clone(),
            self.discount,
        )
        .expect("symmetric view always reassembles into a valid spec")
    }

    /// Same machines and budgets, different machine count.
    pub fn with_num_submdps(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.num_submdps = n;
        out
    }

    pub fn with_budgets(&self, budgets: Vec<T>) -> Self {
        let mut out = self.clone();
        out.budgets = budgets;
        out
    }
}

/// Map a joint state tuple to its count representation.
pub fn count_of(joint_state: &[usize], num_states: usize) -> CountState {
    let mut counts = vec![0; num_states];
    for &s in joint_state {
        counts[s] += 1;
    }
    CountState::new(counts)
}

/// Map a joint action tuple (paired with its joint state) to action counts.
pub fn action_count_of(
    joint_state: &[usize],
    joint_action: &[usize],
    num_states: usize,
    num_actions: usize,
) -> CountAction {
    let mut u = CountAction::new(num_states, num_actions);
    for (&s, &a) in joint_state.iter().zip(joint_action) {
        u.add(s, a, 1);
    }
    u
}

/// All count vectors with `Σ x_s = total`, in colexicographic order (compare
/// the last differing coordinate). The order is fixed so LP variable indices
/// are reproducible.
pub fn enumerate_count_states(total: usize, num_states: usize) -> Vec<CountState> {
    fn recurse(total: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            out.push(vec![total]);
            return;
        }
        for last in 0..=total {
            let mut heads = Vec::new();
            recurse(total - last, parts - 1, &mut heads);
            for mut head in heads {
                head.push(last);
                out.push(head);
            }
        }
    }
    let mut raw = Vec::new();
    recurse(total, num_states, &mut raw);
    raw.into_iter().map(CountState::new).collect()
}

/// `C(n + k - 1, k - 1)`: the number of count states for `n` machines over
/// `k` states.
pub fn num_count_states(n: usize, k: usize) -> usize {
    binomial(n + k - 1, k - 1)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result as usize
}

/// Budget-feasible count actions for `x`, in lexicographic order of the
/// flattened `u` matrix.
pub fn enumerate_feasible_actions<T: Scalar>(
    x: &CountState,
    spec: &SymmetricSpec<T>,
) -> Vec<CountAction> {
    let s_count = x.num_states();
    let a_count = spec.sub().num_actions();
    let k_count = spec.num_resources();
    let mut out = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(s_count);
    let mut used = vec![T::zero(); k_count];

    fn row_compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
        // Lexicographic: first coordinate ascending, recurse on the rest.
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in row_compositions(total - first, parts - 1) {
                let mut row = Vec::with_capacity(parts);
                row.push(first);
                row.append(&mut rest);
                out.push(row);
            }
        }
        out
    }

    fn recurse<T: Scalar>(
        x: &CountState,
        spec: &SymmetricSpec<T>,
        s: usize,
        rows: &mut Vec<Vec<usize>>,
        used: &mut Vec<T>,
        out: &mut Vec<CountAction>,
    ) {
        if s == x.num_states() {
            out.push(CountAction::from_rows(rows.clone()));
            return;
        }
        let a_count = spec.sub().num_actions();
        for row in row_compositions(x.counts()[s], a_count) {
            let mut fits = true;
            let mut delta = vec![T::zero(); spec.num_resources()];
            for k in 0..spec.num_resources() {
                for (a, &cnt) in row.iter().enumerate() {
                    delta[k] += spec.d(k, a) * T::of_usize(cnt);
                }
                if used[k] + delta[k] > spec.budgets()[k] {
                    fits = false;
                    break;
                }
            }
            if !fits {
                continue;
            }
            for k in 0..spec.num_resources() {
                used[k] += delta[k];
            }
            rows.push(row);
            recurse(x, spec, s + 1, rows, used, out);
            rows.pop();
            for k in 0..spec.num_resources() {
                used[k] -= delta[k];
            }
        }
    }

    let _ = a_count;
    recurse(x, spec, 0, &mut rows, &mut used, &mut out);
    out
}

/// Check that `u` is a feasible action for `x`: row sums match and budgets
/// hold.
pub fn check_feasible<T: Scalar>(
    x: &CountState,
    u: &CountAction,
    spec: &SymmetricSpec<T>,
) -> Result<()> {
    if u.num_states() != x.num_states() || u.num_actions() != spec.sub().num_actions() {
        return Err(Error::InfeasibleAction(
            "action count shape does not match".into(),
        ));
    }
    for s in 0..x.num_states() {
        let row_sum: usize = u.row(s).iter().sum();
        if row_sum != x.counts()[s] {
            return Err(Error::InfeasibleAction(format!(
                "row {s} sums to {row_sum}, state count is {}",
                x.counts()[s]
            )));
        }
    }
    for k in 0..spec.num_resources() {
        let mut total = T::zero();
        for s in 0..x.num_states() {
            for a in 0..u.num_actions() {
                total += spec.d(k, a) * T::of_usize(u.get(s, a));
            }
        }
        if total > spec.budgets()[k] {
            return Err(Error::InfeasibleAction(format!(
                "resource {k} uses {total}, budget {}",
                spec.budgets()[k]
            )));
        }
    }
    Ok(())
}

/// Multinomial coefficient times the product of probabilities:
/// `(m! / Π c_i!) Π p_i^{c_i}`.
fn multinomial_pmf<T: Scalar>(counts: &[usize], probs: &[T]) -> T {
    let mut coeff = T::one();
    let mut placed = 0usize;
    for &c in counts {
        placed += c;
        // Running product of binomials C(placed, c) stays exact for the
        // machine counts this crate targets.
        for i in 0..c {
            coeff = coeff * T::of_usize(placed - i) / T::of_usize(i + 1);
        }
    }
    let mut p = coeff;
    for (&c, &prob) in counts.iter().zip(probs) {
        if c > 0 {
            if prob == T::zero() {
                return T::zero();
            }
            p *= prob.powi(c as i32);
        }
    }
    p
}

/// Aggregated transition distribution `P_φ(x' | x, u)`.
///
/// Computed as a convolution over `(s, a)` groups: the `u(s, a)` machines in
/// group `(s, a)` spread over destination states with a multinomial law.
/// Never expands the `S^N` pre-image; the brute-force pre-image sum is kept
/// only as a test oracle.
pub fn aggregate_transition<T: Scalar>(
    x: &CountState,
    u: &CountAction,
    spec: &SymmetricSpec<T>,
) -> Result<Vec<(CountState, T)>> {
    check_feasible(x, u, spec)?;
    let s_count = x.num_states();
    let sub = spec.sub();

    let mut dist: BTreeMap<Vec<usize>, T> = BTreeMap::new();
    dist.insert(vec![0; s_count], T::one());

    for s in 0..s_count {
        for a in 0..u.num_actions() {
            let m = u.get(s, a);
            if m == 0 {
                continue;
            }
            let probs: Vec<T> = (0..s_count).map(|s2| sub.p(s, a, s2)).collect();
            let group: Vec<(Vec<usize>, T)> = enumerate_count_states(m, s_count)
                .into_iter()
                .map(|c| {
                    let p = multinomial_pmf(c.counts(), &probs);
                    (c.counts().to_vec(), p)
                })
                .filter(|(_, p)| *p != T::zero())
                .collect();
            let mut next: BTreeMap<Vec<usize>, T> = BTreeMap::new();
            for (base, p_base) in &dist {
                for (delta, p_delta) in &group {
                    let mut key = base.clone();
                    for (k, d) in key.iter_mut().zip(delta) {
                        *k += d;
                    }
                    *next.entry(key).or_insert_with(T::zero) += *p_base * *p_delta;
                }
            }
            dist = next;
        }
    }

    Ok(dist
        .into_iter()
        .map(|(counts, p)| (CountState::new(counts), p))
        .collect())
}

/// Mean one-step reward `(1/N) Σ_{s,a} u(s,a) r(s,a)`.
pub fn mean_reward<T: Scalar>(
    x: &CountState,
    u: &CountAction,
    spec: &SymmetricSpec<T>,
) -> Result<T> {
    check_feasible(x, u, spec)?;
    Ok(mean_reward_unchecked(u, spec.sub(), spec.num_submdps()))
}

/// The same formula without the feasibility check; shared with the simulator
/// so both paths produce bit-identical rewards.
pub fn mean_reward_unchecked<T: Scalar>(u: &CountAction, sub: &SubMdp<T>, n: usize) -> T {
    let mut total = T::zero();
    for s in 0..u.num_states() {
        for a in 0..u.num_actions() {
            let c = u.get(s, a);
            if c > 0 {
                total += T::of_usize(c) * sub.r(s, a);
            }
        }
    }
    total / T::of_usize(n)
}

/// Aggregated initial distribution: `μ_f(x) = (N! / Π x_s!) Π μ(s)^{x_s}` for
/// the shared (product-form) initial distribution `μ`.
pub fn initial_count_dist<T: Scalar>(spec: &SymmetricSpec<T>) -> Vec<(CountState, T)> {
    let sub = spec.sub();
    let mu = sub.initial();
    enumerate_count_states(spec.num_submdps(), sub.num_states())
        .into_iter()
        .map(|x| {
            let p = multinomial_pmf(x.counts(), mu);
            (x, p)
        })
        .collect()
}

/// The fully built count aggregation MDP: every count state, its feasible
/// actions, and dense transition / reward / initial tables.
#[derive(Debug, Clone)]
pub struct CountModel<T> {
    spec: SymmetricSpec<T>,
    states: Vec<CountState>,
    actions: Vec<Vec<CountAction>>,
    /// `transition[i][j]` is the dense row over count-state indices.
    transition: Vec<Vec<Vec<T>>>,
    mean_reward: Vec<Vec<T>>,
    initial: Vec<T>,
}

impl<T: Scalar> CountModel<T> {
    pub fn build(spec: &WcmdpSpec<T>) -> Result<Self> {
        Self::build_from_symmetric(SymmetricSpec::from_spec(spec)?)
    }

    pub fn build_from_symmetric(spec: SymmetricSpec<T>) -> Result<Self> {
        let s_count = spec.sub().num_states();
        let n = spec.num_submdps();
        let states = enumerate_count_states(n, s_count);
        let index: BTreeMap<Vec<usize>, usize> = states
            .iter()
            .enumerate()
            .map(|(i, x)| (x.counts().to_vec(), i))
            .collect();

        let mut actions = Vec::with_capacity(states.len());
        let mut transition = Vec::with_capacity(states.len());
        let mut rewards = Vec::with_capacity(states.len());
        for x in &states {
            let feasible = enumerate_feasible_actions(x, &spec);
            if feasible.is_empty() {
                return Err(Error::InfeasibleModel(format!(
                    "count state {:?} has no feasible action",
                    x.counts()
                )));
            }
            let mut rows = Vec::with_capacity(feasible.len());
            let mut rs = Vec::with_capacity(feasible.len());
            for u in &feasible {
                let mut dense = vec![T::zero(); states.len()];
                for (x2, p) in aggregate_transition(x, u, &spec)? {
                    dense[index[x2.counts()]] = p;
                }
                let sum: T = dense.iter().copied().sum();
                if (sum - T::one()).abs() > T::tol(COUNT_ROW_TOL) {
                    return Err(Error::InfeasibleModel(format!(
                        "aggregated row for {:?} sums to {sum}",
                        x.counts()
                    )));
                }
                rows.push(dense);
                rs.push(mean_reward(x, u, &spec)?);
            }
            actions.push(feasible);
            transition.push(rows);
            rewards.push(rs);
        }

        let mut initial = vec![T::zero(); states.len()];
        for (x, p) in initial_count_dist(&spec) {
            initial[index[x.counts()]] = p;
        }
        let total: T = initial.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(COUNT_INIT_TOL) {
            return Err(Error::InfeasibleModel(format!(
                "aggregated initial distribution sums to {total}"
            )));
        }

        Ok(Self {
            spec,
            states,
            actions,
            transition,
            mean_reward: rewards,
            initial,
        })
    }

    pub fn spec(&self) -> &SymmetricSpec<T> {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[CountState] {
        &self.states
    }

    pub fn state_index(&self, x: &CountState) -> Option<usize> {
        self.states.iter().position(|y| y == x)
    }

    pub fn actions_of(&self, state_idx: usize) -> &[CountAction] {
        &self.actions[state_idx]
    }

    pub fn transition_row(&self, state_idx: usize, action_idx: usize) -> &[T] {
        &self.transition[state_idx][action_idx]
    }

    pub fn mean_reward_of(&self, state_idx: usize, action_idx: usize) -> T {
        self.mean_reward[state_idx][action_idx]
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn discount(&self) -> T {
        self.spec.discount()
    }

    pub fn num_state_action_pairs(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    /// Debug dump in the instance-file envelope: count states take the role
    /// of states, per-state feasible actions the role of actions (ragged),
    /// with the count-state and action-count layouts listed alongside.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let states: Vec<_> = self.states.iter().map(|x| x.counts().to_vec()).collect();
        let actions: Vec<Vec<_>> = self
            .actions
            .iter()
            .map(|list| {
                list.iter()
                    .map(|u| {
                        (0..u.num_states())
                            .map(|s| u.row(s).to_vec())
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        let transition: Vec<Vec<Vec<f64>>> = self
            .transition
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|p| p.to_f64_lossy()).collect())
                    .collect()
            })
            .collect();
        let reward: Vec<Vec<f64>> = self
            .mean_reward
            .iter()
            .map(|row| row.iter().map(|r| r.to_f64_lossy()).collect())
            .collect();
        serde_json::json!({
            "num_submdps": self.spec.num_submdps(),
            "states": self.states.len(),
            "actions": self.actions.iter().map(Vec::len).max().unwrap_or(0),
            "count_states": states,
            "count_actions": actions,
            "transition": transition,
            "reward": reward,
            "initial": self.initial.iter().map(|p| p.to_f64_lossy()).collect::<Vec<_>>(),
            "discount": self.spec.discount().to_f64_lossy(),
            "symmetric": true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WcmdpSpec;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_state_spec(p_stay: f64, n: usize, b: f64) -> SymmetricSpec<f64> {
        // Action 0 (idle): stay with p_stay, else move to state 1.
        // Action 1 (active): reset to state 0.
        let transition = vec![p_stay, 1.0 - p_stay, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let reward = vec![1.0, 0.0, 0.2, 0.1];
        let sub = SubMdp::new(2, 2, transition, reward, vec![0.5, 0.5]).unwrap();
        SymmetricSpec::from_parts(sub, vec![vec![0.0, 1.0]], vec![b], n, 0.95)
    }

    #[test]
    fn count_of_examples() {
        // Zero-based translation of states (1,1,3) over S=3.
        let x = count_of(&[0, 0, 2], 3);
        assert_eq!(x.counts(), &[2, 0, 1]);

        let x = count_of(&[0, 0, 0, 0], 3);
        assert_eq!(x.counts(), &[4, 0, 0]);
    }

    #[test]
    fn count_of_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(1..=7);
            let s = rng.random_range(1..=4);
            let state: Vec<usize> = (0..n).map(|_| rng.random_range(0..s)).collect();
            let mut map: Vec<usize> = (0..n).collect();
            map.shuffle(&mut rng);
            let sigma = crate::perm::Permutation::new(map).unwrap();
            let permuted = sigma.apply(&state).unwrap();
            assert_eq!(count_of(&state, s), count_of(&permuted, s));
        }
    }

    #[test]
    fn colex_enumeration_and_cardinality() {
        let states = enumerate_count_states(2, 3);
        let expected: Vec<Vec<usize>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![0, 2, 0],
            vec![1, 0, 1],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        let got: Vec<Vec<usize>> = states.iter().map(|x| x.counts().to_vec()).collect();
        assert_eq!(got, expected);

        for n in 1..=6 {
            for s in 1..=4 {
                let states = enumerate_count_states(n, s);
                assert_eq!(states.len(), num_count_states(n, s), "N={n}, S={s}");
                // Count proportions live on the probability simplex.
                for x in &states {
                    let p: Vec<f64> = x.proportions();
                    assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn feasible_action_enumeration_examples() {
        // S=2, A=2, d=(0,1), b=1, x=(2,0): rows for state 0 are (2,0),(1,1).
        let spec = two_state_spec(0.8, 2, 1.0);
        let x = CountState::new(vec![2, 0]);
        let actions = enumerate_feasible_actions(&x, &spec);
        let rows: Vec<Vec<usize>> = actions.iter().map(|u| u.row(0).to_vec()).collect();
        assert_eq!(rows, vec![vec![1, 1], vec![2, 0]]);

        // b = 0 forces the all-passive action.
        let spec0 = two_state_spec(0.8, 2, 0.0);
        let actions = enumerate_feasible_actions(&x, &spec0);
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].row(0), &[2, 0]);

        // S=3, x=(1,1,0), b=1: no-active, active-in-state-0, active-in-state-1.
        let transition = vec![
            0.8, 0.2, 0.0, 1.0, 0.0, 0.0, // s=0
            0.0, 0.8, 0.2, 1.0, 0.0, 0.0, // s=1
            0.0, 0.0, 1.0, 1.0, 0.0, 0.0, // s=2
        ];
        let reward = vec![1.0, 0.0, 0.5, 0.0, 0.0, 0.0];
        let sub = SubMdp::new(3, 2, transition, reward, vec![1.0 / 3.0; 3]).unwrap();
        let spec3 = SymmetricSpec::from_parts(sub, vec![vec![0.0, 1.0]], vec![1.0], 2, 0.95);
        let x = CountState::new(vec![1, 1, 0]);
        let actions = enumerate_feasible_actions(&x, &spec3);
        assert_eq!(actions.len(), 3);
        for u in &actions {
            let active: usize = (0..3).map(|s| u.get(s, 1)).sum();
            assert!(active <= 1);
        }
    }

    #[test]
    fn aggregate_transition_worked_example() {
        // S=2, x=(2,0), both passive, p(stay)=0.8.
        let spec = two_state_spec(0.8, 2, 1.0);
        let x = CountState::new(vec![2, 0]);
        let u = CountAction::from_rows(vec![vec![2, 0], vec![0, 0]]);
        let dist = aggregate_transition(&x, &u, &spec).unwrap();
        let lookup = |counts: &[usize]| {
            dist.iter()
                .find(|(x2, _)| x2.counts() == counts)
                .map(|(_, p)| *p)
                .unwrap_or(0.0)
        };
        assert!((lookup(&[2, 0]) - 0.64).abs() < 1e-15);
        assert!((lookup(&[1, 1]) - 0.32).abs() < 1e-15);
        assert!((lookup(&[0, 2]) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn deterministic_dynamics_give_point_mass() {
        let spec = two_state_spec(1.0, 3, 3.0);
        let x = CountState::new(vec![2, 1]);
        // One machine in state 0 idles (stays), one resets... all three end
        // deterministically: two stay in 0, the state-1 machine is replaced.
        let u = CountAction::from_rows(vec![vec![2, 0], vec![0, 1]]);
        let dist = aggregate_transition(&x, &u, &spec).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist[0].0.counts(), &[3, 0]);
        assert!((dist[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_rows_sum_to_one_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let s = rng.random_range(2..=3);
            let sub = crate::instances::random_sub_mdp(&mut rng, s, 2);
            let spec = SymmetricSpec::from_parts(
                sub,
                vec![vec![0.0, 1.0]],
                vec![rng.random_range(0..=n) as f64],
                n,
                0.95,
            );
            let states = enumerate_count_states(n, s);
            let x = states[rng.random_range(0..states.len())].clone();
            let actions = enumerate_feasible_actions(&x, &spec);
            let u = actions[rng.random_range(0..actions.len())].clone();
            let dist = aggregate_transition(&x, &u, &spec).unwrap();
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "total {total}");
            for (x2, _) in &dist {
                assert_eq!(x2.total(), n);
            }
        }
    }

    #[test]
    fn mean_reward_examples() {
        let spec = two_state_spec(0.8, 2, 2.0);
        // Both machines idle in state 0: reward 1.0 each.
        let x = CountState::new(vec![2, 0]);
        let u = CountAction::from_rows(vec![vec![2, 0], vec![0, 0]]);
        assert!((mean_reward(&x, &u, &spec).unwrap() - 1.0).abs() < 1e-15);

        // One machine at r=0.2 (state 1 idle... r(1,0)=0.2) and one at r=1.0.
        let x = CountState::new(vec![1, 1]);
        let u = CountAction::from_rows(vec![vec![1, 0], vec![1, 0]]);
        assert!((mean_reward(&x, &u, &spec).unwrap() - 0.6).abs() < 1e-15);

        // Zero rewards stay zero.
        let sub = SubMdp::new(
            2,
            2,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            vec![0.0; 4],
            vec![0.5, 0.5],
        )
        .unwrap();
        let zero = SymmetricSpec::from_parts(sub, vec![vec![0.0, 1.0]], vec![2.0], 2, 0.9);
        assert_eq!(mean_reward(&x, &u, &zero).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_actions_are_rejected() {
        let spec = two_state_spec(0.8, 2, 1.0);
        let x = CountState::new(vec![2, 0]);
        // Row sums do not match x.
        let bad_rows = CountAction::from_rows(vec![vec![1, 0], vec![0, 0]]);
        assert!(matches!(
            mean_reward(&x, &bad_rows, &spec),
            Err(Error::InfeasibleAction(_))
        ));
        // Budget exceeded.
        let bad_budget = CountAction::from_rows(vec![vec![0, 2], vec![0, 0]]);
        assert!(matches!(
            aggregate_transition(&x, &bad_budget, &spec),
            Err(Error::InfeasibleAction(_))
        ));
    }

    #[test]
    fn initial_count_dist_uniform_examples() {
        // N=2, S=3, uniform: x=(1,1,0) has mass 2/9; x=(2,0,0) has 1/9.
        let transition = vec![
            1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0,
            0.0,
        ];
        let sub: SubMdp<f64> =
            SubMdp::new(3, 2, transition, vec![0.0; 6], vec![1.0 / 3.0; 3]).unwrap();
        let spec = SymmetricSpec::from_parts(sub, vec![vec![0.0, 1.0]], vec![1.0], 2, 0.95);
        let dist = initial_count_dist(&spec);
        let lookup = |counts: &[usize]| {
            dist.iter()
                .find(|(x, _)| x.counts() == counts)
                .map(|(_, p)| *p)
                .unwrap()
        };
        assert!((lookup(&[1, 1, 0]) - 2.0 / 9.0).abs() < 1e-15);
        assert!((lookup(&[2, 0, 0]) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn initial_count_dist_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 1..=6 {
            for s in 2..=4 {
                let sub = crate::instances::random_sub_mdp(&mut rng, s, 2);
                let spec = SymmetricSpec::from_parts(sub, vec![vec![0.0, 1.0]], vec![1.0], n, 0.95);
                let total: f64 = initial_count_dist(&spec).iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12, "N={n} S={s} total {total}");
            }
        }
    }

    #[test]
    fn count_model_builds_and_indexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let wcmdp = {
            let sub = crate::instances::random_sub_mdp(&mut rng, 3, 2);
            WcmdpSpec::new(vec![sub; 3], vec![vec![vec![0.0, 1.0]; 3]], vec![1.0], 0.95).unwrap()
        };
        let model = CountModel::build(&wcmdp).unwrap();
        assert_eq!(model.num_states(), num_count_states(3, 3));
        let total: f64 = model.initial().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..model.num_states() {
            for j in 0..model.actions_of(i).len() {
                let row_total: f64 = model.transition_row(i, j).iter().sum();
                assert!((row_total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn asymmetric_specs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let a = crate::instances::random_sub_mdp(&mut rng, 3, 2);
        let b = crate::instances::random_sub_mdp(&mut rng, 3, 2);
        let spec =
            WcmdpSpec::new(vec![a, b], vec![vec![vec![0.0, 1.0]; 2]], vec![1.0], 0.95).unwrap();
        assert!(matches!(
            CountModel::build(&spec),
            Err(Error::NotSymmetric(_))
        ));
    }
}
