//! Sub-MDPs, weakly coupled specs, and the exact joint (product-space) model.
//!
//! A weakly coupled MDP is a set of `N` sub-MDPs whose dynamics and rewards
//! are independent; the only interaction is a set of `K` per-step resource
//! constraints on the joint action. [`expand_joint`] materializes the product
//! model for small `N` so the exact LP machinery in [`crate::lp`] can run on
//! it; everything at larger scale works on the count aggregation instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::scalar::Scalar;

/// Row-sum tolerance for transition tables and initial distributions.
pub const DIST_TOL: f64 = 1e-12;
/// Row-sum tolerance for the expanded joint transition table.
pub const JOINT_DIST_TOL: f64 = 1e-10;
/// Default tolerance for [`is_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Default cap on joint-model table entries before [`expand_joint`] refuses.
pub const DEFAULT_TABLE_CAP: u128 = 10_000_000;

/// A single finite MDP: transition table indexed `(s, a, s')`, reward table
/// indexed `(s, a)`, and an initial state distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMdp<T> {
    num_states: usize,
    num_actions: usize,
    transition: Vec<T>,
    reward: Vec<T>,
    initial_dist: Vec<T>,
}

impl<T: Scalar> SubMdp<T> {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
        initial_dist: Vec<T>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel(
                "state and action counts must be positive".into(),
            ));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::InvalidModel(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::InvalidModel(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                num_states * num_actions
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::InvalidModel(format!(
                "initial distribution has {} entries, expected {}",
                initial_dist.len(),
                num_states
            )));
        }
        let mdp = Self {
            num_states,
            num_actions,
            transition,
            reward,
            initial_dist,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let tol = T::tol(DIST_TOL);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let mut sum = T::zero();
                for s2 in 0..self.num_states {
                    let p = self.p(s, a, s2);
                    if p < T::zero() || p > T::one() + tol {
                        return Err(Error::InvalidModel(format!(
                            "transition({s},{a},{s2}) = {p} out of [0,1]"
                        )));
                    }
                    sum += p;
                }
                if (sum - T::one()).abs() > tol {
                    return Err(Error::InvalidModel(format!(
                        "transition row ({s},{a}) sums to {sum}"
                    )));
                }
                if !self.r(s, a).is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "reward({s},{a}) is not finite"
                    )));
                }
            }
        }
        let mut sum = T::zero();
        for &m in &self.initial_dist {
            if m < T::zero() {
                return Err(Error::InvalidModel("negative initial probability".into()));
            }
            sum += m;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidModel(format!(
                "initial distribution sums to {sum}"
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `P(s' | s, a)`.
    #[inline]
    pub fn p(&self, s: usize, a: usize, s2: usize) -> T {
        self.transition[(s * self.num_actions + a) * self.num_states + s2]
    }

    /// `r(s, a)`.
    #[inline]
    pub fn r(&self, s: usize, a: usize) -> T {
        self.reward[s * self.num_actions + a]
    }

    pub fn initial(&self) -> &[T] {
        &self.initial_dist
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[T] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn transition_table(&self) -> &[T] {
        &self.transition
    }

    pub fn reward_table(&self) -> &[T] {
        &self.reward
    }
}

/// The weakly coupled spec: `N` sub-MDPs, per-resource consumption
/// `d[k][n][a]`, budgets `b[k]`, and a shared discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcmdpSpec<T> {
    sub_mdps: Vec<SubMdp<T>>,
    consumption: Vec<Vec<Vec<T>>>,
    budgets: Vec<T>,
    discount: T,
}

impl<T: Scalar> WcmdpSpec<T> {
    pub fn new(
        sub_mdps: Vec<SubMdp<T>>,
        consumption: Vec<Vec<Vec<T>>>,
        budgets: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        if sub_mdps.is_empty() {
            return Err(Error::InvalidModel("at least one sub-MDP required".into()));
        }
        if discount < T::zero() || discount >= T::one() {
            return Err(Error::InvalidModel(format!(
                "discount {discount} outside [0, 1)"
            )));
        }
        if consumption.len() != budgets.len() {
            return Err(Error::InvalidModel(
                "consumption and budgets disagree on the number of resources".into(),
            ));
        }
        let n = sub_mdps.len();
        for (k, per_sub) in consumption.iter().enumerate() {
            if per_sub.len() != n {
                return Err(Error::InvalidModel(format!(
                    "consumption[{k}] covers {} sub-MDPs, expected {n}",
                    per_sub.len()
                )));
            }
            for (i, row) in per_sub.iter().enumerate() {
                if row.len() != sub_mdps[i].num_actions() {
                    return Err(Error::InvalidModel(format!(
                        "consumption[{k}][{i}] covers {} actions, expected {}",
                        row.len(),
                        sub_mdps[i].num_actions()
                    )));
                }
                if row.iter().any(|&d| d < T::zero() || !d.is_finite()) {
                    return Err(Error::InvalidModel(
                        "consumption entries must be finite and nonnegative".into(),
                    ));
                }
            }
        }
        for &b in &budgets {
            if b < T::zero() || !b.is_finite() {
                return Err(Error::InvalidModel("budgets must be nonnegative".into()));
            }
        }
        let spec = Self {
            sub_mdps,
            consumption,
            budgets,
            discount,
        };
        for i in 0..n {
            if spec.idle_action_of(i).is_none() {
                return Err(Error::InvalidModel(format!(
                    "sub-MDP {i} has no idle action consuming zero of every resource"
                )));
            }
        }
        Ok(spec)
    }

    pub fn num_submdps(&self) -> usize {
        self.sub_mdps.len()
    }

    pub fn num_resources(&self) -> usize {
        self.budgets.len()
    }

    pub fn sub_mdp(&self, n: usize) -> &SubMdp<T> {
        &self.sub_mdps[n]
    }

    pub fn sub_mdps(&self) -> &[SubMdp<T>] {
        &self.sub_mdps
    }

    /// `d_k,n(a)`: resource-k consumption of sub-MDP `n` taking action `a`.
    #[inline]
    pub fn consumption(&self, k: usize, n: usize, a: usize) -> T {
        self.consumption[k][n][a]
    }

    pub fn budgets(&self) -> &[T] {
        &self.budgets
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    /// First action of sub-MDP `n` consuming zero of every resource.
    pub fn idle_action_of(&self, n: usize) -> Option<usize> {
        (0..self.sub_mdps[n].num_actions())
            .find(|&a| (0..self.num_resources()).all(|k| self.consumption(k, n, a) == T::zero()))
    }

    /// Whether the joint action tuple satisfies every resource budget.
    pub fn action_feasible(&self, actions: &[usize]) -> bool {
        (0..self.num_resources()).all(|k| {
            let used: T = actions
                .iter()
                .enumerate()
                .map(|(n, &a)| self.consumption(k, n, a))
                .sum();
            used <= self.budgets[k]
        })
    }

    /// Symmetric-instance consumption table `d[k][a]` (first sub-MDP's view).
    pub fn shared_consumption(&self) -> Vec<Vec<T>> {
        self.consumption.iter().map(|per| per[0].clone()).collect()
    }
}

/// True iff all sub-MDPs coincide entrywise within `tol`, consumption does not
/// depend on the sub-MDP index, and the (product-form) initial distribution is
/// permutation invariant — which for product measures holds exactly when all
/// per-sub-MDP initial distributions coincide.
pub fn is_symmetric<T: Scalar>(spec: &WcmdpSpec<T>, tol: T) -> bool {
    let first = &spec.sub_mdps[0];
    for sub in &spec.sub_mdps[1..] {
        if sub.num_states() != first.num_states() || sub.num_actions() != first.num_actions() {
            return false;
        }
        let close = |xs: &[T], ys: &[T]| {
            xs.iter()
                .zip(ys.iter())
                .all(|(&x, &y)| (x - y).abs() <= tol)
        };
        if !close(sub.transition_table(), first.transition_table())
            || !close(sub.reward_table(), first.reward_table())
            || !close(sub.initial(), first.initial())
        {
            return false;
        }
    }
    for k in 0..spec.num_resources() {
        for n in 1..spec.num_submdps() {
            for a in 0..first.num_actions() {
                if (spec.consumption(k, n, a) - spec.consumption(k, 0, a)).abs() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// The expanded product model over `S^(N)` joint states and the (state
/// independent) budget-feasible joint action tuples.
///
/// Joint states are enumerated lexicographically in `(s_1, ..., s_N)`, so LP
/// variable indices are reproducible across runs.
#[derive(Debug, Clone)]
pub struct JointModel<T> {
    state_dims: Vec<usize>,
    num_states: usize,
    actions: Vec<Vec<usize>>,
    idle_action_index: usize,
    transition: Vec<T>,
    reward: Vec<T>,
    initial: Vec<T>,
    discount: T,
}

impl<T: Scalar> JointModel<T> {
    pub fn num_submdps(&self) -> usize {
        self.state_dims.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn feasible_actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    /// Index (into `feasible_actions`) of the all-idle joint action.
    pub fn idle_action_index(&self) -> usize {
        self.idle_action_index
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    /// Decode a joint state index into the tuple `(s_1, ..., s_N)`.
    pub fn decode_state(&self, mut index: usize) -> Vec<usize> {
        let mut tuple = vec![0; self.state_dims.len()];
        for n in (0..self.state_dims.len()).rev() {
            tuple[n] = index % self.state_dims[n];
            index /= self.state_dims[n];
        }
        tuple
    }

    /// Encode a joint state tuple into its lexicographic index.
    pub fn encode_state(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.state_dims.len());
        let mut index = 0;
        for (n, &s) in tuple.iter().enumerate() {
            debug_assert!(s < self.state_dims[n]);
            index = index * self.state_dims[n] + s;
        }
        index
    }

    /// `P^(N)(s' | s, a)` by joint state indices and feasible-action index.
    #[inline]
    pub fn p(&self, s: usize, a: usize, s2: usize) -> T {
        self.transition[(s * self.actions.len() + a) * self.num_states + s2]
    }

    /// Per-sub-MDP reward vector entry `r_n(s, a)`.
    #[inline]
    pub fn r(&self, s: usize, a: usize, n: usize) -> T {
        self.reward[(s * self.actions.len() + a) * self.state_dims.len() + n]
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[T] {
        let base = (s * self.actions.len() + a) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn reward_vector(&self, s: usize, a: usize) -> &[T] {
        let base = (s * self.actions.len() + a) * self.state_dims.len();
        &self.reward[base..base + self.state_dims.len()]
    }

    /// Apply a sub-MDP permutation to a joint state index (requires all
    /// sub-MDPs to share the state count).
    pub fn permute_state(&self, s: usize, sigma: &Permutation) -> Result<usize> {
        let tuple = self.decode_state(s);
        Ok(self.encode_state(&sigma.apply(&tuple)?))
    }

    /// Apply a sub-MDP permutation to a feasible action index. Returns an
    /// error if the permuted tuple is not in the feasible list (cannot happen
    /// for symmetric consumption).
    pub fn permute_action(&self, a: usize, sigma: &Permutation) -> Result<usize> {
        let tuple = sigma.apply(&self.actions[a])?;
        self.actions
            .iter()
            .position(|t| *t == tuple)
            .ok_or_else(|| Error::InfeasibleModel("permuted action not feasible".into()))
    }
}

/// Enumerate all budget-feasible joint action tuples (lexicographic order).
pub fn feasible_joint_actions<T: Scalar>(spec: &WcmdpSpec<T>) -> Vec<Vec<usize>> {
    let n = spec.num_submdps();
    let mut out = Vec::new();
    let mut tuple = vec![0usize; n];
    let mut used: Vec<T> = vec![T::zero(); spec.num_resources()];
    fn recurse<T: Scalar>(
        spec: &WcmdpSpec<T>,
        pos: usize,
        tuple: &mut Vec<usize>,
        used: &mut Vec<T>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if pos == spec.num_submdps() {
            out.push(tuple.clone());
            return;
        }
        for a in 0..spec.sub_mdp(pos).num_actions() {
            let fits = (0..spec.num_resources())
                .all(|k| used[k] + spec.consumption(k, pos, a) <= spec.budgets()[k]);
            if fits {
                for k in 0..spec.num_resources() {
                    used[k] += spec.consumption(k, pos, a);
                }
                tuple[pos] = a;
                recurse(spec, pos + 1, tuple, used, out);
                for k in 0..spec.num_resources() {
                    used[k] -= spec.consumption(k, pos, a);
                }
            }
        }
    }
    recurse(spec, 0, &mut tuple, &mut used, &mut out);
    out
}

/// Expand the weakly coupled spec into the exact product model.
///
/// Refuses (rather than truncating) once the dominant tables exceed `cap`
/// entries; exact expansion is a small-`N` tool by design.
pub fn expand_joint<T: Scalar>(spec: &WcmdpSpec<T>, cap: Option<u128>) -> Result<JointModel<T>> {
    let cap = cap.unwrap_or(DEFAULT_TABLE_CAP);
    let n = spec.num_submdps();
    let state_dims: Vec<usize> = spec.sub_mdps().iter().map(|m| m.num_states()).collect();
    let num_states: u128 = state_dims.iter().map(|&s| s as u128).product();

    let actions = feasible_joint_actions(spec);
    if actions.is_empty() {
        return Err(Error::InfeasibleModel(
            "no feasible joint action; idle-action invariant violated".into(),
        ));
    }
    let idle_tuple: Vec<usize> = (0..n)
        .map(|i| {
            spec.idle_action_of(i)
                .expect("validated spec has an idle action per sub-MDP")
        })
        .collect();
    let idle_action_index = actions
        .iter()
        .position(|t| *t == idle_tuple)
        .ok_or_else(|| Error::InfeasibleModel("idle joint action missing".into()))?;

    let num_actions = actions.len() as u128;
    let required = num_states * num_actions * num_states + num_states * num_actions * n as u128;
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }

    let num_states = num_states as usize;
    let mut model = JointModel {
        state_dims,
        num_states,
        actions,
        idle_action_index,
        transition: Vec::new(),
        reward: Vec::new(),
        initial: vec![T::zero(); num_states],
        discount: spec.discount(),
    };

    let num_actions = model.actions.len();
    let mut transition = vec![T::zero(); num_states * num_actions * num_states];
    let mut reward = vec![T::zero(); num_states * num_actions * n];

    for s in 0..num_states {
        let s_tuple = model.decode_state(s);
        for (a_idx, a_tuple) in model.actions.iter().enumerate() {
            for (i, &a) in a_tuple.iter().enumerate() {
                reward[(s * num_actions + a_idx) * n + i] = spec.sub_mdp(i).r(s_tuple[i], a);
            }
            for s2 in 0..num_states {
                let s2_tuple = model.decode_state(s2);
                let mut p = T::one();
                for i in 0..n {
                    p *= spec.sub_mdp(i).p(s_tuple[i], a_tuple[i], s2_tuple[i]);
                    if p == T::zero() {
                        break;
                    }
                }
                transition[(s * num_actions + a_idx) * num_states + s2] = p;
            }
        }
    }
    for s in 0..num_states {
        let s_tuple = model.decode_state(s);
        let mut m = T::one();
        for i in 0..n {
            m *= spec.sub_mdp(i).initial()[s_tuple[i]];
        }
        model.initial[s] = m;
    }

    model.transition = transition;
    model.reward = reward;

    let tol = T::tol(JOINT_DIST_TOL);
    for s in 0..num_states {
        for a in 0..num_actions {
            let sum: T = model.transition_row(s, a).iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InfeasibleModel(format!(
                    "joint transition row ({s},{a}) sums to {sum}"
                )));
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::all_permutations;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn deterministic_chain(num_states: usize) -> SubMdp<f64> {
        // Action 0: move to (s+1) mod S. Action 1: stay.
        let mut transition = vec![0.0; num_states * 2 * num_states];
        let mut reward = vec![0.0; num_states * 2];
        for s in 0..num_states {
            transition[(s * 2) * num_states + (s + 1) % num_states] = 1.0;
            transition[(s * 2 + 1) * num_states + s] = 1.0;
            reward[s * 2] = s as f64;
            reward[s * 2 + 1] = 1.0;
        }
        let initial = vec![1.0 / num_states as f64; num_states];
        SubMdp::new(num_states, 2, transition, reward, initial).unwrap()
    }

    fn random_symmetric_spec(
        rng: &mut ChaCha8Rng,
        n: usize,
        s: usize,
        b: f64,
        discount: f64,
    ) -> WcmdpSpec<f64> {
        let seed = rng.random::<u64>();
        crate::instances::random_symmetric_instance(seed, n, s, b, discount)
    }

    #[test]
    fn single_submdp_expansion_is_identity() {
        let sub = deterministic_chain(3);
        let spec = WcmdpSpec::new(
            vec![sub.clone()],
            vec![vec![vec![0.0, 1.0]]],
            vec![1.0],
            0.9,
        )
        .unwrap();
        let joint = expand_joint(&spec, None).unwrap();
        assert_eq!(joint.num_states(), 3);
        assert_eq!(joint.feasible_actions().len(), 2);
        for s in 0..3 {
            for (a_idx, a) in joint.feasible_actions().iter().enumerate() {
                for s2 in 0..3 {
                    assert_eq!(joint.p(s, a_idx, s2), sub.p(s, a[0], s2));
                }
                assert_eq!(joint.r(s, a_idx, 0), sub.r(s, a[0]));
            }
        }
        assert_eq!(joint.initial(), sub.initial());
    }

    #[test]
    fn two_machine_single_budget_has_three_feasible_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = random_symmetric_spec(&mut rng, 2, 3, 1.0, 0.95);
        let joint = expand_joint(&spec, None).unwrap();
        assert_eq!(joint.num_states(), 9);
        assert_eq!(
            joint.feasible_actions(),
            &[vec![0, 0], vec![0, 1], vec![1, 0]]
        );
        assert_eq!(joint.idle_action_index(), 0);
    }

    #[test]
    fn deterministic_chains_expand_to_point_masses() {
        let sub = deterministic_chain(3);
        let spec = WcmdpSpec::new(
            vec![sub.clone(), sub],
            vec![vec![vec![0.0, 0.0]; 2]],
            vec![0.0],
            0.9,
        )
        .unwrap();
        let joint = expand_joint(&spec, None).unwrap();
        for s in 0..joint.num_states() {
            for a in 0..joint.feasible_actions().len() {
                for s2 in 0..joint.num_states() {
                    let p = joint.p(s, a, s2);
                    assert!(p == 0.0 || p == 1.0, "non-degenerate entry {p}");
                }
            }
        }
    }

    #[test]
    fn cap_refuses_oversized_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = random_symmetric_spec(&mut rng, 3, 3, 1.0, 0.95);
        match expand_joint(&spec, Some(10)) {
            Err(Error::CapExceeded { required, cap }) => {
                assert_eq!(cap, 10);
                assert!(required > 10);
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn symmetry_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = random_symmetric_spec(&mut rng, 3, 3, 1.0, 0.95);
        assert!(is_symmetric(&spec, 1e-9));

        // Perturb one reward entry by 10x the tolerance.
        let mut subs: Vec<SubMdp<f64>> = spec.sub_mdps().to_vec();
        let mut reward = subs[1].reward_table().to_vec();
        reward[0] += 1e-8;
        subs[1] = SubMdp::new(
            3,
            2,
            subs[1].transition_table().to_vec(),
            reward,
            subs[1].initial().to_vec(),
        )
        .unwrap();
        let perturbed =
            WcmdpSpec::new(subs, vec![vec![vec![0.0, 1.0]; 3]], vec![1.0], 0.95).unwrap();
        assert!(!is_symmetric(&perturbed, 1e-9));

        // Same dynamics but sub-MDP-dependent consumption.
        let uneven = WcmdpSpec::new(
            spec.sub_mdps().to_vec(),
            vec![vec![vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 1.0]]],
            vec![1.0],
            0.95,
        )
        .unwrap();
        assert!(!is_symmetric(&uneven, 1e-9));
    }

    #[test]
    fn joint_tables_are_permutation_equivariant_for_symmetric_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(n, s) in &[(2usize, 2usize), (2, 3), (3, 2), (3, 3)] {
            let spec = random_symmetric_spec(&mut rng, n, s, 1.0, 0.9);
            let joint = expand_joint(&spec, None).unwrap();
            for sigma in all_permutations(n) {
                for st in 0..joint.num_states() {
                    let pst = joint.permute_state(st, &sigma).unwrap();
                    assert!((joint.initial()[pst] - joint.initial()[st]).abs() < 1e-12);
                    for a in 0..joint.feasible_actions().len() {
                        let pa = joint.permute_action(a, &sigma).unwrap();
                        for st2 in 0..joint.num_states() {
                            let pst2 = joint.permute_state(st2, &sigma).unwrap();
                            assert!((joint.p(pst, pa, pst2) - joint.p(st, a, st2)).abs() < 1e-12);
                        }
                        let r = joint.reward_vector(st, a);
                        let pr = sigma.apply(r).unwrap();
                        let r_permuted = joint.reward_vector(pst, pa);
                        for i in 0..n {
                            assert!((pr[i] - r_permuted[i]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn marginalizing_joint_recovers_sub_mdp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = random_symmetric_spec(&mut rng, 2, 3, 2.0, 0.9);
        let joint = expand_joint(&spec, None).unwrap();
        let sub = spec.sub_mdp(0);
        // Fix machine 1 in state 0 taking action tuple (a, 0) and sum machine
        // 1's next-state probabilities out.
        for s0 in 0..3 {
            for a0 in 0..2 {
                let s = joint.encode_state(&[s0, 0]);
                let a = joint
                    .feasible_actions()
                    .iter()
                    .position(|t| *t == vec![a0, 0])
                    .unwrap();
                for s0_next in 0..3 {
                    let marginal: f64 = (0..3)
                        .map(|s1_next| joint.p(s, a, joint.encode_state(&[s0_next, s1_next])))
                        .sum();
                    assert!((marginal - sub.p(s0, a0, s0_next)).abs() < 1e-12);
                }
            }
        }
    }
}
