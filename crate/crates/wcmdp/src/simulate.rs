//! Count-space transition simulation and Monte Carlo policy evaluation.
//!
//! The simulator advances a count state one step by drawing each machine's
//! next state independently from the shared transition law. Evaluation runs
//! `M` seeded trajectories truncated at horizon `T`, with one
//! counter-derived RNG stream per trajectory, so reports are bit-identical
//! across runs for a fixed seed regardless of scheduling.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::count::{check_feasible, mean_reward_unchecked, CountAction, CountState, SymmetricSpec};
use crate::error::{Error, Result};
use crate::fairness::{ggf, GgfWeights};
use crate::model::WcmdpSpec;
use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, Clone)]
pub struct EvalConfig<T> {
    pub num_trajectories: usize,
    pub horizon: usize,
    pub discount: T,
    pub rng_seed: u64,
    pub weights: GgfWeights<T>,
}

impl<T: Scalar> EvalConfig<T> {
    pub fn new(
        num_trajectories: usize,
        horizon: usize,
        discount: T,
        rng_seed: u64,
        weights: GgfWeights<T>,
    ) -> Self {
        assert!(num_trajectories >= 1 && horizon >= 1);
        Self {
            num_trajectories,
            horizon,
            discount,
            rng_seed,
            weights,
        }
    }
}

/// Monte Carlo evaluation summary.
///
/// In joint mode `mean_value_per_submdp` holds true per-machine discounted
/// returns; in count mode the per-machine values collapse to the uniform
/// vector `V̄·1` (permutation-invariant policies give every machine the same
/// expectation). `stderr` is the standard error of the scalar reported as
/// `ggf_score`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub mean_value_per_submdp: Vec<T>,
    pub ggf_score: T,
    pub stderr: T,
    pub trajectories_used: usize,
    pub wall_seconds: f64,
}

impl<T: Scalar> EvalReport<T> {
    /// Equality on everything deterministic (wall time excluded).
    pub fn same_results(&self, other: &Self) -> bool {
        self.mean_value_per_submdp == other.mean_value_per_submdp
            && self.ggf_score == other.ggf_score
            && self.stderr == other.stderr
            && self.trajectories_used == other.trajectories_used
    }
}

/// RNG stream for trajectory `index` under `seed`: a counter-based split so
/// trajectories are independent and order-insensitive.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

fn sample_from<T: Scalar, R: Rng>(probs: &[T], rng: &mut R) -> usize {
    let mut draw = T::of(rng.random::<f64>());
    for (i, &p) in probs.iter().enumerate() {
        draw -= p;
        if draw < T::zero() {
            return i;
        }
    }
    probs.len() - 1
}

/// Advance a count state one step: each of the `u(s, a)` machines draws its
/// next state from `p(· | s, a)`. Returns the next counts and the mean
/// reward, which is computed by the same formula as the aggregated model so
/// the two paths agree bit for bit.
pub fn step_count<T: Scalar, R: Rng>(
    x: &CountState,
    u: &CountAction,
    spec: &SymmetricSpec<T>,
    rng: &mut R,
) -> Result<(CountState, T)> {
    check_feasible(x, u, spec)?;
    let sub = spec.sub();
    let s_count = sub.num_states();
    let mut next = vec![0usize; s_count];
    for s in 0..s_count {
        for a in 0..u.num_actions() {
            let row = sub.transition_row(s, a);
            for _ in 0..u.get(s, a) {
                next[sample_from(row, rng)] += 1;
            }
        }
    }
    let reward = mean_reward_unchecked(u, sub, spec.num_submdps());
    Ok((CountState::new(next), reward))
}

/// Evaluate a joint-space policy by simulating the `N` sub-MDPs directly.
///
/// The policy maps the joint state tuple to a joint action tuple; actions
/// violating a resource budget abort with `PolicyInfeasibleAction`.
pub fn evaluate_joint_policy<T, F>(
    spec: &WcmdpSpec<T>,
    cfg: &EvalConfig<T>,
    mut policy: F,
) -> Result<EvalReport<T>>
where
    T: Scalar,
    F: FnMut(&[usize], &mut ChaCha8Rng) -> Vec<usize>,
{
    let start = Instant::now();
    let n = spec.num_submdps();
    if cfg.weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: cfg.weights.len(),
        });
    }
    let m = cfg.num_trajectories;
    let mut mean_values = vec![T::zero(); n];
    let mut welfare_samples = Vec::with_capacity(m);
    for traj in 0..m {
        let mut rng = trajectory_rng(cfg.rng_seed, traj as u64);
        let mut state: Vec<usize> = (0..n)
            .map(|i| sample_from(spec.sub_mdp(i).initial(), &mut rng))
            .collect();
        let mut returns = vec![T::zero(); n];
        let mut discount = T::one();
        for _ in 0..cfg.horizon {
            let action = policy(&state, &mut rng);
            if action.len() != n {
                return Err(Error::PolicyInfeasibleAction(format!(
                    "action tuple has {} entries, expected {n}",
                    action.len()
                )));
            }
            if !spec.action_feasible(&action) {
                return Err(Error::PolicyInfeasibleAction(format!(
                    "budget violated by action {action:?}"
                )));
            }
            for i in 0..n {
                returns[i] += discount * spec.sub_mdp(i).r(state[i], action[i]);
            }
            for i in 0..n {
                state[i] = sample_from(
                    spec.sub_mdp(i).transition_row(state[i], action[i]),
                    &mut rng,
                );
            }
            discount *= cfg.discount;
        }
        for i in 0..n {
            mean_values[i] += returns[i];
        }
        let mut sorted = returns.clone();
        sorted.sort_by(total_cmp);
        let welfare: T = sorted
            .iter()
            .zip(cfg.weights.as_slice())
            .map(|(&v, &w)| v * w)
            .sum();
        welfare_samples.push(welfare);
    }
    let m_t = T::of_usize(m);
    for v in &mut mean_values {
        *v /= m_t;
    }
    let ggf_score = ggf(&mean_values, &cfg.weights)?;
    let mean_of_means: T = mean_values.iter().copied().sum::<T>() / T::of_usize(n);
    debug_assert!(
        ggf_score <= mean_of_means + T::of(1e-9),
        "welfare above the mean"
    );
    let stderr = standard_error(&welfare_samples);
    Ok(EvalReport {
        mean_value_per_submdp: mean_values,
        ggf_score,
        stderr,
        trajectories_used: m,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Evaluate a permutation-invariant (count-space) policy from the aggregated
/// initial distribution. The GGF score of such a policy equals its mean
/// discounted value, whatever the weights, so the report carries the uniform
/// value vector.
pub fn evaluate_count_policy<T, F>(
    spec: &SymmetricSpec<T>,
    cfg: &EvalConfig<T>,
    mut policy: F,
) -> Result<EvalReport<T>>
where
    T: Scalar,
    F: FnMut(&CountState, &mut ChaCha8Rng) -> Result<CountAction>,
{
    let start = Instant::now();
    let n = spec.num_submdps();
    let sub = spec.sub();
    let m = cfg.num_trajectories;
    let mut samples = Vec::with_capacity(m);
    for traj in 0..m {
        let mut rng = trajectory_rng(cfg.rng_seed, traj as u64);
        let mut counts = vec![0usize; sub.num_states()];
        for _ in 0..n {
            counts[sample_from(sub.initial(), &mut rng)] += 1;
        }
        let mut x = CountState::new(counts);
        let mut value = T::zero();
        let mut discount = T::one();
        for _ in 0..cfg.horizon {
            let u = policy(&x, &mut rng)?;
            let (next, reward) = step_count(&x, &u, spec, &mut rng)?;
            debug_assert_eq!(next.total(), n, "count conservation");
            value += discount * reward;
            discount *= cfg.discount;
            x = next;
        }
        samples.push(value);
    }
    let mean: T = samples.iter().copied().sum::<T>() / T::of_usize(m);
    let stderr = standard_error(&samples);
    Ok(EvalReport {
        mean_value_per_submdp: vec![mean; n],
        ggf_score: mean,
        stderr,
        trajectories_used: m,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn standard_error<T: Scalar>(samples: &[T]) -> T {
    let m = samples.len();
    if m < 2 {
        return T::zero();
    }
    let m_t = T::of_usize(m);
    let mean: T = samples.iter().copied().sum::<T>() / m_t;
    let var: T = samples.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (m_t - T::one());
    (var / m_t).sqrt()
}

/// Upper bound on the value mass truncated at horizon `t`:
/// `r_max γ^t / (1 - γ)`.
pub fn truncation_bound<T: Scalar>(r_max: T, discount: T, horizon: usize) -> T {
    r_max * discount.powi(horizon as i32) / (T::one() - discount)
}
