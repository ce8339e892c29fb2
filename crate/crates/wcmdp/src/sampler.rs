//! Priority-score count-action sampling.
//!
//! A policy emits a priority matrix `U(s, a)` and resource-use proportions
//! `p̃`; the sampler turns them into a feasible count action by repeatedly
//! drawing non-forbidden `(s, a)` pairs proportional to `U`, assigning one
//! machine at a time while an effective budget `b̃ = b ⊙ p̃` lasts. Pairs
//! drawn while unaffordable join the forbidden set, as do whole rows once a
//! state empties, so every call terminates within `N + S·A` draws.
//!
//! Each sample carries an exact trace: replaying the chosen pairs under the
//! same priorities reproduces the categorical log-probability bit for bit,
//! and replaying under updated priorities yields the likelihood needed for
//! ratio-based policy gradients. Every draw, affordable or not, contributes
//! to the log-probability so the density covers the full sampling path.

use serde::{Deserialize, Serialize};

use crate::count::{CountAction, CountState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Network outputs: strictly positive priorities (before masking) and
/// per-resource use proportions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput<T> {
    /// Row-major `S x A` priority scores.
    pub priorities: Vec<T>,
    /// `K` resource-use proportions.
    pub resource_use: Vec<T>,
}

/// A pair added to the forbidden set, with the draw index it happened after
/// (`step == 0` marks masking at entry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenEvent {
    pub step: usize,
    pub state: usize,
    pub action: usize,
}

/// Everything needed to replay one sampling run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace<T> {
    pub action: CountAction,
    /// Drawn `(s, a)` pairs in order, including unaffordable draws.
    pub chosen_pairs: Vec<(usize, usize)>,
    /// Categorical log-probability of the drawn sequence.
    pub logprob: T,
    /// Effective budgets `b ⊙ p̃` the run started from. Replay uses these, not
    /// the caller's current proportions: the budget realization is part of
    /// the sampled action, only the priorities are re-evaluated.
    pub effective_budgets: Vec<T>,
    /// Audit log of forbidden-set growth.
    pub forbidden_history: Vec<ForbiddenEvent>,
    /// Total draws; bounded by `N + S·A`.
    pub iterations: usize,
}

struct Engine<'a, T> {
    s_count: usize,
    a_count: usize,
    weights: Vec<T>,
    forbidden: Vec<bool>,
    num_forbidden: usize,
    remaining: Vec<usize>,
    budget: Vec<T>,
    consumption: &'a [Vec<T>],
    action: CountAction,
    logprob: T,
    history: Vec<ForbiddenEvent>,
    step: usize,
}

enum Draw {
    Assigned,
    Rejected,
}

impl<'a, T: Scalar> Engine<'a, T> {
    fn new(
        x: &CountState,
        priorities: &[T],
        effective_budgets: &[T],
        consumption: &'a [Vec<T>],
    ) -> Result<Self> {
        let s_count = x.num_states();
        let a_count = consumption.first().map_or(0, Vec::len);
        if priorities.len() != s_count * a_count {
            return Err(Error::LengthMismatch {
                expected: s_count * a_count,
                got: priorities.len(),
            });
        }
        let mut engine = Self {
            s_count,
            a_count,
            weights: priorities.to_vec(),
            forbidden: vec![false; s_count * a_count],
            num_forbidden: 0,
            remaining: x.counts().to_vec(),
            budget: effective_budgets.to_vec(),
            consumption,
            action: CountAction::new(s_count, a_count),
            logprob: T::zero(),
            history: Vec::new(),
            step: 0,
        };
        // Masking at entry: empty states and zero priorities.
        for s in 0..s_count {
            for a in 0..a_count {
                let idx = s * a_count + a;
                if engine.remaining[s] == 0 {
                    engine.weights[idx] = T::zero();
                }
                if engine.weights[idx] <= T::zero() {
                    engine.forbid(s, a);
                }
            }
        }
        let machines: usize = engine.remaining.iter().sum();
        if machines > 0 && engine.done() {
            return Err(Error::DegeneratePriorities);
        }
        Ok(engine)
    }

    fn done(&self) -> bool {
        self.num_forbidden == self.s_count * self.a_count
    }

    fn forbid(&mut self, s: usize, a: usize) {
        let idx = s * self.a_count + a;
        if !self.forbidden[idx] {
            self.forbidden[idx] = true;
            self.num_forbidden += 1;
            self.history.push(ForbiddenEvent {
                step: self.step,
                state: s,
                action: a,
            });
        }
    }

    /// Fixed-order sum of non-forbidden weights; replay reproduces it
    /// bit-exactly.
    fn total_weight(&self) -> T {
        let mut total = T::zero();
        for idx in 0..self.weights.len() {
            if !self.forbidden[idx] {
                total += self.weights[idx];
            }
        }
        total
    }

    fn record_draw(&mut self, s: usize, a: usize, total: T) {
        let w = self.weights[s * self.a_count + a];
        self.logprob += w.ln() - total.ln();
        self.step += 1;
    }

    fn apply(&mut self, s: usize, a: usize) -> Draw {
        let affordable = (0..self.budget.len()).all(|k| self.consumption[k][a] <= self.budget[k]);
        if affordable {
            self.action.add(s, a, 1);
            self.remaining[s] -= 1;
            for k in 0..self.budget.len() {
                self.budget[k] = self.budget[k] - self.consumption[k][a];
            }
            if self.remaining[s] == 0 {
                for act in 0..self.a_count {
                    self.forbid(s, act);
                }
            }
            Draw::Assigned
        } else {
            self.forbid(s, a);
            Draw::Rejected
        }
    }
}

fn effective_budgets<T: Scalar>(budgets: &[T], resource_use: &[T]) -> Result<Vec<T>> {
    if budgets.len() != resource_use.len() {
        return Err(Error::LengthMismatch {
            expected: budgets.len(),
            got: resource_use.len(),
        });
    }
    Ok(budgets
        .iter()
        .zip(resource_use)
        .map(|(&b, &p)| b * p)
        .collect())
}

/// Run the sampling loop, drawing pairs proportional to the masked
/// priorities. `consumption` is the symmetric table `d[k][a]`.
pub fn sample_count_action<T: Scalar, R: rand::Rng>(
    x: &CountState,
    out: &PolicyOutput<T>,
    budgets: &[T],
    consumption: &[Vec<T>],
    rng: &mut R,
) -> Result<SampleTrace<T>> {
    let initial_budgets = effective_budgets(budgets, &out.resource_use)?;
    let mut engine = Engine::new(x, &out.priorities, &initial_budgets, consumption)?;
    let mut chosen = Vec::new();
    let bound = x.total() + engine.s_count * engine.a_count;
    while !engine.done() {
        let total = engine.total_weight();
        debug_assert!(total > T::zero(), "non-forbidden weights must be positive");
        let mut draw = T::of(rng.random::<f64>()) * total;
        let mut pick = None;
        for idx in 0..engine.weights.len() {
            if engine.forbidden[idx] {
                continue;
            }
            draw -= engine.weights[idx];
            if draw < T::zero() {
                pick = Some(idx);
                break;
            }
        }
        // Guard against accumulated float underflow on the last entry.
        let idx = pick.unwrap_or_else(|| {
            (0..engine.weights.len())
                .rev()
                .find(|&i| !engine.forbidden[i])
                .expect("loop runs only while entries remain")
        });
        let (s, a) = (idx / engine.a_count, idx % engine.a_count);
        engine.record_draw(s, a, total);
        chosen.push((s, a));
        engine.apply(s, a);
        debug_assert!(engine.step <= bound, "draw bound exceeded");
    }
    Ok(SampleTrace {
        action: engine.action,
        chosen_pairs: chosen,
        logprob: engine.logprob,
        effective_budgets: initial_budgets,
        forbidden_history: engine.history,
        iterations: engine.step,
    })
}

/// Replay a trace under (possibly updated) priorities and return the
/// categorical log-probability of the recorded draw sequence.
///
/// Affordability replays from the trace's stored effective budgets, so the
/// forbidden-set evolution is identical to the original run; only the
/// categorical weights change.
pub fn logprob_of<T: Scalar>(
    x: &CountState,
    out: &PolicyOutput<T>,
    consumption: &[Vec<T>],
    trace: &SampleTrace<T>,
) -> Result<T> {
    replay(x, &out.priorities, consumption, trace, None)
}

/// Replay as [`logprob_of`] while also accumulating the gradient of the
/// log-probability with respect to every priority entry.
pub fn logprob_grad<T: Scalar>(
    x: &CountState,
    priorities: &[T],
    consumption: &[Vec<T>],
    trace: &SampleTrace<T>,
) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); priorities.len()];
    let logprob = replay(x, priorities, consumption, trace, Some(&mut grad))?;
    Ok((logprob, grad))
}

fn replay<T: Scalar>(
    x: &CountState,
    priorities: &[T],
    consumption: &[Vec<T>],
    trace: &SampleTrace<T>,
    mut grad: Option<&mut Vec<T>>,
) -> Result<T> {
    let mut engine = Engine::new(x, priorities, &trace.effective_budgets, consumption)?;
    for &(s, a) in &trace.chosen_pairs {
        if engine.done() {
            return Err(Error::TraceMismatch(
                "trace continues past termination".into(),
            ));
        }
        let idx = s * engine.a_count + a;
        if idx >= engine.weights.len() || engine.forbidden[idx] {
            return Err(Error::TraceMismatch(format!(
                "pair ({s},{a}) is forbidden at replay time"
            )));
        }
        let total = engine.total_weight();
        if let Some(g) = grad.as_deref_mut() {
            g[idx] += T::one() / engine.weights[idx];
            let inv_total = T::one() / total;
            for j in 0..engine.weights.len() {
                if !engine.forbidden[j] {
                    g[j] -= inv_total;
                }
            }
        }
        engine.record_draw(s, a, total);
        engine.apply(s, a);
    }
    if !engine.done() {
        return Err(Error::TraceMismatch(
            "trace ended before termination".into(),
        ));
    }
    if engine.action != trace.action {
        return Err(Error::TraceMismatch(
            "replayed action differs from the recorded one".into(),
        ));
    }
    Ok(engine.logprob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn uniform_output(s: usize, a: usize, k: usize) -> PolicyOutput<f64> {
        PolicyOutput {
            priorities: vec![0.5; s * a],
            resource_use: vec![1.0; k],
        }
    }

    fn binary_consumption() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0]]
    }

    #[test]
    fn empty_count_state_yields_zero_action() {
        let x = CountState::new(vec![0, 0]);
        let out = uniform_output(2, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = sample_count_action(&x, &out, &[1.0], &binary_consumption(), &mut rng).unwrap();
        assert_eq!(trace.action.total(), 0);
        assert!(trace.chosen_pairs.is_empty());
        assert_eq!(trace.logprob, 0.0);
        assert_eq!(trace.iterations, 0);
    }

    #[test]
    fn zero_effective_budget_forces_idle() {
        let x = CountState::new(vec![2, 1]);
        let mut out = uniform_output(2, 2, 1);
        out.resource_use = vec![0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = sample_count_action(&x, &out, &[1.0], &binary_consumption(), &mut rng).unwrap();
        assert_eq!(trace.action.get(0, 0), 2);
        assert_eq!(trace.action.get(1, 0), 1);
        assert_eq!(trace.action.get(0, 1) + trace.action.get(1, 1), 0);
    }

    #[test]
    fn degenerate_priorities_error() {
        let x = CountState::new(vec![1, 0]);
        let out = PolicyOutput {
            priorities: vec![0.0; 4],
            resource_use: vec![1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_count_action(&x, &out, &[1.0], &binary_consumption(), &mut rng),
            Err(Error::DegeneratePriorities)
        ));
    }

    /// Exhaustive trace-tree enumeration of the sampling loop: every possible
    /// draw sequence with its probability, aggregated by final action.
    fn enumerate_action_distribution(
        x: &CountState,
        out: &PolicyOutput<f64>,
        budgets: &[f64],
        consumption: &[Vec<f64>],
    ) -> HashMap<Vec<usize>, f64> {
        fn recurse(
            weights: &[f64],
            forbidden: &mut Vec<bool>,
            num_forbidden: &mut usize,
            remaining: &mut Vec<usize>,
            budget: &mut Vec<f64>,
            consumption: &[Vec<f64>],
            a_count: usize,
            action: &mut Vec<usize>,
            prob: f64,
            out: &mut HashMap<Vec<usize>, f64>,
        ) {
            if *num_forbidden == forbidden.len() {
                *out.entry(action.clone()).or_insert(0.0) += prob;
                return;
            }
            let total: f64 = weights
                .iter()
                .enumerate()
                .filter(|(i, _)| !forbidden[*i])
                .map(|(_, w)| w)
                .sum();
            for idx in 0..weights.len() {
                if forbidden[idx] {
                    continue;
                }
                let p = weights[idx] / total;
                let (s, a) = (idx / a_count, idx % a_count);
                let affordable = (0..budget.len()).all(|k| consumption[k][a] <= budget[k]);
                // Snapshot and restore the mutable state around the branch.
                let saved_forbidden = forbidden.clone();
                let saved_num = *num_forbidden;
                let saved_remaining = remaining.clone();
                let saved_budget = budget.clone();
                if affordable {
                    action[idx] += 1;
                    remaining[s] -= 1;
                    for k in 0..budget.len() {
                        budget[k] -= consumption[k][a];
                    }
                    if remaining[s] == 0 {
                        for act in 0..a_count {
                            let j = s * a_count + act;
                            if !forbidden[j] {
                                forbidden[j] = true;
                                *num_forbidden += 1;
                            }
                        }
                    }
                } else if !forbidden[idx] {
                    forbidden[idx] = true;
                    *num_forbidden += 1;
                }
                recurse(
                    weights,
                    forbidden,
                    num_forbidden,
                    remaining,
                    budget,
                    consumption,
                    a_count,
                    action,
                    prob * p,
                    out,
                );
                if affordable {
                    action[idx] -= 1;
                }
                *forbidden = saved_forbidden;
                *num_forbidden = saved_num;
                *remaining = saved_remaining;
                *budget = saved_budget;
            }
        }

        let a_count = consumption[0].len();
        let s_count = x.num_states();
        let mut weights = out.priorities.clone();
        let mut forbidden = vec![false; s_count * a_count];
        let mut num_forbidden = 0;
        for s in 0..s_count {
            for a in 0..a_count {
                let idx = s * a_count + a;
                if x.counts()[s] == 0 {
                    weights[idx] = 0.0;
                }
                if weights[idx] <= 0.0 && !forbidden[idx] {
                    forbidden[idx] = true;
                    num_forbidden += 1;
                }
            }
        }
        let mut budget: Vec<f64> = budgets
            .iter()
            .zip(&out.resource_use)
            .map(|(b, p)| b * p)
            .collect();
        let mut remaining = x.counts().to_vec();
        let mut action = vec![0usize; s_count * a_count];
        let mut dist = HashMap::new();
        recurse(
            &weights,
            &mut forbidden,
            &mut num_forbidden,
            &mut remaining,
            &mut budget,
            consumption,
            a_count,
            &mut action,
            1.0,
            &mut dist,
        );
        dist
    }

    #[test]
    fn sampled_frequencies_match_trace_tree_enumeration() {
        let x = CountState::new(vec![1, 1]);
        let out = uniform_output(2, 2, 1);
        let budgets = [1.0];
        let consumption = binary_consumption();
        let expected = enumerate_action_distribution(&x, &out, &budgets, &consumption);
        let total_mass: f64 = expected.values().sum();
        assert!((total_mass - 1.0).abs() < 1e-12);
        // Exactly three outcomes: no-active, active-in-state-0, active-in-1.
        assert_eq!(expected.len(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 100_000usize;
        let mut histogram: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let trace = sample_count_action(&x, &out, &budgets, &consumption, &mut rng).unwrap();
            let key: Vec<usize> = (0..2)
                .flat_map(|s| (0..2).map(move |a| (s, a)))
                .map(|(s, a)| trace.action.get(s, a))
                .collect();
            *histogram.entry(key).or_insert(0) += 1;
        }
        for (action, p) in &expected {
            let got = *histogram.get(action).unwrap_or(&0) as f64;
            let mean = p * draws as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (got - mean).abs() < 3.0 * sigma + 1.0,
                "action {action:?}: {got} vs {mean} (σ {sigma})"
            );
        }
    }

    #[test]
    fn replay_is_bit_exact_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let consumption = binary_consumption();
        for _ in 0..300 {
            let s = rng.random_range(1..=3);
            let n = rng.random_range(0..=5);
            let x = CountState::new({
                let mut counts = vec![0usize; s];
                for _ in 0..n {
                    counts[rng.random_range(0..s)] += 1;
                }
                counts
            });
            let consumption2 = vec![vec![0.0, rng.random_range(0..3) as f64]; 1];
            let consumption = if rng.random::<bool>() {
                &consumption
            } else {
                &consumption2
            };
            let out = PolicyOutput {
                priorities: (0..s * 2).map(|_| rng.random::<f64>() + 1e-3).collect(),
                resource_use: vec![rng.random::<f64>()],
            };
            let budgets = [rng.random_range(0..=3) as f64];
            let trace = sample_count_action(&x, &out, &budgets, consumption, &mut rng).unwrap();
            let replayed = logprob_of(&x, &out, consumption, &trace).unwrap();
            assert_eq!(
                replayed.to_bits(),
                trace.logprob.to_bits(),
                "bit-exact replay"
            );

            let doubled = PolicyOutput {
                priorities: out.priorities.iter().map(|w| w * 2.0).collect(),
                resource_use: out.resource_use.clone(),
            };
            let rescaled = logprob_of(&x, &doubled, consumption, &trace).unwrap();
            assert!((rescaled - trace.logprob).abs() < 1e-12);
        }
    }

    #[test]
    fn logprob_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let consumption = binary_consumption();
        let x = CountState::new(vec![2, 1, 1]);
        let out = PolicyOutput {
            priorities: (0..6).map(|_| rng.random::<f64>() * 0.8 + 0.1).collect(),
            resource_use: vec![1.0],
        };
        let budgets = [2.0];
        for _ in 0..20 {
            let trace = sample_count_action(&x, &out, &budgets, &consumption, &mut rng).unwrap();
            let (_, grad) = logprob_grad(&x, &out.priorities, &consumption, &trace).unwrap();
            for idx in 0..6 {
                let h = 1e-6;
                let mut plus = out.clone();
                plus.priorities[idx] += h;
                let mut minus = out.clone();
                minus.priorities[idx] -= h;
                let fd = (logprob_of(&x, &plus, &consumption, &trace).unwrap()
                    - logprob_of(&x, &minus, &consumption, &trace).unwrap())
                    / (2.0 * h);
                let scale = fd.abs().max(grad[idx].abs()).max(1e-8);
                assert!(
                    (fd - grad[idx]).abs() / scale < 1e-5,
                    "entry {idx}: fd {fd} vs analytic {}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn fuzzed_samples_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let s = rng.random_range(1..=4);
            let a = rng.random_range(1..=3);
            let k = rng.random_range(1..=2);
            let n = rng.random_range(0..=8);
            let x = CountState::new({
                let mut counts = vec![0usize; s];
                for _ in 0..n {
                    counts[rng.random_range(0..s)] += 1;
                }
                counts
            });
            // Action 0 is idle; other actions draw random consumption.
            let consumption: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let mut row = vec![0.0];
                    for _ in 1..a {
                        row.push(rng.random_range(0..3) as f64);
                    }
                    row
                })
                .collect();
            let budgets: Vec<f64> = (0..k).map(|_| rng.random_range(0..=4) as f64).collect();
            let out = PolicyOutput {
                priorities: (0..s * a).map(|_| rng.random::<f64>() + 1e-6).collect(),
                resource_use: (0..k).map(|_| rng.random::<f64>()).collect(),
            };
            let trace = sample_count_action(&x, &out, &budgets, &consumption, &mut rng).unwrap();
            // Idle action exists: every machine is assigned.
            for st in 0..s {
                let row_sum: usize = trace.action.row(st).iter().sum();
                assert_eq!(row_sum, x.counts()[st]);
            }
            for kk in 0..k {
                let used: f64 = (0..s)
                    .flat_map(|st| (0..a).map(move |ac| (st, ac)))
                    .map(|(st, ac)| trace.action.get(st, ac) as f64 * consumption[kk][ac])
                    .sum();
                assert!(used <= budgets[kk] * out.resource_use[kk] + 1e-12);
            }
            assert!(trace.iterations <= n + s * a);
        }
    }

    #[test]
    fn relabeling_states_permutes_the_output_distribution() {
        // S=2 swap: exchanging state labels in (x, U) must swap the action
        // distribution. Budget-irrelevant setup (idle only affordable).
        let consumption = binary_consumption();
        let budgets = [1.0];
        let base_x = CountState::new(vec![2, 1]);
        let swapped_x = CountState::new(vec![1, 2]);
        let base_out = PolicyOutput {
            priorities: vec![0.7, 0.2, 0.4, 0.9],
            resource_use: vec![1.0],
        };
        let swapped_out = PolicyOutput {
            priorities: vec![0.4, 0.9, 0.7, 0.2],
            resource_use: vec![1.0],
        };
        let draws = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut base_hist: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut swapped_hist: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let t =
                sample_count_action(&base_x, &base_out, &budgets, &consumption, &mut rng).unwrap();
            *base_hist
                .entry(vec![
                    t.action.get(0, 0),
                    t.action.get(0, 1),
                    t.action.get(1, 0),
                    t.action.get(1, 1),
                ])
                .or_insert(0) += 1;
            let t = sample_count_action(&swapped_x, &swapped_out, &budgets, &consumption, &mut rng)
                .unwrap();
            // Swap rows back so the histograms share a key space.
            *swapped_hist
                .entry(vec![
                    t.action.get(1, 0),
                    t.action.get(1, 1),
                    t.action.get(0, 0),
                    t.action.get(0, 1),
                ])
                .or_insert(0) += 1;
        }
        for (key, &count) in &base_hist {
            let other = *swapped_hist.get(key).unwrap_or(&0) as f64;
            let p = count as f64 / draws as f64;
            let sigma = (2.0 * draws as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!(
                (count as f64 - other).abs() < 4.0 * sigma,
                "key {key:?}: {count} vs {other}"
            );
        }
    }
}
