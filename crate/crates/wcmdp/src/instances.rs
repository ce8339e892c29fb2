//! Machine-replacement benchmark generator and random symmetric instances.
//!
//! Machines age through `S` deterioration stages under Markovian dynamics:
//! operating (the idle action) keeps a machine in place with probability
//! `p_m` and advances it one stage otherwise, the last stage being absorbing;
//! replacing (the active action, consuming one unit of the single resource)
//! resets the machine to the first stage with probability `p_s`. Stage costs
//! follow one of several shapes, replacements cost a constant, and all costs
//! are normalized to `[0, 1]` then flipped into rewards `r = 1 - c`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SubMdp, WcmdpSpec};
use crate::scalar::Scalar;

/// Shape of the per-stage operating cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperateCostKind {
    /// `c(s) = s - 1` (1-based stage index).
    Linear,
    /// `c(s) = (s - 1)^2`.
    Quadratic,
    /// `c(s) = e^(s - 1)`.
    Exponential,
    /// Uniform draws in `[0, 1]` from the seeded stream.
    Random,
}

/// Shape of the replacement cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplaceCostKind {
    /// Constant `1.5 (S - 1)^2`, a 1.5 ratio to the worst quadratic cost.
    Rccc,
}

/// The two published cost presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ExponentialRccc,
    QuadraticRccc,
}

impl Preset {
    pub fn operate_cost_kind(self) -> OperateCostKind {
        match self {
            Preset::ExponentialRccc => OperateCostKind::Exponential,
            Preset::QuadraticRccc => OperateCostKind::Quadratic,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential-rccc" => Ok(Preset::ExponentialRccc),
            "quadratic-rccc" => Ok(Preset::QuadraticRccc),
            other => Err(Error::ConfigInvalid(format!("unknown preset `{other}`"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::ExponentialRccc => write!(f, "exponential-rccc"),
            Preset::QuadraticRccc => write!(f, "quadratic-rccc"),
        }
    }
}

/// Full configuration for one machine-replacement instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineReplacementConfig {
    pub num_machines: usize,
    pub num_states: usize,
    /// Probability of staying in the current stage under the passive action.
    pub stay_prob: f64,
    /// Probability a replacement actually resets the machine to stage one.
    pub reset_success: f64,
    pub operate_cost: OperateCostKind,
    pub replace_cost: ReplaceCostKind,
    pub budget: f64,
    pub discount: f64,
    pub rng_seed: u64,
}

impl MachineReplacementConfig {
    pub fn preset(preset: Preset, num_machines: usize, seed: u64) -> Self {
        Self {
            num_machines,
            num_states: 3,
            stay_prob: 0.8,
            reset_success: 1.0,
            operate_cost: preset.operate_cost_kind(),
            replace_cost: ReplaceCostKind::Rccc,
            budget: 1.0,
            discount: 0.95,
            rng_seed: seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_states < 2 {
            return Err(Error::ConfigInvalid("need at least two stages".into()));
        }
        if self.num_machines == 0 {
            return Err(Error::ConfigInvalid("need at least one machine".into()));
        }
        if !(0.0..=1.0).contains(&self.stay_prob) {
            return Err(Error::ConfigInvalid("stay_prob outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.reset_success) {
            return Err(Error::ConfigInvalid("reset_success outside [0, 1]".into()));
        }
        if self.budget < 0.0 {
            return Err(Error::ConfigInvalid("budget must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::ConfigInvalid("discount outside [0, 1)".into()));
        }
        Ok(())
    }
}

/// Operating cost of 1-based stage `s` for the closed-form kinds.
///
/// The `Random` kind is drawn per instance from the seeded stream; see
/// [`operate_cost_vector`].
pub fn operate_cost<T: Scalar>(kind: OperateCostKind, s: usize, num_states: usize) -> T {
    assert!(
        (1..=num_states).contains(&s),
        "stage index {s} outside 1..={num_states}"
    );
    let stage = T::of_usize(s - 1);
    match kind {
        OperateCostKind::Linear => stage,
        OperateCostKind::Quadratic => stage * stage,
        OperateCostKind::Exponential => stage.exp(),
        OperateCostKind::Random => {
            panic!("random operating costs come from the seeded stream; use operate_cost_vector")
        }
    }
}

/// All `S` operating costs; the `Random` kind consumes the RNG stream.
pub fn operate_cost_vector<T: Scalar, R: Rng>(
    kind: OperateCostKind,
    num_states: usize,
    rng: &mut R,
) -> Vec<T> {
    match kind {
        OperateCostKind::Random => (0..num_states)
            .map(|_| T::of(rng.random::<f64>()))
            .collect(),
        _ => (1..=num_states)
            .map(|s| operate_cost(kind, s, num_states))
            .collect(),
    }
}

/// Constant replacement cost `1.5 (S - 1)^2`.
pub fn replace_cost_rccc<T: Scalar>(num_states: usize) -> T {
    assert!(num_states >= 2);
    let worst = T::of_usize(num_states - 1);
    T::of(1.5) * worst * worst
}

/// Build the symmetric machine-replacement instance described by `cfg`.
///
/// The cost matrix is generated once and shared across machines, so the
/// instance is exactly symmetric rather than symmetric up to regeneration
/// noise.
pub fn build_instance<T: Scalar>(cfg: &MachineReplacementConfig) -> Result<WcmdpSpec<T>> {
    cfg.validate()?;
    let s_count = cfg.num_states;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let operate: Vec<T> = operate_cost_vector(cfg.operate_cost, s_count, &mut rng);
    let replace: T = match cfg.replace_cost {
        ReplaceCostKind::Rccc => replace_cost_rccc(s_count),
    };

    let max_cost = operate
        .iter()
        .copied()
        .fold(replace, T::max)
        .max(T::of(f64::MIN_POSITIVE));
    let reward = |cost: T| T::one() - cost / max_cost;

    let p_m = T::of(cfg.stay_prob);
    let p_s = T::of(cfg.reset_success);

    // Passive rows: stay with p_m, advance otherwise; last stage absorbing.
    let mut passive = vec![vec![T::zero(); s_count]; s_count];
    for s in 0..s_count {
        if s + 1 < s_count {
            passive[s][s] = p_m;
            passive[s][s + 1] = T::one() - p_m;
        } else {
            passive[s][s] = T::one();
        }
    }

    let mut transition = vec![T::zero(); s_count * 2 * s_count];
    let mut reward_table = vec![T::zero(); s_count * 2];
    for s in 0..s_count {
        for s2 in 0..s_count {
            transition[(s * 2) * s_count + s2] = passive[s][s2];
            // Active: reset with p_s, else deteriorate as if passive.
            let mut p = (T::one() - p_s) * passive[s][s2];
            if s2 == 0 {
                p += p_s;
            }
            transition[(s * 2 + 1) * s_count + s2] = p;
        }
        reward_table[s * 2] = reward(operate[s]);
        reward_table[s * 2 + 1] = reward(replace);
    }

    let initial = vec![T::one() / T::of_usize(s_count); s_count];
    let sub = SubMdp::new(s_count, 2, transition, reward_table, initial)?;

    let n = cfg.num_machines;
    WcmdpSpec::new(
        vec![sub; n],
        vec![vec![vec![T::zero(), T::one()]; n]],
        vec![T::of(cfg.budget)],
        T::of(cfg.discount),
    )
}

/// A fully random symmetric instance: row-normalized random transitions,
/// uniform random rewards in `[0, 1]`, a shared random initial distribution,
/// binary actions with `d = (0, 1)`. Used by the symmetry property suites.
pub fn random_symmetric_instance<T: Scalar>(
    seed: u64,
    num_submdps: usize,
    num_states: usize,
    budget: f64,
    discount: f64,
) -> WcmdpSpec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = random_sub_mdp(&mut rng, num_states, 2);
    WcmdpSpec::new(
        vec![sub; num_submdps],
        vec![vec![vec![T::zero(), T::one()]; num_submdps]],
        vec![T::of(budget)],
        T::of(discount),
    )
    .expect("random symmetric instance is always valid")
}

/// A random sub-MDP with exactly normalized transition rows.
pub fn random_sub_mdp<T: Scalar, R: Rng>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
) -> SubMdp<T> {
    let dist = |rng: &mut R| -> Vec<T> {
        let mut weights: Vec<T> = (0..num_states)
            .map(|_| T::of(rng.random::<f64>() + 1e-3))
            .collect();
        let total: T = weights.iter().copied().sum();
        for w in &mut weights {
            *w /= total;
        }
        let correction = T::one() - weights.iter().copied().sum::<T>();
        weights[num_states - 1] += correction;
        weights
    };
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        transition.extend(dist(rng));
    }
    let reward: Vec<T> = (0..num_states * num_actions)
        .map(|_| T::of(rng.random::<f64>()))
        .collect();
    let initial = dist(rng);
    SubMdp::new(num_states, num_actions, transition, reward, initial)
        .expect("random tables satisfy the construction invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_symmetric;

    fn quadratic_cfg() -> MachineReplacementConfig {
        MachineReplacementConfig {
            num_machines: 2,
            num_states: 3,
            stay_prob: 0.8,
            reset_success: 1.0,
            operate_cost: OperateCostKind::Quadratic,
            replace_cost: ReplaceCostKind::Rccc,
            budget: 1.0,
            discount: 0.95,
            rng_seed: 7,
        }
    }

    #[test]
    fn operate_cost_examples() {
        let quad: Vec<f64> = (1..=3)
            .map(|s| operate_cost(OperateCostKind::Quadratic, s, 3))
            .collect();
        assert_eq!(quad, vec![0.0, 1.0, 4.0]);

        assert_eq!(operate_cost::<f64>(OperateCostKind::Linear, 1, 3), 0.0);

        let e2: f64 = operate_cost(OperateCostKind::Exponential, 3, 3);
        assert!((e2 - std::f64::consts::E.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn replace_cost_examples() {
        assert_eq!(replace_cost_rccc::<f64>(3), 6.0);
        assert_eq!(replace_cost_rccc::<f64>(2), 1.5);
        // Quadratic preset: replacement stays above the worst operating cost.
        assert!(
            replace_cost_rccc::<f64>(3) > operate_cost::<f64>(OperateCostKind::Quadratic, 3, 3)
        );
    }

    #[test]
    fn exponential_preset_worst_stage_exceeds_replacement() {
        let worst: f64 = operate_cost(OperateCostKind::Exponential, 3, 3);
        assert!(worst > replace_cost_rccc::<f64>(3));
        assert!((worst - 7.389_056_098_930_65).abs() < 1e-12);
    }

    #[test]
    fn passive_row_and_pure_reset() {
        let spec: WcmdpSpec<f64> = build_instance(&quadratic_cfg()).unwrap();
        let sub = spec.sub_mdp(0);
        let assert_row = |got: &[f64], want: [f64; 3]| {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-15, "row {got:?} != {want:?}");
            }
        };
        // S=3, p_m=0.8: passive row from stage one.
        assert_row(sub.transition_row(0, 0), [0.8, 0.2, 0.0]);
        // Absorbing last stage under passive.
        assert_row(sub.transition_row(2, 0), [0.0, 0.0, 1.0]);
        // p_s=1: active rows reset from any stage.
        for s in 0..3 {
            assert_row(sub.transition_row(s, 1), [1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn quadratic_rccc_rewards() {
        let spec: WcmdpSpec<f64> = build_instance(&quadratic_cfg()).unwrap();
        let sub = spec.sub_mdp(0);
        // Costs (0, 1, 4) with replacement 6: rewards 1 - c/6.
        let expected_operate = [1.0, 5.0 / 6.0, 1.0 / 3.0];
        for s in 0..3 {
            assert!((sub.r(s, 0) - expected_operate[s]).abs() < 1e-12);
            assert!((sub.r(s, 1) - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_instances_are_symmetric_with_unit_range_rewards() {
        for seed in 0..5 {
            for preset in [Preset::ExponentialRccc, Preset::QuadraticRccc] {
                let mut cfg = MachineReplacementConfig::preset(preset, 3, seed);
                cfg.num_states = 3 + (seed as usize % 2);
                let spec: WcmdpSpec<f64> = build_instance(&cfg).unwrap();
                assert!(is_symmetric(&spec, 1e-9));
                let sub = spec.sub_mdp(0);
                for s in 0..sub.num_states() {
                    for a in 0..2 {
                        let r = sub.r(s, a);
                        assert!((0.0..=1.0).contains(&r), "reward {r} outside unit range");
                    }
                }
            }
        }
    }

    #[test]
    fn random_cost_kind_is_seed_deterministic() {
        let mut cfg = quadratic_cfg();
        cfg.operate_cost = OperateCostKind::Random;
        let a: WcmdpSpec<f64> = build_instance(&cfg).unwrap();
        let b: WcmdpSpec<f64> = build_instance(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.rng_seed += 1;
        let c: WcmdpSpec<f64> = build_instance(&cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = quadratic_cfg();
        cfg.num_states = 1;
        assert!(matches!(
            build_instance::<f64>(&cfg),
            Err(Error::ConfigInvalid(_))
        ));
        let mut cfg = quadratic_cfg();
        cfg.discount = 1.0;
        assert!(build_instance::<f64>(&cfg).is_err());
        let mut cfg = quadratic_cfg();
        cfg.stay_prob = 1.2;
        assert!(build_instance::<f64>(&cfg).is_err());
    }
}
