//! Structural properties of the occupancy LPs: permutation-averaged
//! occupancies, the ordering between weighted and utilitarian optima on
//! asymmetric instances, and a value-iteration cross-check when the budget
//! collapses the policy space.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use wcmdp::count::CountModel;
use wcmdp::fairness::GgfWeights;
use wcmdp::instances::{
    build_instance, random_sub_mdp, random_symmetric_instance, MachineReplacementConfig, Preset,
};
use wcmdp::lp::{solve_count_dual_lp, solve_ggf_lp, value_vector_of, SolveOptions};
use wcmdp::model::{expand_joint, WcmdpSpec};
use wcmdp::perm::all_permutations;

/// Averaging an optimal occupancy over all sub-MDP permutations stays
/// feasible (flow conservation holds) and flattens the value vector onto its
/// mean.
#[test]
fn permutation_averaged_occupancy_has_uniform_values() {
    for (n, s) in [(2usize, 3usize), (3, 2), (3, 3)] {
        let spec = random_symmetric_instance::<f64>(7 + n as u64, n, s, 1.0, 0.9);
        let joint = expand_joint(&spec, None).unwrap();
        let weights = GgfWeights::exponential(n, 2.0);
        let (solution, _) = solve_ggf_lp(&joint, &weights, &SolveOptions::default()).unwrap();

        let num_actions = joint.feasible_actions().len();
        let mut averaged = vec![0.0; solution.q.len()];
        let permutations = all_permutations(n);
        for sigma in &permutations {
            for st in 0..joint.num_states() {
                let ps = joint.permute_state(st, sigma).unwrap();
                for a in 0..num_actions {
                    let pa = joint.permute_action(a, sigma).unwrap();
                    averaged[st * num_actions + a] +=
                        solution.q[ps * num_actions + pa] / permutations.len() as f64;
                }
            }
        }

        // Still an occupancy: nonnegative, conserves discounted flow.
        let gamma = joint.discount();
        for &q in &averaged {
            assert!(q >= -1e-9);
        }
        for st in 0..joint.num_states() {
            let mut lhs = 0.0;
            for a in 0..num_actions {
                lhs += averaged[st * num_actions + a];
            }
            for prev in 0..joint.num_states() {
                for a in 0..num_actions {
                    lhs -= gamma * joint.p(prev, a, st) * averaged[prev * num_actions + a];
                }
            }
            assert!(
                (lhs - joint.initial()[st]).abs() < 1e-7,
                "flow residual {} at state {st}",
                (lhs - joint.initial()[st]).abs()
            );
        }

        // Uniform value vector preserving the original mean.
        let original = value_vector_of(&solution.q, &joint);
        let averaged_values = value_vector_of(&averaged, &joint);
        let mean: f64 = original.iter().sum::<f64>() / n as f64;
        for &v in &averaged_values {
            assert!(
                (v - mean).abs() < 1e-7,
                "averaged component {v} differs from mean {mean}"
            );
        }
    }
}

/// On asymmetric instances the non-uniformly weighted optimum can only fall
/// below the utilitarian optimum; on symmetric ones they coincide.
#[test]
fn weighted_optimum_never_exceeds_utilitarian() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..6 {
        let n = 2 + (trial % 2);
        // Deliberately different sub-MDPs.
        let subs: Vec<_> = (0..n)
            .map(|_| random_sub_mdp::<f64, _>(&mut rng, 3, 2))
            .collect();
        let spec = WcmdpSpec::new(subs, vec![vec![vec![0.0, 1.0]; n]], vec![1.0], 0.9).unwrap();
        let joint = expand_joint(&spec, None).unwrap();
        let utilitarian = solve_ggf_lp(
            &joint,
            &GgfWeights::utilitarian(n),
            &SolveOptions::default(),
        )
        .unwrap()
        .0
        .objective_value;
        for weights in [
            GgfWeights::exponential(n, 2.0),
            GgfWeights::exponential(n, 4.0),
        ] {
            let weighted = solve_ggf_lp(&joint, &weights, &SolveOptions::default())
                .unwrap()
                .0
                .objective_value;
            assert!(
                weighted <= utilitarian + 1e-7,
                "trial {trial}: weighted {weighted} exceeds utilitarian {utilitarian}"
            );
        }
    }
}

/// Budget zero admits exactly one (all-passive) policy, so the count LP
/// optimum must equal plain value iteration of the passive chain.
#[test]
fn zero_budget_count_lp_matches_value_iteration() {
    let mut cfg = MachineReplacementConfig::preset(Preset::ExponentialRccc, 3, 11);
    cfg.budget = 0.0;
    let spec = build_instance::<f64>(&cfg).unwrap();
    let count = CountModel::build(&spec).unwrap();
    let (solution, _) = solve_count_dual_lp(&count, &SolveOptions::default()).unwrap();

    let sub = spec.sub_mdp(0);
    let gamma = spec.discount();
    let mut values = vec![0.0f64; sub.num_states()];
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..sub.num_states() {
            let mut v = sub.r(s, 0);
            for s2 in 0..sub.num_states() {
                v += gamma * sub.p(s, 0, s2) * values[s2];
            }
            residual = residual.max((v - values[s]).abs());
            values[s] = v;
        }
        if residual < 1e-13 {
            break;
        }
    }
    let expected: f64 = (0..sub.num_states())
        .map(|s| sub.initial()[s] * values[s])
        .sum();
    assert!(
        (solution.objective_value - expected).abs() < 1e-8,
        "LP {} vs value iteration {expected}",
        solution.objective_value
    );
}

/// The count-model debug dump round-trips through JSON with the envelope
/// fields in place.
#[test]
fn count_model_debug_dump_has_the_envelope_shape() {
    let cfg = MachineReplacementConfig::preset(Preset::QuadraticRccc, 2, 3);
    let spec = build_instance::<f64>(&cfg).unwrap();
    let count = CountModel::build(&spec).unwrap();
    let dump = count.to_debug_json();
    for field in [
        "num_submdps",
        "states",
        "actions",
        "transition",
        "reward",
        "initial",
        "discount",
        "symmetric",
    ] {
        assert!(dump.get(field).is_some(), "missing field {field}");
    }
    assert_eq!(
        dump["states"].as_u64().unwrap() as usize,
        count.num_states()
    );
    let rows = dump["transition"].as_array().unwrap();
    assert_eq!(rows.len(), count.num_states());
}
