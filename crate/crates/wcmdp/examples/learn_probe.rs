//! Quick end-to-end probe: exact optimum vs random baseline vs a trained
//! count-proportion policy on the 3-machine exponential-cost instance.

use wcmdp::baselines::RandomJointPolicy;
use wcmdp::count::{CountModel, SymmetricSpec};
use wcmdp::cpdrl::{self, TrainConfig};
use wcmdp::fairness::GgfWeights;
use wcmdp::instances::{build_instance, MachineReplacementConfig, Preset};
use wcmdp::lp::{solve_count_dual_lp, SolveOptions};
use wcmdp::simulate::{evaluate_count_policy, evaluate_joint_policy, EvalConfig};

fn main() {
    let n = 3;
    let cfg = MachineReplacementConfig::preset(Preset::ExponentialRccc, n, 0);
    let spec = build_instance::<f64>(&cfg).unwrap();
    let symmetric = SymmetricSpec::from_spec(&spec).unwrap();

    let count = CountModel::build(&spec).unwrap();
    let (opt, stats) = solve_count_dual_lp(&count, &SolveOptions::default()).unwrap();
    println!(
        "OPT (count dual LP): {:.6} [{} cons, {} vars, {} pivots]",
        opt.objective_value, stats.constraint_count, stats.variable_count, stats.pivots
    );

    let weights = GgfWeights::exponential(n, 2.0);
    let eval = EvalConfig::new(1000, 300, 0.95, 1234, weights.clone());
    let mut rdm = RandomJointPolicy::new(&spec);
    let rdm_report = evaluate_joint_policy(&spec, &eval, |_, rng| rdm.act(rng)).unwrap();
    println!(
        "RDM: {:.4} ± {:.4}",
        rdm_report.ggf_score, rdm_report.stderr
    );

    for seed in [0u64, 1] {
        let t0 = std::time::Instant::now();
        let train_cfg = TrainConfig::<f64> {
            rng_seed: seed,
            eval_every: 50,
            ..TrainConfig::default()
        };
        let outcome = cpdrl::train(std::slice::from_ref(&symmetric), &train_cfg).unwrap();
        let report = evaluate_count_policy(&symmetric, &eval, |x, rng| {
            cpdrl::act_greedy(&outcome.policy, x, &symmetric, rng)
        })
        .unwrap();
        let gap = (report.ggf_score - rdm_report.ggf_score)
            / (opt.objective_value - rdm_report.ggf_score);
        println!(
            "CPDRL seed {seed}: {:.4} ± {:.4}  (gap closed: {:.1}%)  [{:.1}s]",
            report.ggf_score,
            report.stderr,
            gap * 100.0,
            t0.elapsed().as_secs_f64()
        );
        for p in outcome.curve.iter().step_by(4) {
            println!("  ep {:4}: eval_ggf {:.4}", p.episode, p.eval_ggf);
        }
    }
}
