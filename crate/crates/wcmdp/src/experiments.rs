//! Experiment runners replicating the benchmark protocol at desk scale:
//! optimality against the exact LP, multitask flexibility, scalability in
//! the machine count, and LP model-size/timing statistics. Each runner
//! returns typed rows; the CSV writers put deterministic columns first so
//! re-runs diff cleanly except for wall-time fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{whittle_indices, wip_act, RandomJointPolicy};
use crate::count::{CountModel, SymmetricSpec};
use crate::cpdrl::{self, TrainConfig};
use crate::error::{Error, Result};
use crate::fairness::GgfWeights;
use crate::fileio::InstanceFile;
use crate::instances::{build_instance, MachineReplacementConfig, Preset};
use crate::lp::{extract_policy, solve_count_dual_lp, solve_ggf_lp, LpStats, SolveOptions};
use crate::model::{expand_joint, JointModel, WcmdpSpec};
use crate::simulate::{evaluate_count_policy, evaluate_joint_policy, EvalConfig, EvalReport};

/// Which experiment a config file drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "e1-optimality")]
    Optimality,
    #[serde(rename = "e2-flexibility")]
    Flexibility,
    #[serde(rename = "e3-scalability")]
    Scalability,
    #[serde(rename = "e4-efficiency")]
    Efficiency,
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e1" | "e1-optimality" => Ok(Self::Optimality),
            "e2" | "e2-flexibility" => Ok(Self::Flexibility),
            "e3" | "e3-scalability" => Ok(Self::Scalability),
            "e4" | "e4-efficiency" => Ok(Self::Efficiency),
            other => Err(Error::ConfigInvalid(format!(
                "unknown experiment `{other}`"
            ))),
        }
    }
}

fn default_trajectories() -> usize {
    1000
}
fn default_horizon() -> usize {
    300
}
fn default_weights_factor() -> f64 {
    2.0
}
fn default_stay_prob() -> f64 {
    0.8
}
fn default_reset_success() -> f64 {
    1.0
}
fn default_states() -> usize {
    3
}
fn default_budget() -> f64 {
    1.0
}
fn default_discount() -> f64 {
    0.95
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_random_runs() -> usize {
    10
}
fn default_e3_machines() -> Vec<usize> {
    vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
}
fn default_e3_ratio() -> f64 {
    0.1
}
fn default_e4_max_machines() -> usize {
    7
}
fn default_e4_joint_solve_max() -> usize {
    6
}

/// One experiment's full configuration; unspecified fields take the
/// published defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    #[serde(default = "Preset::default_preset")]
    pub preset: Preset,
    #[serde(default = "default_states")]
    pub num_states: usize,
    #[serde(default = "default_stay_prob")]
    pub stay_prob: f64,
    #[serde(default = "default_reset_success")]
    pub reset_success: f64,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Seed for the instance cost draw.
    #[serde(default)]
    pub cost_seed: u64,
    /// Training seeds (one run per seed).
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval_seed: u64,
    /// Machine counts; experiment-specific defaults apply when absent.
    #[serde(default)]
    pub machines: Option<Vec<usize>>,
    /// Training episodes; e1 defaults to 800, e2 to 2000, e3 to 800.
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_weights_factor")]
    pub weights_factor: f64,
    /// Independent runs averaged into the random-policy row.
    #[serde(default = "default_random_runs")]
    pub random_runs: usize,
    /// Resource ratio `b = ratio * N` for the scalability run.
    #[serde(default = "default_e3_ratio")]
    pub resource_ratio: f64,
    /// Largest machine count for the LP statistics table.
    #[serde(default = "default_e4_max_machines")]
    pub e4_max_machines: usize,
    /// Largest machine count whose joint LP is actually solved; sizes beyond
    /// it come from the closed forms (at seven machines the dense product
    /// model alone needs ~3.8e7 table entries).
    #[serde(default = "default_e4_joint_solve_max")]
    pub e4_joint_solve_max: usize,
}

impl Preset {
    fn default_preset() -> Self {
        Preset::ExponentialRccc
    }
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentId) -> Self {
        serde_json::from_value(serde_json::json!({
            "experiment": serde_json::to_value(experiment).unwrap(),
        }))
        .expect("defaults fill every field")
    }

    pub fn machine_config(&self, n: usize, budget: f64) -> MachineReplacementConfig {
        MachineReplacementConfig {
            num_machines: n,
            num_states: self.num_states,
            stay_prob: self.stay_prob,
            reset_success: self.reset_success,
            operate_cost: self.preset.operate_cost_kind(),
            replace_cost: crate::instances::ReplaceCostKind::Rccc,
            budget,
            discount: self.discount,
            rng_seed: self.cost_seed,
        }
    }

    fn weights(&self, n: usize) -> GgfWeights<f64> {
        GgfWeights::exponential(n, self.weights_factor)
    }

    fn eval_config(&self, n: usize, seed: u64) -> EvalConfig<f64> {
        EvalConfig::new(
            self.trajectories,
            self.horizon,
            self.discount,
            seed,
            self.weights(n),
        )
    }

    fn train_config(&self, seed: u64, default_episodes: usize) -> TrainConfig<f64> {
        TrainConfig {
            episodes: self.episodes.unwrap_or(default_episodes),
            discount: self.discount,
            rng_seed: seed,
            ..TrainConfig::default()
        }
    }
}

/// A policy's evaluation on one instance; shared row shape for e1 and e2.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreRow {
    pub experiment: String,
    pub policy: String,
    pub num_machines: usize,
    pub num_states: usize,
    pub budget: f64,
    pub preset: String,
    pub stay_prob: f64,
    pub reset_success: f64,
    pub cost_seed: u64,
    pub train_seed: Option<u64>,
    pub eval_seed: u64,
    pub ggf: f64,
    pub stderr: f64,
    pub wall_seconds: f64,
}

impl ScoreRow {
    fn new(spec: &ExperimentSpec, experiment: &str, policy: &str, n: usize) -> Self {
        Self {
            experiment: experiment.into(),
            policy: policy.into(),
            num_machines: n,
            num_states: spec.num_states,
            budget: spec.budget,
            preset: spec.preset.to_string(),
            stay_prob: spec.stay_prob,
            reset_success: spec.reset_success,
            cost_seed: spec.cost_seed,
            train_seed: None,
            eval_seed: spec.eval_seed,
            ggf: f64::NAN,
            stderr: 0.0,
            wall_seconds: 0.0,
        }
    }

    fn with_report(mut self, report: &EvalReport<f64>) -> Self {
        self.ggf = report.ggf_score;
        self.stderr = report.stderr;
        self.wall_seconds = report.wall_seconds;
        self
    }
}

fn joint_of(spec: &WcmdpSpec<f64>) -> Result<JointModel<f64>> {
    expand_joint(spec, None)
}

fn wip_report(
    spec: &ExperimentSpec,
    instance: &WcmdpSpec<f64>,
    n: usize,
) -> Result<EvalReport<f64>> {
    let table = whittle_indices(instance.sub_mdp(0), instance.discount(), 1e-7)?;
    let budget = instance.budgets()[0];
    evaluate_joint_policy(
        instance,
        &spec.eval_config(n, spec.eval_seed),
        |state, _| wip_act(state, &table, budget),
    )
}

fn random_report(
    spec: &ExperimentSpec,
    instance: &WcmdpSpec<f64>,
    n: usize,
) -> Result<EvalReport<f64>> {
    // The published protocol averages the random agent over independent runs.
    let mut scores = Vec::with_capacity(spec.random_runs);
    let mut means = vec![0.0; n];
    let mut last = None;
    for run in 0..spec.random_runs {
        let mut policy = RandomJointPolicy::new(instance);
        let report = evaluate_joint_policy(
            instance,
            &spec.eval_config(n, spec.eval_seed.wrapping_add(run as u64)),
            |_, rng| policy.act(rng),
        )?;
        scores.push(report.ggf_score);
        for (m, v) in means.iter_mut().zip(&report.mean_value_per_submdp) {
            *m += v / spec.random_runs as f64;
        }
        last = Some(report);
    }
    let mut report = last.expect("at least one run");
    let mean: f64 = scores.iter().sum::<f64>() / scores.len() as f64;
    let var: f64 =
        scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (scores.len().max(2) - 1) as f64;
    report.ggf_score = mean;
    report.stderr = (var / scores.len() as f64).sqrt();
    report.mean_value_per_submdp = means;
    Ok(report)
}

/// Experiment 1: exact optimum, Whittle index, trained policy, and random
/// baseline on small instances.
pub fn run_e1(spec: &ExperimentSpec) -> Result<Vec<ScoreRow>> {
    let machines = spec.machines.clone().unwrap_or_else(|| vec![3, 4, 5]);
    let mut rows = Vec::new();
    for &n in &machines {
        let cfg = spec.machine_config(n, spec.budget);
        let instance = build_instance::<f64>(&cfg)?;
        let symmetric = SymmetricSpec::from_spec(&instance)?;

        let start = std::time::Instant::now();
        let joint = joint_of(&instance)?;
        let (opt, _) = solve_ggf_lp(&joint, &spec.weights(n), &SolveOptions::default())?;
        let mut opt_row = ScoreRow::new(spec, "e1-optimality", "OPT", n);
        opt_row.ggf = opt.objective_value;
        opt_row.wall_seconds = start.elapsed().as_secs_f64();
        rows.push(opt_row);

        rows.push(
            ScoreRow::new(spec, "e1-optimality", "WIP", n)
                .with_report(&wip_report(spec, &instance, n)?),
        );

        for &seed in &spec.seeds {
            let outcome = cpdrl::train(
                std::slice::from_ref(&symmetric),
                &spec.train_config(seed, 800),
            )?;
            let report = evaluate_count_policy(
                &symmetric,
                &spec.eval_config(n, spec.eval_seed),
                |x, rng| cpdrl::act_greedy(&outcome.policy, x, &symmetric, rng),
            )?;
            let mut row = ScoreRow::new(spec, "e1-optimality", "CPDRL", n).with_report(&report);
            row.train_seed = Some(seed);
            rows.push(row);
        }

        rows.push(
            ScoreRow::new(spec, "e1-optimality", "RDM", n)
                .with_report(&random_report(spec, &instance, n)?),
        );
    }
    Ok(rows)
}

/// Experiment 2: one multitask policy trained across machine counts,
/// evaluated at each count against the exact optimum and the baselines.
pub fn run_e2(spec: &ExperimentSpec) -> Result<Vec<ScoreRow>> {
    let machines = spec.machines.clone().unwrap_or_else(|| vec![2, 3, 4, 5]);
    let tasks: Vec<SymmetricSpec<f64>> = machines
        .iter()
        .map(|&n| {
            let cfg = spec.machine_config(n, spec.budget);
            SymmetricSpec::from_spec(&build_instance::<f64>(&cfg)?)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let outcome = cpdrl::train(&tasks, &spec.train_config(seed, 2000))?;
        for (task, &n) in tasks.iter().zip(&machines) {
            let report =
                evaluate_count_policy(task, &spec.eval_config(n, spec.eval_seed), |x, rng| {
                    cpdrl::act_greedy(&outcome.policy, x, task, rng)
                })?;
            let mut row = ScoreRow::new(spec, "e2-flexibility", "CPDRL-MT", n).with_report(&report);
            row.train_seed = Some(seed);
            rows.push(row);
        }
    }

    for (task, &n) in tasks.iter().zip(&machines) {
        let instance = task.to_wcmdp();
        let start = std::time::Instant::now();
        let count = CountModel::build(&instance)?;
        let (opt, _) = solve_count_dual_lp(&count, &SolveOptions::default())?;
        let mut row = ScoreRow::new(spec, "e2-flexibility", "OPT", n);
        // Symmetric instances: the utilitarian count optimum is the GGF
        // optimum for every weight vector.
        row.ggf = opt.objective_value;
        row.wall_seconds = start.elapsed().as_secs_f64();
        rows.push(row);

        rows.push(
            ScoreRow::new(spec, "e2-flexibility", "WIP", n)
                .with_report(&wip_report(spec, &instance, n)?),
        );
        rows.push(
            ScoreRow::new(spec, "e2-flexibility", "RDM", n)
                .with_report(&random_report(spec, &instance, n)?),
        );
    }
    Ok(rows)
}

/// One scalability measurement.
#[derive(Debug, Clone, Serialize)]
pub struct ScalabilityRow {
    pub experiment: String,
    pub policy: String,
    pub num_machines: usize,
    pub budget: f64,
    pub preset: String,
    pub stay_prob: f64,
    pub cost_seed: u64,
    pub train_seed: u64,
    pub ggf: f64,
    pub stderr: f64,
    pub train_rollout_seconds_per_episode: f64,
    pub eval_seconds_per_trajectory: f64,
}

/// Experiment 3: growing machine counts at a fixed resource ratio, plus
/// zero-shot transfer of the smallest checkpoint, with per-episode wall
/// times.
pub fn run_e3(spec: &ExperimentSpec) -> Result<Vec<ScalabilityRow>> {
    let machines = spec.machines.clone().unwrap_or_else(default_e3_machines);
    let seed = spec.seeds.first().copied().unwrap_or(0);
    let mut rows = Vec::new();

    let budget_of = |n: usize| (spec.resource_ratio * n as f64).max(1.0).floor();

    // Transfer source: the smallest machine count.
    let transfer_n = machines.iter().copied().min().unwrap_or(10);
    let transfer_task = SymmetricSpec::from_spec(&build_instance::<f64>(
        &spec.machine_config(transfer_n, budget_of(transfer_n)),
    )?)?;
    let transfer = cpdrl::train(
        std::slice::from_ref(&transfer_task),
        &spec.train_config(seed, 800),
    )?;

    for &n in &machines {
        let budget = budget_of(n);
        let instance = build_instance::<f64>(&spec.machine_config(n, budget))?;
        let symmetric = SymmetricSpec::from_spec(&instance)?;

        let outcome = cpdrl::train(
            std::slice::from_ref(&symmetric),
            &spec.train_config(seed, 800),
        )?;
        let report = evaluate_count_policy(
            &symmetric,
            &spec.eval_config(n, spec.eval_seed),
            |x, rng| cpdrl::act_greedy(&outcome.policy, x, &symmetric, rng),
        )?;
        rows.push(ScalabilityRow {
            experiment: "e3-scalability".into(),
            policy: "CPDRL".into(),
            num_machines: n,
            budget,
            preset: spec.preset.to_string(),
            stay_prob: spec.stay_prob,
            cost_seed: spec.cost_seed,
            train_seed: seed,
            ggf: report.ggf_score,
            stderr: report.stderr,
            train_rollout_seconds_per_episode: outcome.rollout_seconds
                / outcome.episodes_run as f64,
            eval_seconds_per_trajectory: report.wall_seconds / report.trajectories_used as f64,
        });

        let transfer_report = evaluate_count_policy(
            &symmetric,
            &spec.eval_config(n, spec.eval_seed),
            |x, rng| cpdrl::act_greedy(&transfer.policy, x, &symmetric, rng),
        )?;
        rows.push(ScalabilityRow {
            experiment: "e3-scalability".into(),
            policy: "CPDRL-SC".into(),
            num_machines: n,
            budget,
            preset: spec.preset.to_string(),
            stay_prob: spec.stay_prob,
            cost_seed: spec.cost_seed,
            train_seed: seed,
            ggf: transfer_report.ggf_score,
            stderr: transfer_report.stderr,
            train_rollout_seconds_per_episode: 0.0,
            eval_seconds_per_trajectory: transfer_report.wall_seconds
                / transfer_report.trajectories_used as f64,
        });

        let wip = wip_report(spec, &instance, n)?;
        rows.push(ScalabilityRow {
            experiment: "e3-scalability".into(),
            policy: "WIP".into(),
            num_machines: n,
            budget,
            preset: spec.preset.to_string(),
            stay_prob: spec.stay_prob,
            cost_seed: spec.cost_seed,
            train_seed: seed,
            ggf: wip.ggf_score,
            stderr: wip.stderr,
            train_rollout_seconds_per_episode: 0.0,
            eval_seconds_per_trajectory: wip.wall_seconds / wip.trajectories_used as f64,
        });
    }
    Ok(rows)
}

/// Model sizes and wall times for one LP build/solve cycle.
#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyRow {
    pub experiment: String,
    pub model: String,
    pub num_machines: usize,
    pub constraint_count: usize,
    pub variable_count: usize,
    pub data_build_seconds: Option<f64>,
    pub build_seconds: Option<f64>,
    pub solve_seconds: Option<f64>,
    pub extract_seconds: Option<f64>,
    pub objective: Option<f64>,
}

/// Analytic sizes of the joint-model LP without building it:
/// `N² + S^N` constraints and `2N + |A_feasible| · S^N` variables.
pub fn ggf_lp_dimensions(n: usize, num_states: usize, budget: f64) -> (usize, usize) {
    // Binary actions, unit consumption: feasible tuples have at most
    // floor(budget) active entries.
    let b = budget.floor() as usize;
    let mut feasible = 0usize;
    for ones in 0..=b.min(n) {
        feasible += crate::count::binomial(n, ones);
    }
    let joint_states = num_states.pow(n as u32);
    (n * n + joint_states, 2 * n + feasible * joint_states)
}

/// Experiment 4: constraint/variable counts and build/solve/extract times
/// for the joint-model LP and the count-space LP as machines grow.
pub fn run_e4(spec: &ExperimentSpec) -> Result<Vec<EfficiencyRow>> {
    let machines = spec
        .machines
        .clone()
        .unwrap_or_else(|| (2..=spec.e4_max_machines).collect());
    let mut rows = Vec::new();
    for &n in &machines {
        let cfg = spec.machine_config(n, spec.budget);
        let instance = build_instance::<f64>(&cfg)?;
        if n <= spec.e4_joint_solve_max {
            let data_start = std::time::Instant::now();
            let joint = expand_joint(&instance, Some(u128::MAX))?;
            let data_build = data_start.elapsed().as_secs_f64();
            let (solution, stats) =
                solve_ggf_lp(&joint, &spec.weights(n), &SolveOptions::default())?;
            rows.push(EfficiencyRow {
                experiment: "e4-efficiency".into(),
                model: "ggf-lp".into(),
                num_machines: n,
                constraint_count: stats.constraint_count,
                variable_count: stats.variable_count,
                data_build_seconds: Some(data_build),
                build_seconds: Some(stats.build_seconds),
                solve_seconds: Some(stats.solve_seconds),
                extract_seconds: Some(stats.extract_seconds),
                objective: Some(solution.objective_value),
            });
        } else {
            // The product model outgrows the exact pipeline here; sizes are
            // still exact, computed from the closed forms.
            let (constraints, variables) = ggf_lp_dimensions(n, spec.num_states, spec.budget);
            rows.push(EfficiencyRow {
                experiment: "e4-efficiency".into(),
                model: "ggf-lp".into(),
                num_machines: n,
                constraint_count: constraints,
                variable_count: variables,
                data_build_seconds: None,
                build_seconds: None,
                solve_seconds: None,
                extract_seconds: None,
                objective: None,
            });
        }

        let data_start = std::time::Instant::now();
        let count = CountModel::build(&instance)?;
        let data_build = data_start.elapsed().as_secs_f64();
        let (solution, stats): (crate::lp::CountOccupancySolution<f64>, LpStats) =
            solve_count_dual_lp(&count, &SolveOptions::default())?;
        rows.push(EfficiencyRow {
            experiment: "e4-efficiency".into(),
            model: "count-dual-lp".into(),
            num_machines: n,
            constraint_count: stats.constraint_count,
            variable_count: stats.variable_count,
            data_build_seconds: Some(data_build),
            build_seconds: Some(stats.build_seconds),
            solve_seconds: Some(stats.solve_seconds),
            extract_seconds: Some(stats.extract_seconds),
            objective: Some(solution.objective_value),
        });
    }
    Ok(rows)
}

/// Serialize rows to CSV at `path`.
pub fn write_csv<R: Serialize>(rows: &[R], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Run the configured experiment, writing `<id>.csv` into `out_dir`.
/// Returns the CSV path.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = match spec.experiment {
        ExperimentId::Optimality => {
            let rows = run_e1(spec)?;
            let path = out_dir.join("e1-optimality.csv");
            write_csv(&rows, &path)?;
            path
        }
        ExperimentId::Flexibility => {
            let rows = run_e2(spec)?;
            let path = out_dir.join("e2-flexibility.csv");
            write_csv(&rows, &path)?;
            path
        }
        ExperimentId::Scalability => {
            let rows = run_e3(spec)?;
            let path = out_dir.join("e3-scalability.csv");
            write_csv(&rows, &path)?;
            path
        }
        ExperimentId::Efficiency => {
            let rows = run_e4(spec)?;
            let path = out_dir.join("e4-efficiency.csv");
            write_csv(&rows, &path)?;
            path
        }
    };
    Ok(path)
}

/// Helpers shared by the CLI `evaluate` subcommand.
pub mod evaluate {
    use super::*;
    use crate::cpdrl::Checkpoint;

    /// Evaluation report row for the `evaluate` CLI; column names follow
    /// the documented report schema.
    #[derive(Debug, Clone, Serialize)]
    pub struct EvaluateRow {
        pub policy: String,
        #[serde(rename = "N")]
        pub num_machines: usize,
        #[serde(rename = "S")]
        pub num_states: usize,
        pub budget: f64,
        pub ggf_score: f64,
        pub mean_value: f64,
        pub stderr: f64,
        pub seconds: f64,
    }

    pub fn evaluate_named_policy(
        instance: &WcmdpSpec<f64>,
        policy: &str,
        cfg: &EvalConfig<f64>,
    ) -> Result<EvaluateRow> {
        let n = instance.num_submdps();
        let report = match policy {
            "random" => {
                let mut rdm = RandomJointPolicy::new(instance);
                evaluate_joint_policy(instance, cfg, |_, rng| rdm.act(rng))?
            }
            "wip" => {
                let table = whittle_indices(instance.sub_mdp(0), instance.discount(), 1e-7)?;
                let budget = instance.budgets()[0];
                evaluate_joint_policy(instance, cfg, |state, _| wip_act(state, &table, budget))?
            }
            "lp" => {
                let joint = expand_joint(instance, None)?;
                let (solution, _) = solve_ggf_lp(&joint, &cfg.weights, &SolveOptions::default())?;
                let table = extract_policy(&solution.q, &joint);
                evaluate_joint_policy(instance, cfg, |state, rng| {
                    let idx = joint.encode_state(state);
                    let action = table.sample_action(idx, rng);
                    joint.feasible_actions()[action].clone()
                })?
            }
            other => {
                if let Some(path) = other.strip_prefix("cpdrl:") {
                    let checkpoint: Checkpoint<f64> = Checkpoint::load(std::path::Path::new(path))?;
                    let symmetric = SymmetricSpec::from_spec(instance)?;
                    evaluate_count_policy(&symmetric, cfg, |x, rng| {
                        cpdrl::act_greedy(&checkpoint.policy, x, &symmetric, rng)
                    })?
                } else {
                    return Err(Error::ConfigInvalid(format!(
                        "unknown policy `{other}` (expected random|wip|lp|cpdrl:CKPT)"
                    )));
                }
            }
        };
        let mean_value = report.mean_value_per_submdp.iter().sum::<f64>()
            / report.mean_value_per_submdp.len() as f64;
        Ok(EvaluateRow {
            policy: policy.into(),
            num_machines: n,
            num_states: instance.sub_mdp(0).num_states(),
            budget: instance.budgets().first().copied().unwrap_or(0.0),
            ggf_score: report.ggf_score,
            mean_value,
            stderr: report.stderr,
            seconds: report.wall_seconds,
        })
    }
}

/// Sanity used by tests and the CLI: regenerate an instance from a row's
/// metadata and confirm it matches.
pub fn regenerate_from_row(row: &ScoreRow) -> Result<WcmdpSpec<f64>> {
    let preset: Preset = row.preset.parse()?;
    let cfg = MachineReplacementConfig {
        num_machines: row.num_machines,
        num_states: row.num_states,
        stay_prob: row.stay_prob,
        reset_success: row.reset_success,
        operate_cost: preset.operate_cost_kind(),
        replace_cost: crate::instances::ReplaceCostKind::Rccc,
        budget: row.budget,
        discount: default_discount(),
        rng_seed: row.cost_seed,
    };
    build_instance(&cfg)
}

/// Round-trip an instance through its JSON schema; used by the `experiment`
/// CLI to persist the instance next to the CSVs.
pub fn persist_instance(
    spec: &ExperimentSpec,
    n: usize,
    out_dir: &Path,
) -> Result<std::path::PathBuf> {
    let cfg = spec.machine_config(n, spec.budget);
    let instance = build_instance::<f64>(&cfg)?;
    let path = out_dir.join(format!("instance-n{n}.json"));
    InstanceFile::from_spec(&instance, Some(cfg))?.save(&path)?;
    Ok(path)
}
