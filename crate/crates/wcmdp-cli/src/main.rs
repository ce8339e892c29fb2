//! Command-line harness for the weakly coupled MDP toolkit: generate
//! benchmark instances, print Whittle index tables, evaluate policies by
//! Monte Carlo, train the count-proportion policy, export LPs as MPS, and
//! run the experiment suites.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use wcmdp::baselines::whittle_indices;
use wcmdp::count::{CountModel, SymmetricSpec};
use wcmdp::cpdrl::{self, Checkpoint, TrainConfig};
use wcmdp::experiments::{self, evaluate::evaluate_named_policy, ExperimentId, ExperimentSpec};
use wcmdp::fairness::GgfWeights;
use wcmdp::fileio::{load_instance, save_instance};
use wcmdp::instances::{build_instance, MachineReplacementConfig, Preset};
use wcmdp::lp::{build_count_dual_lp, build_ggf_lp, mps::write_mps};
use wcmdp::model::expand_joint;
use wcmdp::simulate::EvalConfig;

#[derive(Parser)]
#[command(
    name = "wcmdp",
    version,
    about = "Fair resource allocation in weakly coupled MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a machine-replacement instance file.
    GenerateInstance {
        #[arg(long)]
        machines: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value = "exponential-rccc")]
        preset: String,
        #[arg(long, default_value_t = 0.8)]
        stay_prob: f64,
        #[arg(long, default_value_t = 1.0)]
        reset_success: f64,
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-state Whittle index table as CSV.
    Whittle {
        #[arg(long)]
        instance: PathBuf,
        /// Discount override; defaults to the instance's discount.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Monte Carlo evaluation of a named policy.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        /// random | wip | lp | cpdrl:CHECKPOINT
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 1000)]
        trajectories: usize,
        #[arg(long, default_value_t = 300)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        weights_factor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the count-proportion policy and write a checkpoint plus the
    /// learning curve.
    TrainCpdrl {
        #[arg(long)]
        instance: PathBuf,
        /// Extra tasks as `N:b,N:b,...`; training switches tasks per episode.
        #[arg(long)]
        multitask: Option<String>,
        #[arg(long, default_value_t = 800)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        steps_per_episode: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        eval_every: usize,
        #[arg(long, default_value_t = 100)]
        eval_rollouts: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run one of the experiment suites from a JSON config.
    Experiment {
        /// e1 | e2 | e3 | e4 (aliases for the full ids).
        id: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a built LP in fixed MPS format for external cross-validation.
    ExportMps {
        #[arg(long)]
        instance: PathBuf,
        /// ggf | count
        #[arg(long, default_value = "ggf")]
        model: String,
        #[arg(long, default_value_t = 2.0)]
        weights_factor: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        // Machine-readable error report on stderr, nonzero exit.
        let report = serde_json::json!({
            "status": "error",
            "error": error.to_string(),
            "chain": error.chain().map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        eprintln!("{report}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenerateInstance {
            machines,
            states,
            preset,
            stay_prob,
            reset_success,
            budget,
            discount,
            seed,
            out,
        } => {
            let preset: Preset = preset.parse()?;
            let cfg = MachineReplacementConfig {
                num_machines: machines,
                num_states: states,
                stay_prob,
                reset_success,
                operate_cost: preset.operate_cost_kind(),
                replace_cost: wcmdp::instances::ReplaceCostKind::Rccc,
                budget,
                discount,
                rng_seed: seed,
            };
            let spec = build_instance::<f64>(&cfg)?;
            save_instance(&spec, Some(cfg), &out)?;
            println!("wrote {}", out.display());
        }
        Command::Whittle {
            instance,
            gamma,
            tol,
        } => {
            let (spec, _) = load_instance(&instance)?;
            let gamma = gamma.unwrap_or_else(|| spec.discount());
            let table = whittle_indices(spec.sub_mdp(0), gamma, tol)?;
            println!("state,index,indexable");
            for (s, idx) in table.index.iter().enumerate() {
                println!("{},{:.10},{}", s + 1, idx, table.indexable);
            }
        }
        Command::Evaluate {
            instance,
            policy,
            trajectories,
            horizon,
            seed,
            weights_factor,
            out,
        } => {
            let (spec, _) = load_instance(&instance)?;
            let weights = GgfWeights::exponential(spec.num_submdps(), weights_factor);
            let cfg = EvalConfig::new(trajectories, horizon, spec.discount(), seed, weights);
            let row = evaluate_named_policy(&spec, &policy, &cfg)?;
            experiments::write_csv(std::slice::from_ref(&row), &out)?;
            println!(
                "{}: ggf {:.6} ± {:.6} ({} trajectories) -> {}",
                row.policy,
                row.ggf_score,
                row.stderr,
                trajectories,
                out.display()
            );
        }
        Command::TrainCpdrl {
            instance,
            multitask,
            episodes,
            steps_per_episode,
            seed,
            eval_every,
            eval_rollouts,
            out,
            curve,
        } => {
            let (spec, metadata) = load_instance(&instance)?;
            let base = SymmetricSpec::from_spec(&spec)?;
            let roster = multitask
                .map(|text| {
                    text.split(',')
                        .filter(|p| !p.is_empty())
                        .map(|part| {
                            let (n, b) = part
                                .split_once(':')
                                .with_context(|| format!("multitask entry `{part}` is not N:b"))?;
                            Ok((n.trim().parse::<usize>()?, b.trim().parse::<f64>()?))
                        })
                        .collect::<anyhow::Result<Vec<_>>>()
                })
                .transpose()?;
            let cfg = TrainConfig::<f64> {
                episodes,
                steps_per_episode,
                rng_seed: seed,
                eval_every,
                eval_rollouts,
                discount: spec.discount(),
                multitask: roster,
                ..TrainConfig::default()
            };
            let tasks = cpdrl::tasks_from_config(&base, &cfg);
            let outcome = cpdrl::train(&tasks, &cfg)?;
            let instance_meta = metadata.map(serde_json::to_value).transpose()?;
            Checkpoint::new(&outcome, cfg, instance_meta).save(&out)?;
            println!("wrote checkpoint {}", out.display());
            if let Some(curve_path) = curve {
                experiments::write_csv(&outcome.curve, &curve_path)?;
                println!("wrote curve {}", curve_path.display());
            }
            if let Some(last) = outcome.curve.last() {
                println!("final eval ggf {:.6} ± {:.6}", last.eval_ggf, last.stderr);
            }
        }
        Command::Experiment { id, config, out } => {
            let experiment: ExperimentId = id.parse()?;
            let spec = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let mut value: serde_json::Value = serde_json::from_str(&text)?;
                    let obj = value
                        .as_object_mut()
                        .context("experiment config must be a JSON object")?;
                    obj.insert("experiment".into(), serde_json::to_value(experiment)?);
                    serde_json::from_value::<ExperimentSpec>(value)?
                }
                None => ExperimentSpec::new(experiment),
            };
            let csv = experiments::run_experiment(&spec, &out)?;
            println!("wrote {}", csv.display());
        }
        Command::ExportMps {
            instance,
            model,
            weights_factor,
            out,
        } => {
            let (spec, _) = load_instance(&instance)?;
            let mut file = std::fs::File::create(&out)?;
            match model.as_str() {
                "ggf" => {
                    let joint = expand_joint(&spec, None)?;
                    let weights = GgfWeights::exponential(spec.num_submdps(), weights_factor);
                    let lp = build_ggf_lp(&joint, &weights);
                    write_mps(&lp, "GGFLP", &mut file)?;
                }
                "count" => {
                    let count = CountModel::build(&spec)?;
                    let lp = build_count_dual_lp(&count);
                    write_mps(&lp, "COUNTDLP", &mut file)?;
                }
                other => bail!("unknown model `{other}` (expected ggf|count)"),
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
