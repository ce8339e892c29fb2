//! Count-proportion policy learning with a clipped policy-gradient update.
//!
//! The actor maps `(x̄, b̄)` — count proportions and normalized budgets — to
//! priority scores and resource-use proportions; actions come out of the
//! priority sampler, so one network serves any machine count. Training rolls
//! out the count-space simulator, estimates advantages with a critic and
//! generalized advantage estimation, and maximizes the clipped surrogate
//! `min(ρ Â, clip(ρ, 1±ε) Â)` where the ratio replays the sampler's exact
//! path likelihood (categorical draws plus the Gaussian exploration noise on
//! the resource proportions).

pub mod net;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::count::{CountAction, CountState, SymmetricSpec};
use crate::error::{Error, Result};
use crate::sampler::{logprob_grad, sample_count_action, SampleTrace};
use crate::scalar::Scalar;
use crate::simulate::{evaluate_count_policy, step_count, EvalConfig};

pub use net::{
    Adam, CriticNet, Mlp, PolicyCache, PolicyNet, HIDDEN, PRIORITY_EPS, PROPORTION_MARGIN,
    RESOURCE_BIAS_INIT,
};

/// Training hyperparameters. Defaults follow the published setup where one
/// exists (layer sizes, learning rates, clip, discount); the rest are
/// ordinary policy-gradient defaults, all overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub episodes_per_update: usize,
    pub actor_lr: T,
    pub critic_lr: T,
    pub clip_ratio: T,
    pub discount: T,
    pub gae_lambda: T,
    pub update_epochs: usize,
    pub minibatches: usize,
    /// Stddev of the clipped-Gaussian exploration on resource proportions.
    pub explore_std: T,
    pub rng_seed: u64,
    /// Evaluate the greedy policy every this many episodes for the curve.
    pub eval_every: usize,
    /// Rollouts per learning-curve point.
    pub eval_rollouts: usize,
    /// Horizon for curve evaluations.
    pub eval_horizon: usize,
    /// Optional multitask roster as `(machine count, budget)` pairs; train
    /// with [`tasks_from_config`] to expand it against a base instance.
    pub multitask: Option<Vec<(usize, f64)>>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            episodes: 800,
            steps_per_episode: 100,
            episodes_per_update: 5,
            actor_lr: T::of(5e-4),
            critic_lr: T::of(3e-4),
            clip_ratio: T::of(0.2),
            discount: T::of(0.95),
            gae_lambda: T::of(0.95),
            update_epochs: 4,
            minibatches: 4,
            explore_std: T::of(0.1),
            rng_seed: 0,
            eval_every: 10,
            eval_rollouts: 100,
            eval_horizon: 300,
            multitask: None,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.steps_per_episode == 0 || self.episodes_per_update == 0 {
            return Err(Error::ConfigInvalid(
                "episode counts must be positive".into(),
            ));
        }
        if self.actor_lr <= T::zero() || self.critic_lr <= T::zero() {
            return Err(Error::ConfigInvalid(
                "learning rates must be positive".into(),
            ));
        }
        if self.clip_ratio <= T::zero() || self.clip_ratio >= T::one() {
            return Err(Error::ConfigInvalid("clip ratio outside (0, 1)".into()));
        }
        if self.update_epochs == 0 || self.minibatches == 0 {
            return Err(Error::ConfigInvalid(
                "update schedule must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Expand a base task into the configured multitask roster: the base task
/// first, then one task per `(machine count, budget)` pair, sharing the base
/// machines.
pub fn tasks_from_config<T: Scalar>(
    base: &SymmetricSpec<T>,
    cfg: &TrainConfig<T>,
) -> Vec<SymmetricSpec<T>> {
    let mut tasks = vec![base.clone()];
    if let Some(roster) = &cfg.multitask {
        for &(n, budget) in roster {
            tasks.push(base.with_num_submdps(n).with_budgets(vec![T::of(budget)]));
        }
    }
    tasks
}

/// Normalized budget inputs `b̄_k = b_k / (N · max_a d_k(a))`, clamped into
/// the unit interval (budgets beyond the per-step maximum are just slack).
pub fn normalized_budgets<T: Scalar>(spec: &SymmetricSpec<T>) -> Vec<T> {
    (0..spec.num_resources())
        .map(|k| {
            let ceiling = T::of_usize(spec.num_submdps()) * spec.max_consumption(k);
            if ceiling <= T::zero() {
                T::one()
            } else {
                (spec.budgets()[k] / ceiling).min(T::one())
            }
        })
        .collect()
}

fn policy_input<T: Scalar>(x: &CountState, b_bar: &[T]) -> Vec<T> {
    let mut input: Vec<T> = x.proportions();
    input.extend_from_slice(b_bar);
    input
}

/// One sampled action with everything needed to recompute its likelihood.
#[derive(Debug, Clone)]
pub struct ActStep<T> {
    pub action: CountAction,
    /// Full path log-probability: categorical draws plus Gaussian density.
    pub logprob: T,
    pub trace: SampleTrace<T>,
    /// Network input `(x̄, b̄)` at this step.
    pub input: Vec<T>,
    /// Pre-clip Gaussian samples for the resource proportions.
    pub gauss_sample: Vec<T>,
    pub count_state: CountState,
}

fn gaussian_logpdf<T: Scalar>(sample: T, mean: T, std: T) -> T {
    let z = (sample - mean) / std;
    let tau = T::of(2.0 * std::f64::consts::PI);
    -(z * z) / T::of(2.0) - (std * tau.sqrt()).ln()
}

/// Sample an action from the exploring policy: the resource proportions get
/// clipped-Gaussian noise whose pre-clip log-density joins the sampler's
/// path likelihood.
pub fn act<T: Scalar, R: Rng>(
    net: &PolicyNet<T>,
    x: &CountState,
    spec: &SymmetricSpec<T>,
    explore_std: T,
    rng: &mut R,
) -> Result<ActStep<T>> {
    let b_bar = normalized_budgets(spec);
    let input = policy_input(x, &b_bar);
    let (mut out, _) = net.forward(&input);
    let mut gauss_sample = Vec::with_capacity(out.resource_use.len());
    let mut gauss_logprob = T::zero();
    if explore_std > T::zero() {
        for mean in out.resource_use.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            let sample = *mean + explore_std * T::of(noise);
            gauss_logprob += gaussian_logpdf(sample, *mean, explore_std);
            gauss_sample.push(sample);
            *mean = sample.max(T::zero()).min(T::one());
        }
    }
    let trace = sample_count_action(x, &out, spec.budgets(), spec.consumption(), rng)?;
    Ok(ActStep {
        action: trace.action.clone(),
        logprob: trace.logprob + gauss_logprob,
        trace,
        input,
        gauss_sample,
        count_state: x.clone(),
    })
}

/// Greedy-proportion action for evaluation: no Gaussian noise on `p̃`, the
/// categorical sampling stays (it is the policy).
pub fn act_greedy<T: Scalar, R: Rng>(
    net: &PolicyNet<T>,
    x: &CountState,
    spec: &SymmetricSpec<T>,
    rng: &mut R,
) -> Result<CountAction> {
    let b_bar = normalized_budgets(spec);
    let input = policy_input(x, &b_bar);
    let (out, _) = net.forward(&input);
    let trace = sample_count_action(x, &out, spec.budgets(), spec.consumption(), rng)?;
    Ok(trace.action)
}

/// One transition prepared for the surrogate update.
#[derive(Debug, Clone)]
pub struct StepSample<T> {
    pub count_state: CountState,
    pub input: Vec<T>,
    pub trace: SampleTrace<T>,
    pub gauss_sample: Vec<T>,
    pub logprob_old: T,
    pub advantage: T,
    pub ret: T,
}

/// A collected batch plus the consumption table shared by its tasks.
#[derive(Debug, Clone)]
pub struct PpoBatch<T> {
    pub steps: Vec<StepSample<T>>,
}

/// Clipped-surrogate loss and its parameter gradient over a batch.
///
/// Returns `(loss, grad)` where `loss = -mean_i min(ρ_i Â_i, clip(ρ_i) Â_i)`
/// and the ratio replays each stored trace under the current parameters.
pub fn actor_loss_and_grad<T: Scalar>(
    net: &PolicyNet<T>,
    batch: &PpoBatch<T>,
    consumption: &[Vec<T>],
    clip_ratio: T,
    explore_std: T,
) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); net.mlp().params().len()];
    let mut loss = T::zero();
    let scale = T::one() / T::of_usize(batch.steps.len().max(1));
    for step in &batch.steps {
        let (out, cache) = net.forward(&step.input);
        let (cat_logprob, cat_grad) =
            logprob_grad(&step.count_state, &out.priorities, consumption, &step.trace)?;
        let mut logprob_new = cat_logprob;
        let mut d_gauss = vec![T::zero(); out.resource_use.len()];
        if explore_std > T::zero() {
            for (k, (&sample, &mean)) in step.gauss_sample.iter().zip(&out.resource_use).enumerate()
            {
                logprob_new += gaussian_logpdf(sample, mean, explore_std);
                d_gauss[k] = (sample - mean) / (explore_std * explore_std);
            }
        }
        let ratio = (logprob_new - step.logprob_old).exp();
        let adv = step.advantage;
        let clipped_out = (adv > T::zero() && ratio > T::one() + clip_ratio)
            || (adv < T::zero() && ratio < T::one() - clip_ratio);
        let surrogate = if clipped_out {
            let clipped = ratio.max(T::one() - clip_ratio).min(T::one() + clip_ratio);
            clipped * adv
        } else {
            ratio * adv
        };
        loss -= scale * surrogate;
        if !clipped_out {
            // d(-ρÂ)/d(logprob_new) = -Â ρ; chain into both heads.
            let d_logprob = -scale * adv * ratio;
            let d_priorities: Vec<T> = cat_grad.iter().map(|&g| d_logprob * g).collect();
            let d_means: Vec<T> = d_gauss.iter().map(|&g| d_logprob * g).collect();
            net.backward(&cache, &d_priorities, &d_means, &mut grad);
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            update: 0,
            detail: format!("actor loss {loss}"),
        });
    }
    Ok((loss, grad))
}

/// Mean squared error of the critic against the stored returns.
pub fn critic_loss_and_grad<T: Scalar>(critic: &CriticNet<T>, batch: &PpoBatch<T>) -> (T, Vec<T>) {
    let mut grad = vec![T::zero(); critic.mlp().params().len()];
    let mut loss = T::zero();
    let scale = T::one() / T::of_usize(batch.steps.len().max(1));
    for step in &batch.steps {
        let (value, cache) = critic.value_with_cache(&step.input);
        let err = value - step.ret;
        loss += scale * err * err;
        critic.backward(&cache, T::of(2.0) * scale * err, &mut grad);
    }
    (loss, grad)
}

/// One point of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub episode: usize,
    pub eval_ggf: T,
    pub stderr: T,
}

/// Trained networks plus the evaluation curve and rollout timing.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub policy: PolicyNet<T>,
    pub critic: CriticNet<T>,
    pub curve: Vec<CurvePoint<T>>,
    /// Wall seconds spent collecting trajectories (the O(N) part of
    /// training), excluding parameter updates and curve evaluations.
    pub rollout_seconds: f64,
    pub episodes_run: usize,
}

struct Episode<T> {
    steps: Vec<ActStep<T>>,
    rewards: Vec<T>,
    values: Vec<T>,
    bootstrap: T,
}

fn collect_episode<T: Scalar>(
    net: &PolicyNet<T>,
    critic: &CriticNet<T>,
    spec: &SymmetricSpec<T>,
    cfg: &TrainConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Episode<T>> {
    let sub = spec.sub();
    let n = spec.num_submdps();
    let mut counts = vec![0usize; sub.num_states()];
    for _ in 0..n {
        let mut draw = T::of(rng.random::<f64>());
        let mut state = sub.num_states() - 1;
        for (s, &p) in sub.initial().iter().enumerate() {
            draw -= p;
            if draw < T::zero() {
                state = s;
                break;
            }
        }
        counts[state] += 1;
    }
    let mut x = CountState::new(counts);
    let mut steps = Vec::with_capacity(cfg.steps_per_episode);
    let mut rewards = Vec::with_capacity(cfg.steps_per_episode);
    let mut values = Vec::with_capacity(cfg.steps_per_episode);
    for _ in 0..cfg.steps_per_episode {
        let step = act(net, &x, spec, cfg.explore_std, rng)?;
        let (next, reward) = step_count(&x, &step.action, spec, rng)?;
        values.push(critic.value(&step.input));
        rewards.push(reward);
        steps.push(step);
        x = next;
    }
    let b_bar = normalized_budgets(spec);
    let bootstrap = critic.value(&policy_input(&x, &b_bar));
    Ok(Episode {
        steps,
        rewards,
        values,
        bootstrap,
    })
}

fn episode_to_samples<T: Scalar>(episode: Episode<T>, cfg: &TrainConfig<T>) -> Vec<StepSample<T>> {
    let horizon = episode.rewards.len();
    let mut advantages = vec![T::zero(); horizon];
    let mut next_adv = T::zero();
    for t in (0..horizon).rev() {
        let next_value = if t + 1 < horizon {
            episode.values[t + 1]
        } else {
            episode.bootstrap
        };
        let delta = episode.rewards[t] + cfg.discount * next_value - episode.values[t];
        next_adv = delta + cfg.discount * cfg.gae_lambda * next_adv;
        advantages[t] = next_adv;
    }
    episode
        .steps
        .into_iter()
        .zip(advantages)
        .zip(episode.values)
        .map(|((step, advantage), value)| StepSample {
            count_state: step.count_state,
            input: step.input,
            trace: step.trace,
            gauss_sample: step.gauss_sample,
            logprob_old: step.logprob,
            advantage,
            ret: advantage + value,
        })
        .collect()
}

/// Train the count-proportion policy on one or more tasks (multitask
/// training switches the active task uniformly at episode boundaries).
/// Curve points evaluate the greedy policy on the first task.
pub fn train<T: Scalar>(
    tasks: &[SymmetricSpec<T>],
    cfg: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::ConfigInvalid("need at least one task".into()));
    }
    let s_count = tasks[0].sub().num_states();
    let a_count = tasks[0].sub().num_actions();
    let k_count = tasks[0].num_resources();
    for task in tasks {
        if task.sub().num_states() != s_count
            || task.sub().num_actions() != a_count
            || task.num_resources() != k_count
        {
            return Err(Error::ConfigInvalid(
                "multitask specs must share state, action, and resource counts".into(),
            ));
        }
    }
    let consumption = tasks[0].consumption().to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut policy = PolicyNet::new(s_count, a_count, k_count, &mut rng);
    let mut critic = CriticNet::new(s_count + k_count, &mut rng);
    let mut actor_opt = Adam::new(policy.mlp().params().len());
    let mut critic_opt = Adam::new(critic.mlp().params().len());

    let mut curve = Vec::new();
    let mut episodes_done = 0usize;
    let mut next_eval = cfg.eval_every;
    let mut update_index = 0usize;
    let mut rollout_seconds = 0.0f64;

    while episodes_done < cfg.episodes {
        let batch_episodes = cfg.episodes_per_update.min(cfg.episodes - episodes_done);
        let mut steps = Vec::new();
        let rollout_start = std::time::Instant::now();
        for _ in 0..batch_episodes {
            let task = &tasks[rng.random_range(0..tasks.len())];
            let episode = collect_episode(&policy, &critic, task, cfg, &mut rng)?;
            steps.extend(episode_to_samples(episode, cfg));
        }
        rollout_seconds += rollout_start.elapsed().as_secs_f64();
        episodes_done += batch_episodes;

        // Batch advantage normalization.
        let m = T::of_usize(steps.len());
        let mean: T = steps.iter().map(|s| s.advantage).sum::<T>() / m;
        let var: T = steps
            .iter()
            .map(|s| (s.advantage - mean) * (s.advantage - mean))
            .sum::<T>()
            / m;
        let std = var.sqrt().max(T::of(1e-8));
        for s in &mut steps {
            s.advantage = (s.advantage - mean) / std;
        }

        let mut order: Vec<usize> = (0..steps.len()).collect();
        for _ in 0..cfg.update_epochs {
            order.shuffle(&mut rng);
            let chunk = steps.len().div_ceil(cfg.minibatches);
            for mb in order.chunks(chunk) {
                let batch = PpoBatch {
                    steps: mb.iter().map(|&i| steps[i].clone()).collect(),
                };
                let (actor_loss, actor_grad) = actor_loss_and_grad(
                    &policy,
                    &batch,
                    &consumption,
                    cfg.clip_ratio,
                    cfg.explore_std,
                )
                .map_err(|e| match e {
                    Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss {
                        update: update_index,
                        detail,
                    },
                    other => other,
                })?;
                let (critic_loss, critic_grad) = critic_loss_and_grad(&critic, &batch);
                if !actor_loss.is_finite() || !critic_loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        update: update_index,
                        detail: format!("actor {actor_loss}, critic {critic_loss}"),
                    });
                }
                actor_opt.step(policy.mlp_mut().params_mut(), &actor_grad, cfg.actor_lr);
                critic_opt.step(critic.mlp_mut().params_mut(), &critic_grad, cfg.critic_lr);
                update_index += 1;
            }
        }

        if episodes_done >= next_eval || episodes_done >= cfg.episodes {
            let point = evaluate_curve_point(&policy, &tasks[0], cfg, episodes_done)?;
            curve.push(point);
            while next_eval <= episodes_done {
                next_eval += cfg.eval_every;
            }
        }
    }

    Ok(TrainOutcome {
        policy,
        critic,
        curve,
        rollout_seconds,
        episodes_run: episodes_done,
    })
}

fn evaluate_curve_point<T: Scalar>(
    policy: &PolicyNet<T>,
    spec: &SymmetricSpec<T>,
    cfg: &TrainConfig<T>,
    episode: usize,
) -> Result<CurvePoint<T>> {
    let weights = crate::fairness::GgfWeights::exponential(spec.num_submdps(), T::of(2.0));
    let eval_cfg = EvalConfig::new(
        cfg.eval_rollouts,
        cfg.eval_horizon,
        cfg.discount,
        cfg.rng_seed ^ 0x9e37_79b9_7f4a_7c15,
        weights,
    );
    let report = evaluate_count_policy(spec, &eval_cfg, |x, rng| act_greedy(policy, x, spec, rng))?;
    Ok(CurvePoint {
        episode,
        eval_ggf: report.ggf_score,
        stderr: report.stderr,
    })
}

/// Serializable snapshot of a trained policy (and critic) with its training
/// configuration and instance provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub version: u32,
    pub num_states: usize,
    pub num_actions: usize,
    pub num_resources: usize,
    pub policy: PolicyNet<T>,
    pub critic: CriticNet<T>,
    pub config: TrainConfig<T>,
    /// Free-form instance metadata (generator config, seeds).
    pub instance: Option<serde_json::Value>,
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> Checkpoint<T> {
    pub fn new(
        outcome: &TrainOutcome<T>,
        config: TrainConfig<T>,
        instance: Option<serde_json::Value>,
    ) -> Self {
        Self {
            version: 1,
            num_states: outcome.policy.num_states(),
            num_actions: outcome.policy.num_actions(),
            num_resources: outcome.policy.num_resources(),
            policy: outcome.policy.clone(),
            critic: outcome.critic.clone(),
            config,
            instance,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}
