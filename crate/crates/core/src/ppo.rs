//! PPO corrector producing the bias command.
//!
//! The actor is a 5-64-64-1 ReLU network with a tanh output scaled by `a_max`
//! giving the Gaussian mean; a single trainable log standard deviation is
//! shared by all states. The critic is a 5-64-64-1 ReLU network with a linear
//! output. Rewards are dense: the predicted time-to-go turns the impact-time
//! constraint into a per-step impact-time error.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use libm::{exp, log, sqrt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{Engagement, Outcome, Simulator, VehicleState};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Mlp};
use crate::scenario::{stream_rng, EngagementConfig};
use crate::tgo::{Normalizer, TgoPredictor};

pub const POLICY_LAYERS: [usize; 4] = [5, 64, 64, 1];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma_discount: f64,
    pub buffer_size: usize,
    /// Maximum guidance steps per episode.
    pub t_max_steps: usize,
    pub max_episodes: usize,
    /// Weights of the impact-time, range and altitude rewards.
    pub reward_weights: [f64; 3],
    /// Impact-time error normaliser, s.
    pub eps_hat: f64,
    /// Range normaliser of the second reward, m.
    pub r_bar: f64,
    /// Altitude-offset normaliser of the third reward, m.
    pub sigma_alt: f64,
    /// Bias command bound, m/s².
    pub a_max: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub log_std_init: f64,
    /// Scale applied to the initial actor output-layer weights.
    pub actor_output_gain: f64,
    /// Lower bound on the time-to-go dividing the impact-time error, s.
    pub tgo_floor: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        let a_max = 3.0 * 9.81;
        Self {
            clip_eps: 0.2,
            actor_lr: 1e-4,
            critic_lr: 2e-4,
            gamma_discount: 0.995,
            buffer_size: 256,
            t_max_steps: 400,
            max_episodes: 500,
            reward_weights: [0.9, 0.09, 0.01],
            eps_hat: 2.0,
            r_bar: 1.6e4,
            sigma_alt: 115.0,
            a_max,
            epochs: 10,
            minibatch: 64,
            log_std_init: log(0.3 * a_max),
            actor_output_gain: 0.001,
            tgo_floor: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma_discount > 0.0 && self.gamma_discount <= 1.0) {
            return fail("gamma_discount must lie in (0, 1]");
        }
        if (self.reward_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.reward_weights.iter().any(|w| !(*w >= 0.0))
        {
            return fail("reward weights must be non-negative and sum to 1");
        }
        if self.buffer_size == 0 || self.minibatch == 0 || self.epochs == 0 {
            return fail("buffer size, minibatch and epochs must be positive");
        }
        let positive = [
            self.actor_lr,
            self.critic_lr,
            self.eps_hat,
            self.r_bar,
            self.sigma_alt,
            self.a_max,
            self.tgo_floor,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || !self.log_std_init.is_finite()
            || !(self.actor_output_gain >= 0.0 && self.actor_output_gain.is_finite())
        {
            return fail("learning rates, normalisers, a_max and tgo_floor must be positive");
        }
        Ok(())
    }
}

/// Normalised agent input `(v, γ, x, y, ε_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlState(pub [f64; 5]);

impl RlState {
    pub fn eps_n(&self) -> f64 {
        self.0[4]
    }
}

/// Agent observation along with the raw quantities it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub state: RlState,
    /// Impact-time error `t_d - (t + t̂_go)`, s.
    pub eps_t: f64,
    pub tgo_hat: f64,
}

fn normalized_state(
    s: &VehicleState,
    normalizer: &Normalizer,
    eps_t: f64,
    eps_hat: f64,
) -> RlState {
    let n = normalizer.normalize(s.speed, s.gamma, s.x, s.y);
    RlState([n[0], n[1], n[2], n[3], eps_t / eps_hat])
}

/// Observation of `state` with the predictor estimating the remaining PNG flight time.
pub fn make_state(
    state: &VehicleState,
    t_d: f64,
    predictor: &TgoPredictor,
    eps_hat: f64,
) -> Observation {
    let tgo_hat = predictor.predict_state(state);
    let eps_t = t_d - (state.time + tgo_hat);
    Observation {
        state: normalized_state(state, &predictor.normalizer, eps_t, eps_hat),
        eps_t,
        tgo_hat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub impact_time: f64,
    pub range: f64,
    pub altitude: f64,
    pub total: f64,
}

/// Weighted sum of the impact-time, range and altitude rewards.
pub fn reward(
    state: &VehicleState,
    engagement: &Engagement,
    eps_t: f64,
    tgo_hat: f64,
    cfg: &PpoConfig,
) -> RewardTerms {
    let eps_r = eps_t / tgo_hat.max(cfg.tgo_floor);
    let range = libm::hypot(engagement.target_x - state.x, engagement.target_y - state.y);
    // exp(-708) is still a normal f64, so r1 never underflows to zero.
    let r1 = exp(-(eps_r * eps_r).min(708.0));
    let r2 = exp(-range / cfg.r_bar);
    let dz = (state.y - range) / cfg.sigma_alt;
    let r3 = exp(-dz * dz);
    let [a1, a2, a3] = cfg.reward_weights;
    RewardTerms {
        impact_time: r1,
        range: r2,
        altitude: r3,
        total: a1 * r1 + a2 * r2 + a3 * r3,
    }
}

/// Gaussian policy whose mean is `a_max · tanh(net(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    /// Unclamped Gaussian draw; the likelihood refers to this value.
    pub raw: f64,
    /// Draw clamped to `[-a_max, a_max]`, the bias actually applied.
    pub action: f64,
    pub log_prob: f64,
    pub mean: f64,
}

pub fn gaussian_log_prob(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) / exp(log_std);
    -0.5 * z * z - log_std - 0.5 * log(2.0 * PI)
}

impl GaussianPolicy {
    pub fn new(rng: &mut ChaCha8Rng, log_std: f64) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(&POLICY_LAYERS, Activation::Tanh, rng)?,
            log_std,
        })
    }

    pub fn mean_action(&self, state: &RlState, a_max: f64) -> f64 {
        a_max * self.net.forward(&state.0).expect("policy has five inputs")[0]
    }
}

pub fn sample_action<R: Rng + ?Sized>(
    actor: &GaussianPolicy,
    state: &RlState,
    a_max: f64,
    rng: &mut R,
) -> ActionSample {
    let mean = actor.mean_action(state, a_max);
    let noise: f64 = StandardNormal.sample(rng);
    let raw = mean + exp(actor.log_std) * noise;
    ActionSample {
        raw,
        action: raw.clamp(-a_max, a_max),
        log_prob: gaussian_log_prob(raw, mean, actor.log_std),
        mean,
    }
}

/// Mean action, used by every evaluation rollout.
pub fn act_deterministic(actor: &GaussianPolicy, state: &RlState, a_max: f64) -> f64 {
    actor.mean_action(state, a_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: RlState,
    /// Pre-clamp policy draw.
    pub action: f64,
    pub log_prob: f64,
    pub reward: f64,
    pub next_state: RlState,
    /// Terminal: hit or ground impact. No bootstrapping past it.
    pub done: bool,
    /// Episode cut by the step limit or a timeout; bootstraps from the critic.
    pub truncated: bool,
}

pub fn critic_values(critic: &Mlp, states: impl Iterator<Item = RlState>) -> Result<Vec<f64>> {
    let inputs: Vec<f64> = states.flat_map(|s| s.0).collect();
    let n = inputs.len() / 5;
    Ok(critic.forward_batch(&inputs, n)?.output().to_vec())
}

/// Discounted returns and standardised advantages `return - V(s)`.
///
/// Returns never cross a `done` flag; truncated transitions and a last
/// transition whose episode continues past the buffer bootstrap from `V(s')`.
pub fn compute_advantages(
    buffer: &[Transition],
    critic: &Mlp,
    cfg: &PpoConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if buffer.is_empty() {
        return Err(Error::Dataset("empty experience buffer".into()));
    }
    let values = critic_values(critic, buffer.iter().map(|t| t.state))?;
    let next_values = critic_values(critic, buffer.iter().map(|t| t.next_state))?;
    let returns = discounted_returns(buffer, &next_values, cfg.gamma_discount);
    let mut adv: Vec<f64> = returns.iter().zip(&values).map(|(g, v)| g - v).collect();
    standardize(&mut adv);
    Ok((adv, returns))
}

pub(crate) fn discounted_returns(
    buffer: &[Transition],
    next_values: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let mut returns = vec![0.0; buffer.len()];
    let mut running = 0.0;
    for i in (0..buffer.len()).rev() {
        let t = &buffer[i];
        running = if t.done {
            t.reward
        } else if t.truncated || i + 1 == buffer.len() {
            t.reward + gamma * next_values[i]
        } else {
            t.reward + gamma * running
        };
        returns[i] = running;
    }
    returns
}

fn standardize(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = sqrt(var);
    for x in xs.iter_mut() {
        *x = (*x - mean) / (std + 1e-8);
    }
}

/// Coefficient `clip(r, 1 - ε, 1 + ε)`.
pub fn clipped_ratio(ratio: f64, clip_eps: f64) -> f64 {
    ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps)
}

/// Mean clipped surrogate `(1/N) Σ min(r A, clip(r) A)`.
pub fn surrogate_objective(
    actor: &GaussianPolicy,
    batch: &[Transition],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> Result<f64> {
    let means = policy_means(actor, batch, cfg.a_max)?;
    let mut total = 0.0;
    for ((t, &a), &mu) in batch.iter().zip(advantages).zip(&means) {
        let ratio = exp(gaussian_log_prob(t.action, mu, actor.log_std) - t.log_prob);
        total += (ratio * a).min(clipped_ratio(ratio, cfg.clip_eps) * a);
    }
    Ok(total / batch.len() as f64)
}

fn policy_means(actor: &GaussianPolicy, batch: &[Transition], a_max: f64) -> Result<Vec<f64>> {
    let inputs: Vec<f64> = batch.iter().flat_map(|t| t.state.0).collect();
    let cache = actor.net.forward_batch(&inputs, batch.len())?;
    Ok(cache.output().iter().map(|y| a_max * y).collect())
}

/// Gradient of the surrogate objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGradient {
    pub objective: f64,
    pub net: Vec<f64>,
    pub log_std: f64,
    pub clipped: usize,
    pub ratio_sum: f64,
}

pub fn surrogate_gradient(
    actor: &GaussianPolicy,
    batch: &[Transition],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> Result<SurrogateGradient> {
    let inputs: Vec<f64> = batch.iter().flat_map(|t| t.state.0).collect();
    let cache = actor.net.forward_batch(&inputs, batch.len())?;
    let n = batch.len() as f64;
    let var = exp(2.0 * actor.log_std);
    let mut objective = 0.0;
    let mut grad_out = vec![0.0; batch.len()];
    let mut grad_log_std = 0.0;
    let mut clipped = 0;
    let mut ratio_sum = 0.0;
    for (k, (t, &a)) in batch.iter().zip(advantages).enumerate() {
        let mu = cfg.a_max * cache.output()[k];
        let ratio = exp(gaussian_log_prob(t.action, mu, actor.log_std) - t.log_prob);
        ratio_sum += ratio;
        let unclipped = ratio * a;
        objective += unclipped.min(clipped_ratio(ratio, cfg.clip_eps) * a);
        let active = if a >= 0.0 {
            ratio <= 1.0 + cfg.clip_eps
        } else {
            ratio >= 1.0 - cfg.clip_eps
        };
        if !active {
            clipped += 1;
            continue;
        }
        // d/dθ (r A) = r A d log π / dθ
        let coef = ratio * a / n;
        let d = t.action - mu;
        grad_out[k] = coef * d / var * cfg.a_max;
        grad_log_std += coef * (d * d / var - 1.0);
    }
    let net = actor.net.backward(&cache, &grad_out)?;
    Ok(SurrogateGradient {
        objective: objective / n,
        net,
        log_std: grad_log_std,
        clipped,
        ratio_sum,
    })
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoAgent {
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub actor_opt: AdamState,
    pub log_std_opt: AdamState,
    pub critic_opt: AdamState,
}

impl PpoAgent {
    pub fn new(cfg: &PpoConfig, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0x5eed);
        let mut actor = GaussianPolicy::new(&mut rng, cfg.log_std_init)?;
        actor.net.scale_output_layer(cfg.actor_output_gain);
        let critic = Mlp::new(&POLICY_LAYERS, Activation::Identity, &mut rng)?;
        Ok(Self {
            actor_opt: AdamState::new(actor.net.n_params(), cfg.actor_lr),
            log_std_opt: AdamState::new(1, cfg.actor_lr),
            critic_opt: AdamState::new(critic.n_params(), cfg.critic_lr),
            actor,
            critic,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    /// Largest `|r - 1|` over the buffer before the first gradient step.
    pub initial_ratio_deviation: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub skipped_minibatches: usize,
}

/// `epochs` passes of shuffled minibatch ADAM on the clipped surrogate (ascent)
/// and the squared return error of the critic (descent).
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut PpoAgent,
    buffer: &[Transition],
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateDiagnostics> {
    if buffer.len() != advantages.len() || buffer.len() != returns.len() {
        return Err(Error::Shape {
            expected: buffer.len(),
            actual: advantages.len().min(returns.len()),
        });
    }
    let mut diag = UpdateDiagnostics::default();
    let means = policy_means(&agent.actor, buffer, cfg.a_max)?;
    for (t, mu) in buffer.iter().zip(&means) {
        let r = exp(gaussian_log_prob(t.action, *mu, agent.actor.log_std) - t.log_prob);
        diag.initial_ratio_deviation = diag.initial_ratio_deviation.max((r - 1.0).abs());
    }
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let (mut ratio_sum, mut clipped, mut seen, mut batches) = (0.0, 0usize, 0usize, 0usize);
    let (mut objective_sum, mut critic_sum) = (0.0, 0.0);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<Transition> = chunk.iter().map(|&i| buffer[i]).collect();
            let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
            let ret: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();

            let sg = surrogate_gradient(&agent.actor, &batch, &adv, cfg)?;
            let (critic_loss, critic_cache, critic_grad_out) = {
                let inputs: Vec<f64> = batch.iter().flat_map(|t| t.state.0).collect();
                let cache = agent.critic.forward_batch(&inputs, batch.len())?;
                let n = batch.len() as f64;
                let mut loss = 0.0;
                let grad: Vec<f64> = cache
                    .output()
                    .iter()
                    .zip(&ret)
                    .map(|(v, g)| {
                        loss += (g - v) * (g - v) / n;
                        -2.0 * (g - v) / n
                    })
                    .collect();
                (loss, cache, grad)
            };
            if !sg.objective.is_finite() || !critic_loss.is_finite() {
                diag.skipped_minibatches += 1;
                continue;
            }
            // ascend the surrogate: hand the optimizer the negated gradient
            let actor_grad: Vec<f64> = sg.net.iter().map(|g| -g).collect();
            let critic_grad = agent.critic.backward(&critic_cache, &critic_grad_out)?;
            if agent
                .actor
                .net
                .adam_step(&actor_grad, &mut agent.actor_opt)
                .is_err()
                || agent
                    .critic
                    .adam_step(&critic_grad, &mut agent.critic_opt)
                    .is_err()
            {
                diag.skipped_minibatches += 1;
                continue;
            }
            let mut log_std = [agent.actor.log_std];
            agent.log_std_opt.step(&mut log_std, &[-sg.log_std])?;
            agent.actor.log_std = log_std[0];

            ratio_sum += sg.ratio_sum;
            clipped += sg.clipped;
            seen += batch.len();
            objective_sum += sg.objective;
            critic_sum += critic_loss;
            batches += 1;
        }
    }
    if seen > 0 {
        diag.mean_ratio = ratio_sum / seen as f64;
        diag.clip_fraction = clipped as f64 / seen as f64;
        diag.actor_objective = objective_sum / batches as f64;
        diag.critic_loss = critic_sum / batches as f64;
    }
    Ok(diag)
}

/// Shifts the critic output bias by the mean return of the first buffer so the
/// first advantages are not dominated by the return scale.
fn warm_start_critic(critic: &mut Mlp, buffer: &[Transition], cfg: &PpoConfig) -> Result<()> {
    let (_, returns) = compute_advantages(buffer, critic, cfg)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let last = critic.n_params() - 1;
    critic.params_mut()[last] += mean;
    Ok(())
}

/// Reward signal used during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardModel {
    /// Dense shaped reward driven by the predicted time-to-go.
    Shaped,
    /// No predictor: reward 1 only when the episode ends in a hit within
    /// `tolerance` seconds of the desired time; the observed error is the
    /// remaining desired time `t_d - t`.
    TerminalOnly { tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub total_reward: f64,
    pub steps: usize,
    pub outcome: Outcome,
    pub t_d: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub agent: PpoAgent,
    pub history: Vec<EpisodeLog>,
    pub updates: Vec<UpdateDiagnostics>,
    pub total_transitions: usize,
}

/// Engagement environment seen by the agent.
#[derive(Debug, Clone, Copy)]
pub struct CorrectorEnv<'a> {
    pub simulator: &'a Simulator,
    pub predictor: &'a TgoPredictor,
    pub cfg: &'a PpoConfig,
    pub reward_model: RewardModel,
}

impl<'a> CorrectorEnv<'a> {
    pub fn observe(&self, state: &VehicleState, t_d: f64) -> Observation {
        match self.reward_model {
            RewardModel::Shaped => make_state(state, t_d, self.predictor, self.cfg.eps_hat),
            RewardModel::TerminalOnly { .. } => {
                let eps_t = t_d - state.time;
                Observation {
                    state: normalized_state(
                        state,
                        &self.predictor.normalizer,
                        eps_t,
                        self.cfg.eps_hat,
                    ),
                    eps_t,
                    tgo_hat: 0.0,
                }
            }
        }
    }

    fn reward(
        &self,
        state: &VehicleState,
        obs: &Observation,
        end: Option<(Outcome, f64)>,
        t_d: f64,
    ) -> f64 {
        match self.reward_model {
            RewardModel::Shaped => {
                reward(
                    state,
                    &self.simulator.engagement,
                    obs.eps_t,
                    obs.tgo_hat,
                    self.cfg,
                )
                .total
            }
            RewardModel::TerminalOnly { tolerance } => match end {
                Some((Outcome::Hit, t_f)) if (t_f - t_d).abs() <= tolerance => 1.0,
                _ => 0.0,
            },
        }
    }

    pub fn episode(&self, initial: VehicleState, t_d: f64) -> Result<Episode<'a>> {
        let flight = self.simulator.flight(initial)?;
        let obs = self.observe(flight.state(), t_d);
        let outcome = match flight.termination() {
            Some(t) => Some(t.outcome),
            None if self.cfg.t_max_steps == 0 => Some(Outcome::Timeout),
            None => None,
        };
        Ok(Episode {
            env: *self,
            flight,
            obs,
            t_d,
            steps: 0,
            outcome,
        })
    }
}

/// One stochastic episode advanced a guidance step at a time.
pub struct Episode<'a> {
    env: CorrectorEnv<'a>,
    flight: crate::dynamics::Flight<'a>,
    obs: Observation,
    t_d: f64,
    steps: usize,
    outcome: Option<Outcome>,
}

impl Episode<'_> {
    pub fn state(&self) -> &VehicleState {
        self.flight.state()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `None` while running; the episode also ends at the step limit, as a timeout.
    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    /// Samples a bias, flies one guidance interval and returns the transition,
    /// or `None` once the episode has ended.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        policy: &GaussianPolicy,
        rng: &mut R,
    ) -> Result<Option<Transition>> {
        if self.outcome.is_some() {
            return Ok(None);
        }
        let cfg = self.env.cfg;
        let sample = sample_action(policy, &self.obs.state, cfg.a_max, rng);
        let baseline = self.env.simulator.png(self.flight.state())?;
        let end = self
            .flight
            .advance(baseline + sample.action)?
            .map(|t| (t.outcome, t.final_time));
        self.steps += 1;
        let next_obs = self.env.observe(self.flight.state(), self.t_d);
        let r = self
            .env
            .reward(self.flight.state(), &next_obs, end, self.t_d);
        let done = matches!(end, Some((Outcome::Hit | Outcome::Ground, _)));
        let truncated = !done && (end.is_some() || self.steps >= cfg.t_max_steps);
        if let Some((outcome, _)) = end {
            self.outcome = Some(outcome);
        } else if truncated {
            self.outcome = Some(Outcome::Timeout);
        }
        let t = Transition {
            state: self.obs.state,
            action: sample.raw,
            log_prob: sample.log_prob,
            reward: r,
            next_state: next_obs.state,
            done,
            truncated,
        };
        self.obs = next_obs;
        Ok(Some(t))
    }
}

/// Initial state and desired impact time of training episode `episode`.
pub fn episode_scenario(
    env: &EngagementConfig,
    predictor: &TgoPredictor,
    seed: u64,
    episode: usize,
) -> (VehicleState, f64) {
    let mut rng = stream_rng(seed, episode as u64);
    let initial = env.ranges.sample(&mut rng);
    let t_d = env
        .desired_time
        .sample(predictor.predict_state(&initial), &mut rng);
    (initial, t_d)
}

/// Episodic PPO training with the buffer flushed through an update whenever it fills.
pub fn train_corrector(
    env: &EngagementConfig,
    predictor: &TgoPredictor,
    cfg: &PpoConfig,
    reward_model: RewardModel,
    seed: u64,
) -> Result<TrainingRun> {
    train_corrector_with(env, predictor, cfg, reward_model, seed, |_, _| Ok(()))
}

/// [`train_corrector`] calling `after_episode(episode, agent)` at the end of every episode.
pub fn train_corrector_with<F>(
    env: &EngagementConfig,
    predictor: &TgoPredictor,
    cfg: &PpoConfig,
    reward_model: RewardModel,
    seed: u64,
    mut after_episode: F,
) -> Result<TrainingRun>
where
    F: FnMut(usize, &PpoAgent) -> Result<()>,
{
    cfg.validate()?;
    env.validate()?;
    let mut agent = PpoAgent::new(cfg, seed)?;
    let corrector = CorrectorEnv {
        simulator: &env.simulator,
        predictor,
        cfg,
        reward_model,
    };
    let mut action_rng = stream_rng(seed, 0xac7);
    let mut update_rng = stream_rng(seed, 0x0bd);
    let mut buffer: Vec<Transition> = Vec::with_capacity(cfg.buffer_size);
    let mut history = Vec::with_capacity(cfg.max_episodes);
    let mut updates = Vec::new();
    let mut total_transitions = 0;
    for episode in 0..cfg.max_episodes {
        let (initial, t_d) = episode_scenario(env, predictor, seed, episode);
        let mut run = corrector.episode(initial, t_d)?;
        let mut total = 0.0;
        while let Some(t) = run.step(&agent.actor, &mut action_rng)? {
            total += t.reward;
            buffer.push(t);
            total_transitions += 1;
            if buffer.len() == cfg.buffer_size {
                if updates.is_empty() {
                    warm_start_critic(&mut agent.critic, &buffer, cfg)?;
                }
                let (adv, ret) = compute_advantages(&buffer, &agent.critic, cfg)?;
                updates.push(ppo_update(
                    &mut agent,
                    &buffer,
                    &adv,
                    &ret,
                    cfg,
                    &mut update_rng,
                )?);
                buffer.clear();
            }
        }
        let steps = run.steps();
        history.push(EpisodeLog {
            episode,
            mean_reward: if steps == 0 {
                0.0
            } else {
                total / steps as f64
            },
            total_reward: total,
            steps,
            outcome: run.outcome().unwrap_or(Outcome::Timeout),
            t_d,
            final_time: run.state().time,
        });
        after_episode(episode, &agent)?;
    }
    Ok(TrainingRun {
        agent,
        history,
        updates,
        total_transitions,
    })
}
