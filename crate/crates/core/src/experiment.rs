//! Comparison guidance laws and the evaluation experiments.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use libm::{cos, floor, sqrt};

use crate::dynamics::{
    los_geometry, Engagement, GuidanceCommand, Outcome, Rollout, Simulator, VehicleState,
};
use crate::error::{Error, Result};
use crate::ppo::{
    act_deterministic, make_state, train_corrector_with, GaussianPolicy, PpoConfig, RewardModel,
    TrainingRun,
};
use crate::scenario::{fixed_scenario, stream_rng, EngagementConfig};
use crate::tgo::TgoPredictor;

/// `|λ̇|` below which ITCG1 drops its bias term, rad/s.
pub const ITCG1_LOS_RATE_GUARD: f64 = 1e-6;
/// `|θ − λ|` below which ITCG2 drops its bias term, rad.
pub const ITCG2_HEADING_GUARD: f64 = 1e-4;
/// Remaining desired time below which ITCG2 drops its bias term, s.
pub const ITCG2_TIME_GUARD: f64 = 0.5;

fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * floor((a + PI) / (2.0 * PI));
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Heading error `θ − λ` wrapped to `(−π, π]`.
pub fn heading_error(state: &VehicleState, engagement: &Engagement) -> Result<f64> {
    let los = los_geometry(state, engagement)?;
    Ok(wrap_angle(state.gamma - los.los_angle))
}

/// Closed-form PNG time-to-go `[1 + (θ − λ)²/10] R / v`.
pub fn approx_tgo_png(state: &VehicleState, engagement: &Engagement) -> Result<f64> {
    if !(state.speed > 0.0) {
        return Err(Error::Domain {
            quantity: "speed",
            value: state.speed,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let los = los_geometry(state, engagement)?;
    let he = wrap_angle(state.gamma - los.los_angle);
    Ok((1.0 + he * he / 10.0) * los.range / state.speed)
}

/// First analytic law: PNG plus `−120 v⁵ / (3 v λ̇ R³) · (t_d − t − t̂_go)`.
pub fn itcg1_command(
    state: &VehicleState,
    engagement: &Engagement,
    t_d: f64,
    gravity: f64,
) -> Result<GuidanceCommand> {
    let los = los_geometry(state, engagement)?;
    let v = state.speed;
    let baseline = 3.0 * v * los.los_rate + gravity * cos(state.gamma);
    if los.los_rate.abs() < ITCG1_LOS_RATE_GUARD {
        return Ok(GuidanceCommand::unbiased(baseline));
    }
    let tgo = approx_tgo_png(state, engagement)?;
    let r3 = los.range * los.range * los.range;
    let bias = -120.0 * v.powi(5) / (3.0 * v * los.los_rate * r3) * (t_d - state.time - tgo);
    Ok(GuidanceCommand::new(baseline, bias))
}

/// Second analytic law:
/// `−3 v² (θ − λ) / R + 100 v² / (R (θ − λ)) · (t_d − t − t̂_go) / (t_d − t)`.
pub fn itcg2_command(
    state: &VehicleState,
    engagement: &Engagement,
    t_d: f64,
    gravity: f64,
) -> Result<GuidanceCommand> {
    let los = los_geometry(state, engagement)?;
    let v = state.speed;
    let he = wrap_angle(state.gamma - los.los_angle);
    let baseline = -3.0 * v * v * he / los.range + gravity * cos(state.gamma);
    let remaining = t_d - state.time;
    if he.abs() < ITCG2_HEADING_GUARD || remaining < ITCG2_TIME_GUARD {
        return Ok(GuidanceCommand::unbiased(baseline));
    }
    let tgo = approx_tgo_png(state, engagement)?;
    let bias = 100.0 * v * v / (los.range * he) * (remaining - tgo) / remaining;
    Ok(GuidanceCommand::new(baseline, bias))
}

/// PNG plus the deterministic actor output.
#[derive(Debug, Clone, Copy)]
pub struct ProposedController<'a> {
    pub actor: &'a GaussianPolicy,
    pub predictor: &'a TgoPredictor,
    pub ppo: &'a PpoConfig,
    pub t_d: f64,
}

impl ProposedController<'_> {
    /// Command and predicted impact-time error at `state`.
    pub fn command(&self, sim: &Simulator, state: &VehicleState) -> Result<(GuidanceCommand, f64)> {
        let obs = make_state(state, self.t_d, self.predictor, self.ppo.eps_hat);
        let bias = act_deterministic(self.actor, &obs.state, self.ppo.a_max);
        Ok((GuidanceCommand::new(sim.png(state)?, bias), obs.eps_t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    Png,
    Proposed,
    Itcg1,
    Itcg2,
}

impl Law {
    pub const ALL: [Law; 4] = [Law::Png, Law::Proposed, Law::Itcg1, Law::Itcg2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Law::Png => "png",
            Law::Proposed => "proposed",
            Law::Itcg1 => "itcg1",
            Law::Itcg2 => "itcg2",
        }
    }
}

/// Trained models driving the proposed controller.
#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub actor: &'a GaussianPolicy,
    pub predictor: &'a TgoPredictor,
    pub ppo: &'a PpoConfig,
}

/// A rollout and, for the proposed law, its per-step predicted impact-time error.
#[derive(Debug, Clone, PartialEq)]
pub struct LawRollout {
    pub law: Law,
    pub t_d: f64,
    pub rollout: Rollout,
    pub eps_series: Vec<f64>,
}

pub fn run_law(
    sim: &Simulator,
    law: Law,
    initial: VehicleState,
    t_d: f64,
    models: Option<Models<'_>>,
) -> Result<LawRollout> {
    let g = sim.airframe.gravity;
    let eng = sim.engagement;
    let mut eps_series = Vec::new();
    let rollout = match law {
        Law::Png => sim.rollout(initial, |s| Ok(GuidanceCommand::unbiased(sim.png(s)?)))?,
        Law::Itcg1 => sim.rollout(initial, |s| itcg1_command(s, &eng, t_d, g))?,
        Law::Itcg2 => sim.rollout(initial, |s| itcg2_command(s, &eng, t_d, g))?,
        Law::Proposed => {
            let m = models.ok_or_else(|| {
                Error::Config("the proposed law needs a trained actor and predictor".into())
            })?;
            let c = ProposedController {
                actor: m.actor,
                predictor: m.predictor,
                ppo: m.ppo,
                t_d,
            };
            sim.rollout(initial, |s| {
                let (cmd, eps) = c.command(sim, s)?;
                eps_series.push(eps);
                Ok(cmd)
            })?
        }
    };
    Ok(LawRollout {
        law,
        t_d,
        rollout,
        eps_series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSummary {
    pub t_d: f64,
    pub final_time: f64,
    /// `t_d − t_f`, s.
    pub impact_time_error: f64,
    pub max_abs_bias: f64,
    pub outcome: Outcome,
    pub miss_distance: f64,
}

impl ScenarioSummary {
    pub fn of(run: &LawRollout) -> Self {
        let t = run.rollout.termination;
        ScenarioSummary {
            t_d: run.t_d,
            final_time: t.final_time,
            impact_time_error: run.t_d - t.final_time,
            max_abs_bias: run
                .rollout
                .trajectory
                .iter()
                .map(|p| p.command.bias.abs())
                .fold(0.0, f64::max),
            outcome: t.outcome,
            miss_distance: t.miss_distance,
        }
    }
}

/// Proposed-law rollouts of the reference engagement, one per desired time.
pub fn run_fixed_scenario(
    sim: &Simulator,
    models: Models<'_>,
    desired_times: &[f64],
) -> Result<Vec<(LawRollout, ScenarioSummary)>> {
    desired_times
        .iter()
        .map(|&t_d| {
            let run = run_law(sim, Law::Proposed, fixed_scenario(), t_d, Some(models))?;
            let summary = ScenarioSummary::of(&run);
            Ok((run, summary))
        })
        .collect()
}

/// All four laws on the reference engagement with the same desired time.
pub fn run_comparison(sim: &Simulator, models: Models<'_>, t_d: f64) -> Result<Vec<LawRollout>> {
    Law::ALL
        .iter()
        .map(|&law| run_law(sim, law, fixed_scenario(), t_d, Some(models)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub index: u64,
    pub initial: VehicleState,
    pub t_d: f64,
    pub final_time: f64,
    /// `t_d − t_f`, s.
    pub impact_time_error: f64,
    pub outcome: Outcome,
    pub miss_distance: f64,
    /// `(t, ε_t / t_d)` at every guidance step.
    pub normalized_error: Vec<(f64, f64)>,
}

impl MonteCarloRun {
    pub fn success(&self, tolerance: f64) -> bool {
        self.outcome == Outcome::Hit && self.impact_time_error.abs() <= tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    /// Lower edge of the first bin.
    pub start: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins aligned on multiples of `bin_width`, covering every value.
    pub fn new(values: &[f64], bin_width: f64) -> Self {
        let idx = |v: f64| floor(v / bin_width) as i64;
        let (Some(lo), Some(hi)) = (
            values.iter().map(|v| idx(*v)).min(),
            values.iter().map(|v| idx(*v)).max(),
        ) else {
            return Histogram {
                bin_width,
                start: 0.0,
                counts: Vec::new(),
            };
        };
        let mut counts = vec![0; (hi - lo + 1) as usize];
        for v in values {
            counts[(idx(*v) - lo) as usize] += 1;
        }
        Histogram {
            bin_width,
            start: lo as f64 * bin_width,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloStats {
    pub mean_error: f64,
    pub std_error: f64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Hit with `|ε| ≤ success_tolerance`.
    pub success_fraction: f64,
    /// Hit with `|ε| < 0.5 s`.
    pub under_half_second: f64,
    pub hit_fraction: f64,
}

pub const SUCCESS_TOLERANCE: f64 = 1.0;
pub const HISTOGRAM_BIN: f64 = 0.5;

impl MonteCarloStats {
    pub fn from_runs(runs: &[MonteCarloRun]) -> Self {
        let n = runs.len().max(1) as f64;
        let errs: Vec<f64> = runs.iter().map(|r| r.impact_time_error).collect();
        let mean = errs.iter().sum::<f64>() / n;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let frac =
            |f: &dyn Fn(&MonteCarloRun) -> bool| runs.iter().filter(|r| f(r)).count() as f64 / n;
        MonteCarloStats {
            mean_error: mean,
            std_error: sqrt(var),
            max_abs_error: errs.iter().map(|e| e.abs()).fold(0.0, f64::max),
            mean_abs_error: errs.iter().map(|e| e.abs()).sum::<f64>() / n,
            success_fraction: frac(&|r| r.success(SUCCESS_TOLERANCE)),
            under_half_second: frac(&|r| {
                r.outcome == Outcome::Hit && r.impact_time_error.abs() < 0.5
            }),
            hit_fraction: frac(&|r| r.outcome == Outcome::Hit),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub runs: Vec<MonteCarloRun>,
    pub stats: MonteCarloStats,
    pub histogram: Histogram,
}

/// Proposed-law rollouts from random launch states and desired times.
/// Run `i` draws from stream `i` of `seed`.
pub fn run_monte_carlo(
    env: &EngagementConfig,
    models: Models<'_>,
    n_runs: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if n_runs == 0 {
        return Err(Error::Config(
            "at least one Monte-Carlo run is required".into(),
        ));
    }
    env.validate()?;
    let mut runs = Vec::with_capacity(n_runs);
    for i in 0..n_runs as u64 {
        let mut rng = stream_rng(seed, i);
        let initial = env.ranges.sample(&mut rng);
        let t_d = env
            .desired_time
            .sample(models.predictor.predict_state(&initial), &mut rng);
        let run = run_law(&env.simulator, Law::Proposed, initial, t_d, Some(models))?;
        let term = run.rollout.termination;
        let normalized_error = run
            .rollout
            .trajectory
            .iter()
            .zip(&run.eps_series)
            .map(|(p, e)| (p.state.time, e / t_d))
            .collect();
        runs.push(MonteCarloRun {
            index: i,
            initial,
            t_d,
            final_time: term.final_time,
            impact_time_error: t_d - term.final_time,
            outcome: term.outcome,
            miss_distance: term.miss_distance,
            normalized_error,
        });
    }
    let stats = MonteCarloStats::from_runs(&runs);
    let errs: Vec<f64> = runs.iter().map(|r| r.impact_time_error).collect();
    Ok(MonteCarloReport {
        seed,
        runs,
        stats,
        histogram: Histogram::new(&errs, HISTOGRAM_BIN),
    })
}

/// Checkpoint scoring on validation engagements drawn from their own seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Episodes between checkpoints; 0 scores the final actor only.
    pub interval: usize,
    pub runs: usize,
    pub seed: u64,
    /// Error charged to a validation run that does not hit, s.
    pub miss_penalty: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            interval: 25,
            runs: 40,
            seed: 0x7a11_da7e,
            miss_penalty: 200.0,
        }
    }
}

/// Mean `|t_d − t_f|` of the deterministic actor over the validation engagements.
pub fn validation_score(
    env: &EngagementConfig,
    models: Models<'_>,
    selection: &SelectionConfig,
) -> Result<f64> {
    let report = run_monte_carlo(env, models, selection.runs, selection.seed)?;
    let total: f64 = report
        .runs
        .iter()
        .map(|r| match r.outcome {
            Outcome::Hit => r.impact_time_error.abs(),
            _ => selection.miss_penalty,
        })
        .sum();
    Ok(total / report.runs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    /// Index of the last episode trained before the checkpoint.
    pub episode: usize,
    pub score: f64,
    pub actor: GaussianPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCorrector {
    pub seed: u64,
    pub run: TrainingRun,
    /// `(episode, score)` of every checkpoint.
    pub scores: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedCorrector {
    pub best: Checkpoint,
    pub candidates: Vec<TrainedCorrector>,
}

/// Trains one corrector per seed and keeps the lowest-scoring checkpoint; ties go
/// to the earlier seed and episode.
pub fn train_selected(
    env: &EngagementConfig,
    predictor: &TgoPredictor,
    cfg: &PpoConfig,
    selection: &SelectionConfig,
    seeds: &[u64],
) -> Result<SelectedCorrector> {
    if seeds.is_empty() {
        return Err(Error::Config(
            "at least one training seed is required".into(),
        ));
    }
    if selection.runs == 0 || !(selection.miss_penalty >= 0.0) {
        return Err(Error::Config(
            "selection needs at least one validation run and a non-negative miss penalty".into(),
        ));
    }
    let mut best: Option<Checkpoint> = None;
    let mut candidates = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut scores = Vec::new();
        let mut offer = |episode: usize, actor: &GaussianPolicy| -> Result<()> {
            let models = Models {
                actor,
                predictor,
                ppo: cfg,
            };
            let score = validation_score(env, models, selection)?;
            scores.push((episode, score));
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Checkpoint {
                    seed,
                    episode,
                    score,
                    actor: actor.clone(),
                });
            }
            Ok(())
        };
        let last = cfg.max_episodes.saturating_sub(1);
        let run = train_corrector_with(
            env,
            predictor,
            cfg,
            RewardModel::Shaped,
            seed,
            |ep, agent| {
                let due = selection.interval > 0 && (ep + 1) % selection.interval == 0;
                if due || ep == last {
                    offer(ep, &agent.actor)?;
                }
                Ok(())
            },
        )?;
        if cfg.max_episodes == 0 {
            offer(0, &run.agent.actor)?;
        }
        candidates.push(TrainedCorrector { seed, run, scores });
    }
    Ok(SelectedCorrector {
        best: best.expect("at least one checkpoint per seed"),
        candidates,
    })
}

#[cfg(test)]
mod tests;
