//! Supervised time-to-go prediction under PNG.
//!
//! PNG engagements are flown from random launch states; every guidance step of
//! a trajectory that ends in a hit becomes a sample `(v, γ, x, y) -> t_f - t`.
//! A 4-100-100-100-1 ReLU network is then regressed on mean-normalised inputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::dynamics::{GuidanceCommand, Outcome, VehicleState};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Mlp};
use crate::scenario::{stream_rng, EngagementConfig};

pub const PREDICTOR_LAYERS: [usize; 5] = [4, 100, 100, 100, 1];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgoSample {
    pub v: f64,
    pub gamma: f64,
    pub x: f64,
    pub y: f64,
    pub t_go: f64,
}

impl TgoSample {
    pub fn features(&self) -> [f64; 4] {
        [self.v, self.gamma, self.x, self.y]
    }
}

/// Per-trajectory bookkeeping of a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub initial: VehicleState,
    pub outcome: Outcome,
    pub final_time: f64,
    /// Range of this trajectory's samples in `Dataset::samples` (empty unless Hit).
    pub first_sample: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TgoSample>,
    /// Clock time at which each sample was recorded.
    pub sample_times: Vec<f64>,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl Dataset {
    /// Trajectories that did not hit and contributed no samples.
    pub fn discarded(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.outcome != Outcome::Hit)
            .count()
    }
}

/// `(clock time, sample)` pairs of one engagement.
pub type TimedSamples = Vec<(f64, TgoSample)>;

/// Outcome, final time and samples of one PNG engagement from `initial`; the
/// samples are empty unless it ends in a hit.
pub fn png_trajectory_samples(
    config: &EngagementConfig,
    initial: VehicleState,
) -> Result<(Outcome, f64, TimedSamples)> {
    let sim = &config.simulator;
    let rollout = sim.rollout(initial, |s| Ok(GuidanceCommand::unbiased(sim.png(s)?)))?;
    let t_f = rollout.termination.final_time;
    let samples = if rollout.termination.outcome == Outcome::Hit {
        rollout
            .trajectory
            .iter()
            .map(|p| {
                let s = p.state;
                let sample = TgoSample {
                    v: s.speed,
                    gamma: s.gamma,
                    x: s.x,
                    y: s.y,
                    t_go: t_f - s.time,
                };
                (s.time, sample)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((rollout.termination.outcome, t_f, samples))
}

/// Flies `n_trajectories` PNG engagements; trajectory `i` draws its launch
/// state from random stream `i` of `seed`.
pub fn generate_dataset(
    config: &EngagementConfig,
    n_trajectories: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_trajectories == 0 {
        return Err(Error::Dataset("need at least one trajectory".into()));
    }
    config.validate()?;
    let mut dataset = Dataset {
        samples: Vec::new(),
        sample_times: Vec::new(),
        trajectories: Vec::with_capacity(n_trajectories),
    };
    for index in 0..n_trajectories {
        let initial = config.ranges.sample(&mut stream_rng(seed, index as u64));
        let (outcome, final_time, samples) = png_trajectory_samples(config, initial)?;
        dataset.trajectories.push(TrajectoryRecord {
            index,
            initial,
            outcome,
            final_time,
            first_sample: dataset.samples.len(),
            n_samples: samples.len(),
        });
        for (t, s) in samples {
            dataset.sample_times.push(t);
            dataset.samples.push(s);
        }
    }
    if dataset.samples.is_empty() {
        return Err(Error::Dataset(format!(
            "none of {n_trajectories} PNG trajectories hit the target"
        )));
    }
    Ok(dataset)
}

/// Shuffled disjoint split with `round(ratio * N)` training samples.
pub fn split_dataset(
    samples: &[TgoSample],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<TgoSample>, Vec<TgoSample>)> {
    if samples.len() < 10 {
        return Err(Error::Dataset(format!(
            "need at least 10 samples to split, got {}",
            samples.len()
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio {ratio} must lie in (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let n_train = libm::round(ratio * samples.len() as f64) as usize;
    let train = order[..n_train].iter().map(|&i| samples[i]).collect();
    let test = order[n_train..].iter().map(|&i| samples[i]).collect();
    Ok((train, test))
}

/// Input scaling by the mean of each feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub mean_v: f64,
    pub mean_gamma: f64,
    pub mean_x: f64,
    pub mean_y: f64,
}

impl Normalizer {
    pub fn from_samples(samples: &[TgoSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dataset("cannot normalise an empty dataset".into()));
        }
        let n = samples.len() as f64;
        let mut sums = [0.0; 4];
        for s in samples {
            for (acc, f) in sums.iter_mut().zip(s.features()) {
                *acc += f;
            }
        }
        Self::new(sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n)
    }

    pub fn new(mean_v: f64, mean_gamma: f64, mean_x: f64, mean_y: f64) -> Result<Self> {
        let means = [mean_v, mean_gamma, mean_x, mean_y];
        if means.iter().any(|m| !m.is_finite() || *m == 0.0) {
            return Err(Error::Dataset(format!(
                "degenerate normalisation means {means:?}"
            )));
        }
        Ok(Self {
            mean_v,
            mean_gamma,
            mean_x,
            mean_y,
        })
    }

    pub fn normalize(&self, v: f64, gamma: f64, x: f64, y: f64) -> [f64; 4] {
        [
            v / self.mean_v,
            gamma / self.mean_gamma,
            x / self.mean_x,
            y / self.mean_y,
        ]
    }

    pub fn denormalize(&self, n: [f64; 4]) -> [f64; 4] {
        [
            n[0] * self.mean_v,
            n[1] * self.mean_gamma,
            n[2] * self.mean_x,
            n[3] * self.mean_y,
        ]
    }
}

/// Trained network together with the input scaling it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct TgoPredictor {
    pub net: Mlp,
    pub normalizer: Normalizer,
}

impl TgoPredictor {
    pub fn predict(&self, v: f64, gamma: f64, x: f64, y: f64) -> f64 {
        predict_tgo(&self.net, &self.normalizer, v, gamma, x, y)
    }

    pub fn predict_state(&self, s: &VehicleState) -> f64 {
        self.predict(s.speed, s.gamma, s.x, s.y)
    }

    /// Predictions for many samples in one batched pass.
    pub fn predict_batch(&self, samples: &[TgoSample]) -> Vec<f64> {
        let inputs = normalized_inputs(&self.normalizer, samples.iter());
        let cache = self
            .net
            .forward_batch(&inputs, samples.len())
            .expect("predictor has four inputs");
        cache.output().iter().map(|t| t.max(0.0)).collect()
    }
}

/// Network output on mean-normalised inputs, clamped below at zero.
pub fn predict_tgo(net: &Mlp, normalizer: &Normalizer, v: f64, gamma: f64, x: f64, y: f64) -> f64 {
    let input = normalizer.normalize(v, gamma, x, y);
    net.forward(&input).expect("predictor has four inputs")[0].max(0.0)
}

fn normalized_inputs<'a>(
    normalizer: &Normalizer,
    samples: impl Iterator<Item = &'a TgoSample>,
) -> Vec<f64> {
    samples
        .flat_map(|s| normalizer.normalize(s.v, s.gamma, s.x, s.y))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            batch: 1000,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPredictor {
    pub predictor: TgoPredictor,
    pub optimizer: AdamState,
    /// Mini-batch mean squared error before each update.
    pub loss_history: Vec<f64>,
}

/// Mini-batch ADAM on the mean squared time-to-go error.
///
/// Mini-batches are consecutive slices of a training order that is reshuffled
/// after every full pass, so a batch may straddle two passes. The output bias
/// starts at the mean label so the first updates shape the function instead of
/// crawling up to the label scale.
pub fn train_predictor(
    train: &[TgoSample],
    normalizer: Normalizer,
    cfg: &TrainConfig,
) -> Result<TrainedPredictor> {
    if train.is_empty() {
        return Err(Error::Dataset("empty training set".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = stream_rng(cfg.seed, 1);
    let mut net = Mlp::new(&PREDICTOR_LAYERS, Activation::Identity, &mut rng)?;
    let mean_label = train.iter().map(|s| s.t_go).sum::<f64>() / train.len() as f64;
    let (_, out_bias) = net.layer_offsets(net.n_layers() - 1);
    net.params_mut()[out_bias] = mean_label;

    let inputs = normalized_inputs(&normalizer, train.iter());
    let mut opt = AdamState::new(net.n_params(), cfg.learning_rate);
    let mut loss_history = Vec::with_capacity(cfg.steps);
    let mut batch_inputs = vec![0.0; cfg.batch * 4];
    let mut batch_labels = vec![0.0; cfg.batch];
    let mut grad_out = vec![0.0; cfg.batch];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    for step in 0..cfg.steps {
        for k in 0..cfg.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            batch_inputs[4 * k..4 * k + 4].copy_from_slice(&inputs[4 * i..4 * i + 4]);
            batch_labels[k] = train[i].t_go;
        }
        let cache = net.forward_batch(&batch_inputs, cfg.batch)?;
        let mut loss = 0.0;
        let scale = 1.0 / cfg.batch as f64;
        for ((g, &pred), &label) in grad_out.iter_mut().zip(cache.output()).zip(&batch_labels) {
            let e = pred - label;
            loss += e * e;
            *g = 2.0 * e * scale;
        }
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::Dataset(format!(
                "training diverged at step {step}: loss {loss}, last finite loss {:?}",
                loss_history.last()
            )));
        }
        loss_history.push(loss);
        let grads = net.backward(&cache, &grad_out)?;
        net.adam_step(&grads, &mut opt)?;
    }
    Ok(TrainedPredictor {
        predictor: TgoPredictor { net, normalizer },
        optimizer: opt,
        loss_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorMetrics {
    pub mean_error: f64,
    pub std_error: f64,
    pub max_abs_error: f64,
    pub cr: f64,
}

/// Squared Pearson correlation between predictions and labels. Zero when either
/// series has no spread.
pub fn coefficient_of_determination(predicted: &[f64], actual: &[f64]) -> f64 {
    let n = predicted.len() as f64;
    let (mut sp, mut sa, mut spa, mut spp, mut saa) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&p, &a) in predicted.iter().zip(actual) {
        sp += p;
        sa += a;
        spa += p * a;
        spp += p * p;
        saa += a * a;
    }
    let num = n * spa - sp * sa;
    let den = (n * spp - sp * sp) * (n * saa - sa * sa);
    if !(den > 0.0) {
        return 0.0;
    }
    (num * num / den).clamp(0.0, 1.0)
}

/// Error statistics of `predicted - actual`; the standard deviation is the population one.
pub fn error_metrics(predicted: &[f64], actual: &[f64]) -> PredictorMetrics {
    let n = predicted.len().max(1) as f64;
    let errors: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| p - a).collect();
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    PredictorMetrics {
        mean_error: mean,
        std_error: libm::sqrt(var),
        max_abs_error: errors.iter().fold(0.0, |m: f64, e| m.max(e.abs())),
        cr: coefficient_of_determination(predicted, actual),
    }
}

pub fn evaluate_predictor(
    predictor: &TgoPredictor,
    test: &[TgoSample],
) -> Result<PredictorMetrics> {
    if test.is_empty() {
        return Err(Error::Dataset("empty test set".into()));
    }
    let predicted = predictor.predict_batch(test);
    let actual: Vec<f64> = test.iter().map(|s| s.t_go).collect();
    Ok(error_metrics(&predicted, &actual))
}
