//! Subcommand implementations. Each returns the files it produced; nothing is
//! written until the command has succeeded.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use itcg_core::dynamics::Outcome;
use itcg_core::experiment::{
    run_comparison, run_fixed_scenario, run_monte_carlo, train_selected, Models, ScenarioSummary,
    SUCCESS_TOLERANCE,
};
use itcg_core::ppo::{GaussianPolicy, PpoConfig};
use itcg_core::scenario::derive_seed;
use itcg_core::tgo::{
    evaluate_predictor, generate_dataset, split_dataset, train_predictor, Normalizer,
    PredictorMetrics, TgoPredictor, TgoSample, PREDICTOR_LAYERS,
};
use serde::Serialize;

use crate::config::{Config, PpoSection};
use crate::files::{self, *};

const DATA_TAG: u64 = 1;
const SPLIT_TAG: u64 = 2;
const PREDICTOR_TAG: u64 = 3;
const MONTE_CARLO_TAG: u64 = 4;
const PPO_TAG: u64 = 100;

#[derive(Debug, Parser)]
#[command(
    name = "itcg",
    version,
    about = "Impact-time-control guidance experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Directory holding the inputs of this step; defaults to the output directory.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Number of dataset trajectories.
    #[arg(long, global = true)]
    pub trajectories: Option<usize>,
    /// Number of predictor training steps.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Number of PPO training episodes per restart.
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Number of Monte-Carlo runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate the time-to-go dataset from PNG engagements.
    GenData,
    /// Train the time-to-go predictor.
    TrainTgo,
    /// Evaluate the predictor on the held-out split.
    EvalTgo,
    /// Train the PPO corrector.
    TrainPpo,
    /// Fly the reference engagement with the proposed law.
    Simulate {
        /// Desired impact times, s; defaults to the configured sweep.
        #[arg(long, num_args = 1..)]
        td: Vec<f64>,
    },
    /// Fly the reference engagement with PNG, the proposed law and both analytic laws.
    Compare {
        #[arg(long)]
        td: Option<f64>,
    },
    /// Random engagements with the proposed law.
    MonteCarlo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::TrainTgo => "train-tgo",
            Command::EvalTgo => "eval-tgo",
            Command::TrainPpo => "train-ppo",
            Command::Simulate { .. } => "simulate",
            Command::Compare { .. } => "compare",
            Command::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_file: String,
    config_hash: String,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

/// Resolved configuration plus the bookkeeping a command fills in for its manifest.
struct Run {
    cfg: Config,
    input: PathBuf,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
}

impl Run {
    fn read(&mut self, name: &str) -> anyhow::Result<Vec<u8>> {
        let bytes = files::read(&self.input, name)?;
        self.inputs.insert(name.to_owned(), sha256(&bytes));
        Ok(bytes)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&mut self, name: &str) -> anyhow::Result<T> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).with_context(|| format!("malformed {name}"))
    }

    fn seed(&mut self, name: &'static str, tag: u64) -> u64 {
        let s = derive_seed(self.cfg.seed, tag);
        self.seeds.insert(name.to_owned(), s);
        s
    }

    fn predictor(&mut self) -> anyhow::Result<(TgoPredictor, PredictorMeta)> {
        let meta: PredictorMeta = self.read_json(PREDICTOR_META)?;
        self.read(&meta.weights)?;
        load_predictor(&self.input)
    }

    fn actor(&mut self, normalizer: &Normalizer) -> anyhow::Result<(GaussianPolicy, PpoMeta)> {
        let meta: PpoMeta = self.read_json(PPO_META)?;
        self.read(&meta.actor)?;
        if meta.normalizer != Means::from(*normalizer) {
            bail!("the corrector was trained against a different predictor");
        }
        load_actor(&self.input)
    }
}

pub fn resolve_config(common: &Common, command: &Command) -> anyhow::Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.trajectories {
        cfg.dataset.trajectories = n;
    }
    if let Some(n) = common.steps {
        cfg.predictor.steps = n;
    }
    if let Some(n) = common.episodes {
        cfg.ppo.max_episodes = n;
    }
    if let Some(n) = common.runs {
        cfg.evaluation.monte_carlo_runs = n;
    }
    match command {
        Command::Simulate { td } if !td.is_empty() => cfg.evaluation.desired_times = td.clone(),
        Command::Compare { td: Some(t) } => cfg.evaluation.compare_td = *t,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `cli` and returns every file it produced, manifest included.
pub fn execute(cli: &Cli) -> anyhow::Result<Outputs> {
    let cfg = resolve_config(&cli.common, &cli.command)?;
    let mut run = Run {
        input: cli
            .common
            .input
            .clone()
            .unwrap_or_else(|| cli.common.out.clone()),
        cfg,
        seeds: BTreeMap::new(),
        inputs: BTreeMap::new(),
    };
    run.seeds.insert("master".into(), run.cfg.seed);
    let mut out = match &cli.command {
        Command::GenData => gen_data(&mut run)?,
        Command::TrainTgo => train_tgo(&mut run)?,
        Command::EvalTgo => eval_tgo(&mut run)?,
        Command::TrainPpo => train_ppo(&mut run)?,
        Command::Simulate { .. } => simulate(&mut run)?,
        Command::Compare { .. } => compare(&mut run)?,
        Command::MonteCarlo => monte_carlo(&mut run)?,
    };
    let name = cli.command.name();
    let config_file = format!("{name}.config.toml");
    out.add(config_file.clone(), run.cfg.to_toml().into_bytes());
    let manifest = Manifest {
        tool: "itcg",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config_file,
        config_hash: run.cfg.hash(),
        seeds: run.seeds,
        inputs: run.inputs,
        outputs: out.digests(),
    };
    out.add_json(&format!("{name}.manifest.json"), &manifest);
    Ok(out)
}

/// [`execute`] followed by writing the outputs to `--out`.
pub fn run_cli(cli: &Cli) -> anyhow::Result<Outputs> {
    let out = execute(cli)?;
    out.write_to(&cli.common.out)?;
    Ok(out)
}

fn gen_data(run: &mut Run) -> anyhow::Result<Outputs> {
    let env = run.cfg.engagement()?;
    let seed = run.seed("dataset", DATA_TAG);
    let data = generate_dataset(&env, run.cfg.dataset.trajectories, seed)?;
    let means = Normalizer::from_samples(&data.samples)?;
    let meta = DatasetMeta {
        seed,
        config_hash: run.cfg.hash(),
        trajectories: data.trajectories.len(),
        hits: data
            .trajectories
            .iter()
            .filter(|t| t.outcome == Outcome::Hit)
            .count(),
        discarded: data.discarded(),
        samples: data.samples.len(),
        means: means.into(),
    };
    let mut out = Outputs::default();
    out.add(DATASET_CSV, dataset_csv(&data.samples));
    out.add_json(DATASET_META, &meta);
    Ok(out)
}

fn load_dataset(run: &mut Run) -> anyhow::Result<(Vec<TgoSample>, DatasetMeta)> {
    let samples = parse_dataset_csv(&run.read(DATASET_CSV)?)?;
    let meta: DatasetMeta = run.read_json(DATASET_META)?;
    if meta.samples != samples.len() {
        bail!(
            "{DATASET_META} records {} samples but {DATASET_CSV} holds {}",
            meta.samples,
            samples.len()
        );
    }
    Ok((samples, meta))
}

fn train_tgo(run: &mut Run) -> anyhow::Result<Outputs> {
    let (samples, meta) = load_dataset(run)?;
    let split_seed = run.seed("split", SPLIT_TAG);
    let train_seed = run.seed("predictor", PREDICTOR_TAG);
    let (train, _) = split_dataset(&samples, run.cfg.dataset.train_ratio, split_seed)?;
    let tc = run.cfg.train_config(train_seed);
    let trained = train_predictor(&train, meta.means.normalizer()?, &tc)?;
    let pmeta = PredictorMeta {
        weights: PREDICTOR_BIN.into(),
        layer_sizes: PREDICTOR_LAYERS.to_vec(),
        normalizer: meta.means,
        train: TrainSettings {
            steps: tc.steps,
            batch: tc.batch,
            learning_rate: tc.learning_rate,
            seed: tc.seed,
        },
        train_ratio: run.cfg.dataset.train_ratio,
        split_seed,
        final_loss: trained.loss_history.last().copied(),
    };
    let mut out = Outputs::default();
    out.add(PREDICTOR_BIN, weights(&trained.predictor.net));
    out.add_json(PREDICTOR_META, &pmeta);
    out.add(
        "tgo_loss.csv",
        table_csv(
            &["step", "loss"],
            trained
                .loss_history
                .iter()
                .enumerate()
                .map(|(i, l)| vec![i.to_string(), num(*l)])
                .collect(),
        ),
    );
    Ok(out)
}

#[derive(Serialize)]
struct MetricsJson {
    mean_error: f64,
    std_error: f64,
    max_abs_error: f64,
    cr: f64,
    samples: usize,
}

impl MetricsJson {
    fn new(m: PredictorMetrics, samples: usize) -> Self {
        Self {
            mean_error: m.mean_error,
            std_error: m.std_error,
            max_abs_error: m.max_abs_error,
            cr: m.cr,
            samples,
        }
    }
}

fn eval_tgo(run: &mut Run) -> anyhow::Result<Outputs> {
    let (samples, _) = load_dataset(run)?;
    let (predictor, meta) = run.predictor()?;
    let (train, test) = split_dataset(&samples, meta.train_ratio, meta.split_seed)?;
    let predicted = predictor.predict_batch(&test);
    let rows = test
        .iter()
        .zip(&predicted)
        .map(|(s, p)| {
            vec![
                num(s.v),
                num(s.gamma),
                num(s.x),
                num(s.y),
                num(s.t_go),
                num(*p),
                num(p - s.t_go),
            ]
        })
        .collect();
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "test",
        MetricsJson::new(evaluate_predictor(&predictor, &test)?, test.len()),
    );
    metrics.insert(
        "train",
        MetricsJson::new(evaluate_predictor(&predictor, &train)?, train.len()),
    );
    let mut out = Outputs::default();
    out.add(
        "tgo_eval.csv",
        table_csv(&["v", "gamma", "x", "y", "tgo", "predicted", "error"], rows),
    );
    out.add_json("tgo_metrics.json", &metrics);
    Ok(out)
}

fn train_ppo(run: &mut Run) -> anyhow::Result<Outputs> {
    let (predictor, _) = run.predictor()?;
    let env = run.cfg.engagement()?;
    let ppo = run.cfg.ppo.to_core();
    let seeds: Vec<u64> = (0..run.cfg.selection.restarts as u64)
        .map(|k| derive_seed(run.cfg.seed, PPO_TAG + k))
        .collect();
    run.seeds.insert("selection".into(), run.cfg.selection.seed);
    for (k, s) in seeds.iter().enumerate() {
        run.seeds.insert(format!("ppo_restart{k}"), *s);
    }
    let picked = train_selected(&env, &predictor, &ppo, &run.cfg.selection_config(), &seeds)?;
    let winner = picked
        .candidates
        .iter()
        .find(|c| c.seed == picked.best.seed)
        .expect("winning seed is a candidate");
    let meta = PpoMeta {
        actor: ACTOR_BIN.into(),
        critic: CRITIC_BIN.into(),
        log_std: picked.best.actor.log_std,
        ppo: PpoSection::from_core(&ppo),
        normalizer: predictor.normalizer.into(),
        training_seeds: seeds.clone(),
        selected: SelectedMeta {
            seed: picked.best.seed,
            episode: picked.best.episode,
            score: picked.best.score,
        },
    };
    let mut out = Outputs::default();
    out.add(ACTOR_BIN, weights(&picked.best.actor.net));
    out.add(CRITIC_BIN, weights(&winner.run.agent.critic));
    out.add_json(PPO_META, &meta);
    out.add(
        "reward_history.csv",
        reward_history_csv(&winner.run.history),
    );
    let mut selection_rows = Vec::new();
    for (k, c) in picked.candidates.iter().enumerate() {
        out.add(
            format!("reward_history_restart{k}.csv"),
            reward_history_csv(&c.run.history),
        );
        for (ep, score) in &c.scores {
            selection_rows.push(vec![
                k.to_string(),
                c.seed.to_string(),
                ep.to_string(),
                num(*score),
            ]);
        }
    }
    out.add(
        "selection.csv",
        table_csv(&["restart", "seed", "episode", "score"], selection_rows),
    );
    Ok(out)
}

fn models_of(run: &mut Run) -> anyhow::Result<(TgoPredictor, GaussianPolicy, PpoConfig)> {
    let (predictor, _) = run.predictor()?;
    let (actor, meta) = run.actor(&predictor.normalizer)?;
    Ok((predictor, actor, meta.ppo.to_core()))
}

fn summary_row(s: &ScenarioSummary) -> Vec<String> {
    vec![
        num(s.t_d),
        num(s.final_time),
        num(s.impact_time_error),
        num(s.max_abs_bias),
        s.outcome.as_str().to_owned(),
        num(s.miss_distance),
    ]
}

const SUMMARY_HEADER: [&str; 6] = [
    "t_d",
    "t_f",
    "impact_time_error",
    "max_abs_bias",
    "outcome",
    "miss_distance",
];

fn simulate(run: &mut Run) -> anyhow::Result<Outputs> {
    let env = run.cfg.engagement()?;
    let (predictor, actor, ppo) = models_of(run)?;
    let models = Models {
        actor: &actor,
        predictor: &predictor,
        ppo: &ppo,
    };
    let runs = run_fixed_scenario(&env.simulator, models, &run.cfg.evaluation.desired_times)?;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    for (r, summary) in &runs {
        out.add(
            format!("trajectory_td{}.csv", num(r.t_d)),
            trajectory_csv(&r.rollout, &env.simulator.engagement)?,
        );
        rows.push(summary_row(summary));
    }
    out.add("fixed_summary.csv", table_csv(&SUMMARY_HEADER, rows));
    Ok(out)
}

fn compare(run: &mut Run) -> anyhow::Result<Outputs> {
    let env = run.cfg.engagement()?;
    let (predictor, actor, ppo) = models_of(run)?;
    let models = Models {
        actor: &actor,
        predictor: &predictor,
        ppo: &ppo,
    };
    let runs = run_comparison(&env.simulator, models, run.cfg.evaluation.compare_td)?;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    for r in &runs {
        out.add(
            format!("trajectory_{}.csv", r.law.as_str()),
            trajectory_csv(&r.rollout, &env.simulator.engagement)?,
        );
        let mut row = vec![r.law.as_str().to_owned()];
        row.extend(summary_row(&ScenarioSummary::of(r)));
        rows.push(row);
    }
    let mut header = vec!["law"];
    header.extend(SUMMARY_HEADER);
    out.add("compare_summary.csv", table_csv(&header, rows));
    Ok(out)
}

#[derive(Serialize)]
struct MonteCarloJson {
    seed: u64,
    runs: usize,
    mean_error: f64,
    std_error: f64,
    max_abs_error: f64,
    mean_abs_error: f64,
    success_fraction: f64,
    under_half_second: f64,
    hit_fraction: f64,
    success_tolerance: f64,
}

fn monte_carlo(run: &mut Run) -> anyhow::Result<Outputs> {
    let env = run.cfg.engagement()?;
    let (predictor, actor, ppo) = models_of(run)?;
    let models = Models {
        actor: &actor,
        predictor: &predictor,
        ppo: &ppo,
    };
    let seed = run.seed("monte_carlo", MONTE_CARLO_TAG);
    let report = run_monte_carlo(&env, models, run.cfg.evaluation.monte_carlo_runs, seed)?;
    let s = report.stats;
    let mut out = Outputs::default();
    out.add(
        "mc_runs.csv",
        table_csv(
            &[
                "run",
                "x0",
                "y0",
                "v0",
                "gamma0",
                "t_d",
                "t_f",
                "impact_time_error",
                "outcome",
                "miss_distance",
            ],
            report
                .runs
                .iter()
                .map(|r| {
                    vec![
                        r.index.to_string(),
                        num(r.initial.x),
                        num(r.initial.y),
                        num(r.initial.speed),
                        num(r.initial.gamma),
                        num(r.t_d),
                        num(r.final_time),
                        num(r.impact_time_error),
                        r.outcome.as_str().to_owned(),
                        num(r.miss_distance),
                    ]
                })
                .collect(),
        ),
    );
    let mut series = Vec::new();
    for r in &report.runs {
        for (t, e) in &r.normalized_error {
            series.push(vec![r.index.to_string(), num(*t), num(*e)]);
        }
    }
    out.add(
        "mc_error_series.csv",
        table_csv(&["run", "t", "eps_over_td"], series),
    );
    let h = &report.histogram;
    out.add(
        "mc_histogram.csv",
        table_csv(
            &["bin_lo", "bin_hi", "count"],
            h.counts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let lo = h.start + i as f64 * h.bin_width;
                    vec![num(lo), num(lo + h.bin_width), c.to_string()]
                })
                .collect(),
        ),
    );
    out.add_json(
        "mc_summary.json",
        &MonteCarloJson {
            seed,
            runs: report.runs.len(),
            mean_error: s.mean_error,
            std_error: s.std_error,
            max_abs_error: s.max_abs_error,
            mean_abs_error: s.mean_abs_error,
            success_fraction: s.success_fraction,
            under_half_second: s.under_half_second,
            hit_fraction: s.hit_fraction,
            success_tolerance: SUCCESS_TOLERANCE,
        },
    );
    Ok(out)
}
