//! On-disk artifact formats.
//!
//! | file | content |
//! |---|---|
//! | `dataset.csv` | `v,gamma,x,y,tgo` samples |
//! | `dataset.json` | seed, config hash, discard count, normalisation means |
//! | `predictor.bin` + `predictor.json` | time-to-go network and its input scaling |
//! | `actor.bin`, `critic.bin` + `ppo.json` | corrector networks, log std, PPO settings |
//! | `trajectory_*.csv` | `t,x,y,v,gamma,a0,ab,aM,r,lambda` per guidance step |
//! | `reward_history*.csv` | `episode,mean_reward,steps,outcome` |
//!
//! Weight files use the binary container of [`itcg_core::nn::codec`].

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use itcg_core::dynamics::{los_geometry, Engagement, Rollout};
use itcg_core::nn::codec;
use itcg_core::nn::Mlp;
use itcg_core::ppo::{EpisodeLog, GaussianPolicy};
use itcg_core::tgo::{Normalizer, TgoPredictor, TgoSample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, PpoSection};

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_META: &str = "dataset.json";
pub const PREDICTOR_BIN: &str = "predictor.bin";
pub const PREDICTOR_META: &str = "predictor.json";
pub const ACTOR_BIN: &str = "actor.bin";
pub const CRITIC_BIN: &str = "critic.bin";
pub const PPO_META: &str = "ppo.json";

/// Files produced by one command, written together once the command has succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        let name = name.into();
        self.files.retain(|(n, _)| *n != name);
        self.files.push((name, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .map(|(n, b)| (n.clone(), sha256(b)))
            .collect()
    }

    pub fn write_to(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn read(dir: &Path, name: &str) -> anyhow::Result<Vec<u8>> {
    let path = dir.join(name);
    std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> anyhow::Result<T> {
    let bytes = read(dir, name)?;
    serde_json::from_slice(&bytes).with_context(|| format!("malformed {name}"))
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn dataset_csv(samples: &[TgoSample]) -> Vec<u8> {
    csv_bytes(
        &["v", "gamma", "x", "y", "tgo"],
        samples
            .iter()
            .map(|s| vec![f(s.v), f(s.gamma), f(s.x), f(s.y), f(s.t_go)]),
    )
}

pub fn parse_dataset_csv(bytes: &[u8]) -> anyhow::Result<Vec<TgoSample>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != ["v", "gamma", "x", "y", "tgo"] {
        bail!(
            "dataset header must be v,gamma,x,y,tgo, found {}",
            header.join(",")
        );
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("dataset row {}", i + 1))?;
        if vals.len() != 5 || !vals.iter().all(|v| v.is_finite()) {
            bail!("dataset row {}: expected five finite values", i + 1);
        }
        samples.push(TgoSample {
            v: vals[0],
            gamma: vals[1],
            x: vals[2],
            y: vals[3],
            t_go: vals[4],
        });
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Means {
    pub v: f64,
    pub gamma: f64,
    pub x: f64,
    pub y: f64,
}

impl From<Normalizer> for Means {
    fn from(n: Normalizer) -> Self {
        Self {
            v: n.mean_v,
            gamma: n.mean_gamma,
            x: n.mean_x,
            y: n.mean_y,
        }
    }
}

impl Means {
    pub fn normalizer(&self) -> anyhow::Result<Normalizer> {
        Ok(Normalizer::new(self.v, self.gamma, self.x, self.y)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub config_hash: String,
    pub trajectories: usize,
    pub hits: usize,
    pub discarded: usize,
    pub samples: usize,
    pub means: Means,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorMeta {
    pub weights: String,
    pub layer_sizes: Vec<usize>,
    pub normalizer: Means,
    pub train: TrainSettings,
    pub train_ratio: f64,
    pub split_seed: u64,
    pub final_loss: Option<f64>,
}

pub fn load_predictor(dir: &Path) -> anyhow::Result<(TgoPredictor, PredictorMeta)> {
    let meta: PredictorMeta = read_json(dir, PREDICTOR_META)?;
    let (net, _) = codec::decode(&read(dir, &meta.weights)?)
        .with_context(|| format!("corrupt weight file {}", meta.weights))?;
    if net.layer_sizes() != meta.layer_sizes.as_slice() {
        bail!("predictor weight file does not match {PREDICTOR_META}");
    }
    let predictor = TgoPredictor {
        net,
        normalizer: meta.normalizer.normalizer()?,
    };
    Ok((predictor, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedMeta {
    pub seed: u64,
    pub episode: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoMeta {
    pub actor: String,
    pub critic: String,
    pub log_std: f64,
    pub ppo: PpoSection,
    pub normalizer: Means,
    pub training_seeds: Vec<u64>,
    pub selected: SelectedMeta,
}

pub fn load_actor(dir: &Path) -> anyhow::Result<(GaussianPolicy, PpoMeta)> {
    let meta: PpoMeta = read_json(dir, PPO_META)?;
    let (net, _) = codec::decode(&read(dir, &meta.actor)?)
        .with_context(|| format!("corrupt weight file {}", meta.actor))?;
    Ok((
        GaussianPolicy {
            net,
            log_std: meta.log_std,
        },
        meta,
    ))
}

pub fn weights(net: &Mlp) -> Vec<u8> {
    codec::encode(net, None)
}

pub fn trajectory_csv(rollout: &Rollout, engagement: &Engagement) -> anyhow::Result<Vec<u8>> {
    let mut rows = Vec::with_capacity(rollout.trajectory.len());
    for p in &rollout.trajectory {
        let s = p.state;
        let los = los_geometry(&s, engagement)?;
        rows.push(vec![
            f(s.time),
            f(s.x),
            f(s.y),
            f(s.speed),
            f(s.gamma),
            f(p.command.baseline),
            f(p.command.bias),
            f(p.command.total),
            f(los.range),
            f(los.los_angle),
        ]);
    }
    Ok(csv_bytes(
        &["t", "x", "y", "v", "gamma", "a0", "ab", "aM", "r", "lambda"],
        rows.into_iter(),
    ))
}

pub fn reward_history_csv(history: &[EpisodeLog]) -> Vec<u8> {
    csv_bytes(
        &["episode", "mean_reward", "steps", "outcome"],
        history.iter().map(|e| {
            vec![
                e.episode.to_string(),
                f(e.mean_reward),
                e.steps.to_string(),
                e.outcome.as_str().to_owned(),
            ]
        }),
    )
}

pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    csv_bytes(header, rows.into_iter())
}

pub fn num(x: f64) -> String {
    f(x)
}
