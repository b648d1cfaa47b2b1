//! Experiment configuration file (TOML). Angles are in degrees, everything
//! else SI. Missing keys take their defaults; unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context};
use itcg_core::aero::{AeroRow, AeroTable, Airframe, DEFAULT_ROWS};
use itcg_core::dynamics::{Engagement, SimConfig, Simulator};
use itcg_core::experiment::SelectionConfig;
use itcg_core::ppo::PpoConfig;
use itcg_core::scenario::{DesiredTime, EngagementConfig, InitialRanges, Interval};
use itcg_core::tgo::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Master seed; every stage derives its own seed from it.
    pub seed: u64,
    pub initial: InitialSection,
    pub target: TargetSection,
    pub airframe: AirframeSection,
    pub aero: AeroSection,
    pub simulation: SimulationSection,
    pub desired_time: DesiredTimeSection,
    pub dataset: DatasetSection,
    pub predictor: PredictorSection,
    pub ppo: PpoSection,
    pub selection: SelectionSection,
    pub evaluation: EvaluationSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            initial: Default::default(),
            target: Default::default(),
            airframe: Default::default(),
            aero: Default::default(),
            simulation: Default::default(),
            desired_time: Default::default(),
            dataset: Default::default(),
            predictor: Default::default(),
            ppo: Default::default(),
            selection: Default::default(),
            evaluation: Default::default(),
        }
    }
}

/// Launch-state ranges, `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialSection {
    #[serde(deserialize_with = "exact")]
    pub x0: [f64; 2],
    #[serde(deserialize_with = "exact")]
    pub y0: [f64; 2],
    #[serde(deserialize_with = "exact")]
    pub v0: [f64; 2],
    #[serde(deserialize_with = "exact")]
    pub gamma0_deg: [f64; 2],
}

impl Default for InitialSection {
    fn default() -> Self {
        let r = InitialRanges::default();
        Self {
            x0: [r.x0.lo, r.x0.hi],
            y0: [r.y0.lo, r.y0.hi],
            v0: [r.v0.lo, r.v0.hi],
            gamma0_deg: [r.gamma0.lo.to_degrees(), r.gamma0.hi.to_degrees()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TargetSection {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirframeSection {
    pub mass: f64,
    pub ref_area: f64,
    pub gravity: f64,
    pub alpha_max_deg: f64,
}

impl Default for AirframeSection {
    fn default() -> Self {
        let a = Airframe::default();
        debug_assert_eq!(a.alpha_max, 15f64.to_radians());
        Self {
            mass: a.mass,
            ref_area: a.ref_area,
            gravity: a.gravity,
            alpha_max_deg: 15.0,
        }
    }
}

/// Aerodynamic table: inline rows `[mach, cl_alpha, cd0, cd_alpha2]`, or a
/// plain-text table file (relative paths resolve against the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeroSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_file: Option<String>,
    #[serde(deserialize_with = "exact_rows")]
    pub rows: Vec<[f64; 4]>,
}

impl Default for AeroSection {
    fn default() -> Self {
        Self {
            table_file: None,
            rows: DEFAULT_ROWS
                .iter()
                .map(|r| [r.mach, r.cl_alpha, r.cd0, r.cd_alpha2])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub dt_sim: f64,
    pub dt_guidance: f64,
    pub capture_radius: f64,
    pub t_max: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            dt_sim: s.dt_sim,
            dt_guidance: s.dt_guidance,
            capture_radius: s.capture_radius,
            t_max: s.t_max,
        }
    }
}

/// Desired impact time: a fixed value, or a uniform multiple of the predicted
/// PNG flight time at launch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesiredTimeSection {
    #[serde(deserialize_with = "exact")]
    pub ratio: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl Default for DesiredTimeSection {
    fn default() -> Self {
        Self {
            ratio: [1.1, 1.2],
            fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub trajectories: usize,
    pub train_ratio: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            train_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for PredictorSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            batch: t.batch,
            learning_rate: t.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoSection {
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma_discount: f64,
    pub buffer_size: usize,
    pub t_max_steps: usize,
    pub max_episodes: usize,
    #[serde(deserialize_with = "exact")]
    pub reward_weights: [f64; 3],
    pub eps_hat: f64,
    pub r_bar: f64,
    pub sigma_alt: f64,
    pub a_max: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub log_std_init: f64,
    pub actor_output_gain: f64,
    pub tgo_floor: f64,
}

impl Default for PpoSection {
    fn default() -> Self {
        Self::from_core(&PpoConfig::default())
    }
}

impl PpoSection {
    pub fn to_core(&self) -> PpoConfig {
        PpoConfig {
            clip_eps: self.clip_eps,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            gamma_discount: self.gamma_discount,
            buffer_size: self.buffer_size,
            t_max_steps: self.t_max_steps,
            max_episodes: self.max_episodes,
            reward_weights: self.reward_weights,
            eps_hat: self.eps_hat,
            r_bar: self.r_bar,
            sigma_alt: self.sigma_alt,
            a_max: self.a_max,
            epochs: self.epochs,
            minibatch: self.minibatch,
            log_std_init: self.log_std_init,
            actor_output_gain: self.actor_output_gain,
            tgo_floor: self.tgo_floor,
        }
    }

    pub fn from_core(p: &PpoConfig) -> Self {
        Self {
            clip_eps: p.clip_eps,
            actor_lr: p.actor_lr,
            critic_lr: p.critic_lr,
            gamma_discount: p.gamma_discount,
            buffer_size: p.buffer_size,
            t_max_steps: p.t_max_steps,
            max_episodes: p.max_episodes,
            reward_weights: p.reward_weights,
            eps_hat: p.eps_hat,
            r_bar: p.r_bar,
            sigma_alt: p.sigma_alt,
            a_max: p.a_max,
            epochs: p.epochs,
            minibatch: p.minibatch,
            log_std_init: p.log_std_init,
            actor_output_gain: p.actor_output_gain,
            tgo_floor: p.tgo_floor,
        }
    }
}

/// Training restarts and checkpoint selection for the corrector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSection {
    pub restarts: usize,
    pub interval: usize,
    pub runs: usize,
    pub seed: u64,
    pub miss_penalty: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let s = SelectionConfig::default();
        Self {
            restarts: 3,
            interval: s.interval,
            runs: s.runs,
            seed: s.seed,
            miss_penalty: s.miss_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    /// Desired impact times of the reference-engagement sweep, s.
    pub desired_times: Vec<f64>,
    /// Desired impact time of the four-law comparison, s.
    pub compare_td: f64,
    pub monte_carlo_runs: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            desired_times: (0..6).map(|k| 100.0 + 20.0 * k as f64).collect(),
            compare_td: 120.0,
            monte_carlo_runs: 50,
        }
    }
}

impl Config {
    /// Reads a config file, listing every unknown key in the error.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut cfg = Self::parse(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        if let Some(file) = &cfg.aero.table_file {
            let p = Path::new(file);
            let resolved = if p.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.to_path_buf()
            };
            let table_text = std::fs::read_to_string(&resolved)
                .with_context(|| format!("cannot read aero table {}", resolved.display()))?;
            let table = AeroTable::parse(&table_text)?;
            cfg.aero.rows = table
                .rows()
                .iter()
                .map(|r| [r.mach, r.cl_alpha, r.cd0, r.cd_alpha2])
                .collect();
            cfg.aero.table_file = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))?;
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 || self.selection.seed > i64::MAX as u64 {
            bail!("seeds must not exceed {}", i64::MAX);
        }
        self.engagement()?.validate()?;
        self.ppo.to_core().validate()?;
        if !(self.dataset.train_ratio > 0.0 && self.dataset.train_ratio < 1.0) {
            bail!("dataset.train_ratio must lie in (0, 1)");
        }
        if self.predictor.batch == 0 || !(self.predictor.learning_rate > 0.0) {
            bail!("predictor.batch and predictor.learning_rate must be positive");
        }
        if self.selection.restarts == 0 || self.selection.runs == 0 {
            bail!("selection.restarts and selection.runs must be positive");
        }
        Ok(())
    }

    pub fn aero_table(&self) -> anyhow::Result<AeroTable> {
        let rows = self
            .aero
            .rows
            .iter()
            .map(|r| AeroRow {
                mach: r[0],
                cl_alpha: r[1],
                cd0: r[2],
                cd_alpha2: r[3],
            })
            .collect();
        Ok(AeroTable::new(rows)?)
    }

    pub fn engagement(&self) -> anyhow::Result<EngagementConfig> {
        let i = &self.initial;
        let ranges = InitialRanges {
            x0: Interval::new(i.x0[0], i.x0[1]),
            y0: Interval::new(i.y0[0], i.y0[1]),
            v0: Interval::new(i.v0[0], i.v0[1]),
            gamma0: Interval::new(i.gamma0_deg[0].to_radians(), i.gamma0_deg[1].to_radians()),
        };
        let a = &self.airframe;
        let s = &self.simulation;
        let simulator = Simulator {
            airframe: Airframe {
                mass: a.mass,
                ref_area: a.ref_area,
                alpha_max: a.alpha_max_deg.to_radians(),
                gravity: a.gravity,
            },
            table: self.aero_table()?,
            engagement: Engagement {
                target_x: self.target.x,
                target_y: self.target.y,
            },
            config: SimConfig {
                dt_sim: s.dt_sim,
                dt_guidance: s.dt_guidance,
                capture_radius: s.capture_radius,
                t_max: s.t_max,
            },
        };
        let desired_time = match self.desired_time.fixed {
            Some(t) => DesiredTime::Fixed(t),
            None => DesiredTime::RatioBand(Interval::new(
                self.desired_time.ratio[0],
                self.desired_time.ratio[1],
            )),
        };
        Ok(EngagementConfig {
            ranges,
            simulator,
            desired_time,
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.predictor.steps,
            batch: self.predictor.batch,
            learning_rate: self.predictor.learning_rate,
            seed,
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            interval: self.selection.interval,
            runs: self.selection.runs,
            seed: self.selection.seed,
            miss_penalty: self.selection.miss_penalty,
        }
    }
}

fn exact<'de, D, const N: usize>(d: D) -> Result<[f64; N], D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = Vec::<f64>::deserialize(d)?;
    let len = v.len();
    v.try_into()
        .map_err(|_| serde::de::Error::invalid_length(len, &format!("{N} values").as_str()))
}

fn exact_rows<'de, D>(d: D) -> Result<Vec<[f64; 4]>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Vec::<Vec<f64>>::deserialize(d)?
        .into_iter()
        .map(|row| {
            let len = row.len();
            row.try_into()
                .map_err(|_| serde::de::Error::invalid_length(len, &"4 values per aero row"))
        })
        .collect()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
