//! Experiment configuration, read from a TOML file.
//!
//! Defaults describe the desk-scale profile: 8×8 synthetic digits, a WGAN with
//! two hidden layers of 64 units and a one-layer attacker. Only
//! `model.latent_dim` has no default.

use std::fmt;
use std::path::{Path, PathBuf};

use comember::attacks::{AttackConfig, AttackMethod, GradientMode, LrSchedule};
use comember::genmodels::{GanConfig, LatentPrior, VaeConfig};
use comember::numcore::{Activation, OptimizerKind, DEFAULT_FD_STEP};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Serde through `Display` / `FromStr` for the library's option enums.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }

    pub mod list {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| s.parse().map_err(de::Error::custom))
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TableAttackComparison,
    RocVsDatasize,
    RocVsCoattackStrength,
    StrengthVsDatasizeFrontier,
    GeneralizationGapSweep,
    LearningCurve,
    DispersionProfile,
    AdversarialVsRandom,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::TableAttackComparison => "table_attack_comparison",
            ExperimentKind::RocVsDatasize => "roc_vs_datasize",
            ExperimentKind::RocVsCoattackStrength => "roc_vs_coattack_strength",
            ExperimentKind::StrengthVsDatasizeFrontier => "strength_vs_datasize_frontier",
            ExperimentKind::GeneralizationGapSweep => "generalization_gap_sweep",
            ExperimentKind::LearningCurve => "learning_curve",
            ExperimentKind::DispersionProfile => "dispersion_profile",
            ExperimentKind::AdversarialVsRandom => "adversarial_vs_random",
        })
    }
}

/// Nonmembers the adversarially trained model is attacked with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialNonmembers {
    /// The second-highest loss point of each selection batch: as hard to
    /// reproduce as the picks, but never trained on.
    RunnerUp,
    /// The held-out nonmembers the random control is attacked with.
    HeldOut,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Wgan,
    Vae,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Wgan => "wgan",
            ModelKind::Vae => "vae",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    /// Independent repetitions, each with its own seed derived from the master.
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub attack: AttackSettings,
    #[serde(default)]
    pub metrics: MetricConfig,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    SynthDigits {
        pool_size: usize,
        #[serde(default = "glyph_size")]
        glyph_size: usize,
    },
    GaussianMixture {
        components: usize,
        points_per_component: usize,
        dimension: usize,
        spread: f64,
    },
    Idx {
        images: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        /// Keep only the first `limit` images.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

fn glyph_size() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub latent_dim: Option<usize>,
    #[serde(with = "text")]
    pub latent_prior: LatentPrior,
    /// Generator layers; the VAE decoder uses the same widths.
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    #[serde(with = "text")]
    pub generator_output: Activation,
    pub steps: usize,
    pub batch_size: usize,
    pub critic_steps: usize,
    pub clip: f64,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub vae_lr: f64,
    pub likelihood_std: f64,
    pub l2_reg: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent_dim: None,
            latent_prior: LatentPrior::StandardNormal,
            generator_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            encoder_hidden: vec![64, 64],
            generator_output: Activation::Sigmoid,
            steps: 2000,
            batch_size: 32,
            critic_steps: 5,
            clip: 0.05,
            generator_lr: 1e-3,
            critic_lr: 1e-3,
            vae_lr: 1e-3,
            likelihood_std: 0.1,
            l2_reg: 1e-4,
        }
    }
}

impl ModelConfig {
    pub fn gan(&self, seed: u64) -> GanConfig {
        GanConfig {
            latent_dim: self.latent_dim.unwrap_or(0),
            latent_prior: self.latent_prior,
            generator_hidden: self.generator_hidden.clone(),
            critic_hidden: self.critic_hidden.clone(),
            generator_output: self.generator_output,
            steps: self.steps,
            batch_size: self.batch_size,
            critic_steps: self.critic_steps,
            clip: self.clip,
            generator_lr: self.generator_lr,
            critic_lr: self.critic_lr,
            l2_reg: self.l2_reg,
            seed,
            ..GanConfig::default()
        }
    }

    pub fn vae(&self, seed: u64) -> VaeConfig {
        VaeConfig {
            latent_dim: self.latent_dim.unwrap_or(0),
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.generator_hidden.clone(),
            decoder_output: self.generator_output,
            likelihood_std: self.likelihood_std,
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.vae_lr,
            l2_reg: self.l2_reg,
            seed,
            ..VaeConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    pub hidden: Vec<usize>,
    #[serde(with = "text")]
    pub activation: Activation,
    pub iterations: usize,
    pub restarts: usize,
    #[serde(with = "text")]
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    #[serde(with = "text")]
    pub lr_schedule: LrSchedule,
    pub projection_learning_rate: f64,
    #[serde(with = "text")]
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            hidden: vec![64],
            activation: Activation::Relu,
            iterations: 300,
            restarts: 2,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Cosine,
            projection_learning_rate: 1e-2,
            gradient_mode: GradientMode::WhiteBox,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

impl AttackSettings {
    pub fn config(&self, seed: u64) -> AttackConfig {
        AttackConfig {
            hidden: self.hidden.clone(),
            activation: self.activation,
            iterations: self.iterations,
            restarts: self.restarts,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            lr_schedule: self.lr_schedule,
            projection_learning_rate: self.projection_learning_rate,
            gradient_mode: self.gradient_mode,
            fd_step: self.fd_step,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub models: Vec<ModelKind>,
    #[serde(with = "text::list")]
    pub methods: Vec<AttackMethod>,
    /// Training-set sizes.
    pub sizes: Vec<usize>,
    /// Co-membership strengths for the attacker network.
    pub strengths: Vec<usize>,
    /// Evaluation members per model, capped at the training size.
    pub eval_members: usize,
    pub eval_nonmembers: usize,
    /// Generated samples searched by the nearest-neighbour baseline.
    pub nn_samples: usize,
    /// Generated samples whose dispersion is measured.
    pub dispersion_samples: usize,
    pub dispersion_ks: Vec<usize>,
    pub probe_steps: Vec<usize>,
    pub probe_size: usize,
    pub curve_windows: usize,
    /// Unseen candidates available to adversarial sampling.
    pub candidate_pool: usize,
    pub batch_size: usize,
    pub target_size: usize,
    pub finetune_steps: usize,
    pub adversarial_nonmembers: AdversarialNonmembers,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            models: vec![ModelKind::Wgan],
            methods: vec![AttackMethod::AttackerNet],
            sizes: vec![8, 64, 512],
            strengths: vec![1],
            eval_members: 64,
            eval_nonmembers: 64,
            nn_samples: 1000,
            dispersion_samples: 1000,
            dispersion_ks: vec![2, 4, 8, 16, 32],
            probe_steps: vec![0, 100, 200, 400, 800, 1200, 1600, 2000],
            probe_size: 32,
            curve_windows: 4,
            candidate_pool: 512,
            batch_size: 8,
            target_size: 32,
            finetune_steps: 200,
            adversarial_nonmembers: AdversarialNonmembers::RunnerUp,
        }
    }
}

impl MetricConfig {
    pub fn eval_members_for(&self, size: usize) -> usize {
        self.eval_members.min(size)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The canonical text written next to the results; its hash identifies the run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn dataset_len(&self) -> Option<usize> {
        match &self.dataset {
            DatasetConfig::SynthDigits { pool_size, .. } => Some(*pool_size),
            DatasetConfig::GaussianMixture {
                components,
                points_per_component,
                ..
            } => Some(components * points_per_component),
            DatasetConfig::Idx { limit, .. } => *limit,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let m = &self.metrics;
        let latent = self.model.latent_dim.ok_or_else(|| invalid("model.latent_dim is required"))?;
        if latent == 0 {
            return Err(invalid("model.latent_dim must be positive"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        match &self.dataset {
            DatasetConfig::SynthDigits { pool_size, glyph_size } => {
                if *pool_size == 0 || *glyph_size < 6 {
                    return Err(invalid("synth_digits needs pool_size ≥ 1 and glyph_size ≥ 6"));
                }
            }
            DatasetConfig::GaussianMixture {
                components,
                points_per_component,
                dimension,
                spread,
            } => {
                if *components == 0 || *points_per_component == 0 || *dimension == 0 || !(*spread >= 0.0)
                {
                    return Err(invalid("gaussian_mixture needs positive sizes and spread ≥ 0"));
                }
            }
            DatasetConfig::Idx { .. } => {}
        }
        self.model
            .gan(0)
            .validate()
            .and_then(|_| self.model.vae(0).validate())
            .and_then(|_| self.attack.config(0).validate())
            .map_err(|e| invalid(e.to_string()))?;
        if self.model.steps == 0 {
            return Err(invalid("model.steps must be positive"));
        }
        if m.models.is_empty() || m.methods.is_empty() {
            return Err(invalid("metrics.models and metrics.methods must be nonempty"));
        }
        if m.eval_nonmembers == 0 || m.eval_members == 0 {
            return Err(invalid("evaluation sets must be nonempty"));
        }

        use ExperimentKind::*;
        let needs_sizes = !matches!(self.kind, AdversarialVsRandom);
        if needs_sizes {
            if m.sizes.is_empty() || m.sizes.contains(&0) {
                return Err(invalid("metrics.sizes must be nonempty and positive"));
            }
            let mut sorted = m.sizes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted != m.sizes {
                return Err(invalid("metrics.sizes must be strictly increasing"));
            }
            if let Some(n) = self.dataset_len() {
                let largest = *m.sizes.last().unwrap();
                if largest + m.eval_nonmembers > n {
                    return Err(invalid(format!(
                        "dataset of {n} cannot hold {largest} training and {} held-out points",
                        m.eval_nonmembers
                    )));
                }
            }
        }
        if matches!(self.kind, LearningCurve | AdversarialVsRandom) && m.models != [ModelKind::Wgan] {
            return Err(invalid(format!("{} supports only metrics.models = [\"wgan\"]", self.kind)));
        }
        if matches!(self.kind, RocVsCoattackStrength | StrengthVsDatasizeFrontier | TableAttackComparison)
        {
            if m.strengths.is_empty() || m.strengths.contains(&0) {
                return Err(invalid("metrics.strengths must be nonempty and positive"));
            }
            let n = *m.strengths.iter().max().unwrap();
            for &s in &m.sizes {
                if m.eval_members_for(s) < n || m.eval_nonmembers < n {
                    return Err(invalid(format!(
                        "size {s} leaves too few evaluation points for strength {n}"
                    )));
                }
            }
        }
        match self.kind {
            GeneralizationGapSweep if m.sizes.len() < 2 => {
                return Err(invalid("a gap sweep needs at least two sizes"));
            }
            DispersionProfile | AdversarialVsRandom
                if m.dispersion_ks.is_empty()
                    || m.dispersion_ks.iter().any(|&k| k < 2 || k > m.dispersion_samples) =>
            {
                return Err(invalid("dispersion_ks must lie in [2, dispersion_samples]"));
            }
            LearningCurve => {
                if m.probe_steps.iter().any(|&s| s > self.model.steps) {
                    return Err(invalid("probe_steps beyond model.steps"));
                }
                if m.probe_size == 0 || m.curve_windows == 0 || m.probe_steps.len() < m.curve_windows {
                    return Err(invalid("learning curve needs probe_size ≥ 1 and a probe per window"));
                }
            }
            AdversarialVsRandom => {
                if m.batch_size == 0 || m.target_size == 0 {
                    return Err(invalid("adversarial batch_size and target_size must be positive"));
                }
                if m.adversarial_nonmembers == AdversarialNonmembers::RunnerUp && m.batch_size < 2 {
                    return Err(invalid("runner-up nonmembers need batch_size ≥ 2"));
                }
                if m.candidate_pool / m.batch_size < m.target_size {
                    return Err(invalid(format!(
                        "{} candidates give fewer than {} batches of {}",
                        m.candidate_pool, m.target_size, m.batch_size
                    )));
                }
                if let Some(n) = self.dataset_len() {
                    if m.candidate_pool + m.eval_nonmembers > n {
                        return Err(invalid("dataset too small for the candidate pool"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}
