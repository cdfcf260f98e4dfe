//! Generative models: WGAN / vanilla GAN and VAE trainers and samplers.

mod gan;
mod vae;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use gan::{
    critic_accuracy, sample_generator, train_gan_vanilla, train_wgan, vanilla_objective,
    CriticMode, CriticModel, GanConfig, GanOutcome, GanTrainer, GeneratorModel, LOG_FLOOR,
};
pub use vae::{
    kl_divergence, reparameterize, train_vae, vae_decode, vae_encode_mean, VaeConfig, VaeModel,
    VaeOutcome,
};

/// Distribution of the generator seed `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LatentPrior {
    StandardNormal,
    /// Uniform on `[0, 1)^k`.
    UniformUnit,
}

impl LatentPrior {
    pub fn sample<R: rand::Rng + ?Sized>(self, rng: &mut R, dim: usize) -> Vec<f64> {
        match self {
            LatentPrior::StandardNormal => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            LatentPrior::UniformUnit => (0..dim).map(|_| rng.gen::<f64>()).collect(),
        }
    }
}

impl fmt::Display for LatentPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatentPrior::StandardNormal => "standard_normal",
            LatentPrior::UniformUnit => "uniform_unit",
        })
    }
}

impl FromStr for LatentPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_normal" => Ok(LatentPrior::StandardNormal),
            "uniform_unit" => Ok(LatentPrior::UniformUnit),
            other => Err(Error::InvalidArgument(format!("unknown latent prior {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub generator_loss: f64,
    /// Critic loss for GANs, KL term for VAEs.
    pub critic_or_kl_loss: f64,
    pub recon_loss: Option<f64>,
}

/// Per-step losses and the steps at which checkpoints were taken.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub checkpoints: Vec<usize>,
}

impl TrainLog {
    pub(crate) fn push(&mut self, record: TrainRecord) {
        debug_assert!(self.records.last().map_or(true, |r| r.step < record.step));
        self.records.push(record);
    }

    pub fn generator_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.generator_loss).collect()
    }

    /// CSV with header `step,gen_loss,critic_or_kl_loss,recon_loss`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,gen_loss,critic_or_kl_loss,recon_loss")?;
        for r in &self.records {
            let recon = r.recon_loss.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.step, r.generator_loss, r.critic_or_kl_loss, recon)?;
        }
        Ok(())
    }
}
