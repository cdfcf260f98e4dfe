use std::path::PathBuf;

use rand::Rng as _;

use super::{LatentPrior, TrainLog, TrainRecord};
use crate::error::{ensure_dim, Error, Result};
use crate::numcore::{
    backward_into, clip_weights, forward_into, init_params, predict, save_checkpoint, AdamState,
    Activation, ModelRole, NetworkSpec, ParamVector, Tape,
};
use crate::seed::{self, Rng};

/// Floor applied to the arguments of `log` in the vanilla GAN loss.
pub const LOG_FLOOR: f64 = 1e-7;

/// A generator `G_θ : R^k → R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorModel {
    pub spec: NetworkSpec,
    pub params: ParamVector,
    pub latent_prior: LatentPrior,
}

impl GeneratorModel {
    pub fn new(spec: NetworkSpec, params: ParamVector, latent_prior: LatentPrior) -> Result<Self> {
        ensure_dim(spec.param_count(), params.len())?;
        Ok(GeneratorModel {
            spec,
            params,
            latent_prior,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        predict(&self.spec, &self.params, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CriticMode {
    /// Identity measuring function, weight-clipped critic.
    Wasserstein,
    /// Sigmoid discriminator with log loss.
    Vanilla,
}

/// The critic (WGAN) or discriminator (vanilla GAN) `D_φ : R^d → R`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticModel {
    pub spec: NetworkSpec,
    pub params: ParamVector,
    pub mode: CriticMode,
}

impl CriticModel {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(predict(&self.spec, &self.params, x)?[0])
    }
}

/// Hyperparameters of adversarial training.
#[derive(Clone, Debug, PartialEq)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub latent_prior: LatentPrior,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// `sigmoid` for image-like data in `[0,1]`, `identity` for unbounded data.
    pub generator_output: Activation,
    pub steps: usize,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    /// Weight-clipping constant of the Wasserstein critic.
    pub clip: f64,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub l2_reg: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// When set, generator and critic checkpoints are written here.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            latent_dim: 16,
            latent_prior: LatentPrior::StandardNormal,
            generator_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            generator_output: Activation::Sigmoid,
            steps: 2000,
            batch_size: 64,
            critic_steps: 5,
            clip: 0.01,
            generator_lr: 1e-3,
            critic_lr: 1e-4,
            l2_reg: 1e-4,
            seed: 0,
            checkpoint_every: 100,
            checkpoint_dir: None,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.batch_size == 0 || self.critic_steps == 0 {
            return bad("batch_size and critic_steps must be positive");
        }
        if !(self.clip > 0.0) {
            return bad("clip constant must be positive");
        }
        if !(self.generator_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.l2_reg >= 0.0) {
            return bad("l2_reg must be nonnegative");
        }
        Ok(())
    }
}

/// Everything produced by a training run.
#[derive(Clone, Debug)]
pub struct GanOutcome {
    pub generator: GeneratorModel,
    pub critic: CriticModel,
    pub log: TrainLog,
}

/// Alternating critic/generator optimisation that can be resumed in chunks.
pub struct GanTrainer {
    cfg: GanConfig,
    mode: CriticMode,
    generator: GeneratorModel,
    critic: CriticModel,
    gen_opt: AdamState,
    critic_opt: AdamState,
    rng: Rng,
    step: usize,
    log: TrainLog,
}

impl GanTrainer {
    pub fn new(cfg: &GanConfig, mode: CriticMode, data_dim: usize) -> Result<Self> {
        cfg.validate()?;
        let gen_spec = NetworkSpec::mlp(
            cfg.latent_dim,
            &cfg.generator_hidden,
            data_dim,
            Activation::Relu,
            cfg.generator_output,
        )?
        .with_l2(cfg.l2_reg)?;
        let critic_out = match mode {
            CriticMode::Wasserstein => Activation::Identity,
            CriticMode::Vanilla => Activation::Sigmoid,
        };
        let critic_spec =
            NetworkSpec::mlp(data_dim, &cfg.critic_hidden, 1, Activation::Relu, critic_out)?
                .with_l2(cfg.l2_reg)?;
        let gen_params = init_params(&gen_spec, seed::derive(cfg.seed, "gan/generator-init", 0));
        let mut critic_params =
            init_params(&critic_spec, seed::derive(cfg.seed, "gan/critic-init", 0));
        if mode == CriticMode::Wasserstein {
            clip_weights(&mut critic_params, cfg.clip);
        }
        Ok(GanTrainer {
            gen_opt: AdamState::new(gen_params.len(), cfg.generator_lr),
            critic_opt: AdamState::new(critic_params.len(), cfg.critic_lr),
            generator: GeneratorModel {
                spec: gen_spec,
                params: gen_params,
                latent_prior: cfg.latent_prior,
            },
            critic: CriticModel {
                spec: critic_spec,
                params: critic_params,
                mode,
            },
            rng: seed::rng_for(cfg.seed, "gan/train", 0),
            step: 0,
            log: TrainLog::default(),
            cfg: cfg.clone(),
            mode,
        })
    }

    pub fn generator(&self) -> &GeneratorModel {
        &self.generator
    }

    pub fn critic(&self) -> &CriticModel {
        &self.critic
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Generator updates performed so far.
    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn into_outcome(self) -> GanOutcome {
        GanOutcome {
            generator: self.generator,
            critic: self.critic,
            log: self.log,
        }
    }

    /// Runs `steps` generator updates (each preceded by `critic_steps` critic
    /// updates) on minibatches drawn with replacement from `data`.
    pub fn train(&mut self, data: &[Vec<f64>], steps: usize) -> Result<()> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("training data is empty".into()));
        }
        for row in data {
            ensure_dim(self.generator.output_dim(), row.len())?;
        }
        let mut scratch = Scratch::default();
        for _ in 0..steps {
            let mut critic_loss = 0.0;
            for _ in 0..self.cfg.critic_steps {
                critic_loss = self.critic_update(data, &mut scratch)?;
            }
            let gen_loss = self.generator_update(&mut scratch)?;
            self.step += 1;
            if !(critic_loss.is_finite() && gen_loss.is_finite()) {
                return Err(Error::Diverged(format!(
                    "gan step {}: generator loss {gen_loss}, critic loss {critic_loss}",
                    self.step
                )));
            }
            self.log.push(TrainRecord {
                step: self.step,
                generator_loss: gen_loss,
                critic_or_kl_loss: critic_loss,
                recon_loss: None,
            });
            if self.cfg.checkpoint_every > 0 && self.step % self.cfg.checkpoint_every == 0 {
                self.checkpoint()?;
            }
        }
        Ok(())
    }

    fn checkpoint(&mut self) -> Result<()> {
        self.log.checkpoints.push(self.step);
        if let Some(dir) = &self.cfg.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            save_checkpoint(
                dir.join(format!("generator_step{:06}.glnk", self.step)),
                ModelRole::Generator,
                &self.generator.spec,
                &self.generator.params,
            )?;
            save_checkpoint(
                dir.join(format!("critic_step{:06}.glnk", self.step)),
                ModelRole::Critic,
                &self.critic.spec,
                &self.critic.params,
            )?;
        }
        Ok(())
    }

    /// One critic update; returns the critic loss it descended on, without the
    /// L2 penalty.
    fn critic_update(&mut self, data: &[Vec<f64>], s: &mut Scratch) -> Result<f64> {
        let b = self.cfg.batch_size;
        let inv_b = 1.0 / b as f64;
        let spec = &self.critic.spec;
        s.critic_grad.clear();
        s.critic_grad.resize(spec.param_count(), 0.0);
        let mut loss = 0.0;
        for _ in 0..b {
            let x = &data[self.rng.gen_range(0..data.len())];
            let z = self.generator.latent_prior.sample(&mut self.rng, self.cfg.latent_dim);
            forward_into(&self.generator.spec, &self.generator.params, &z, &mut s.gen_tape)?;
            let fake = s.gen_tape.output().to_vec();

            forward_into(spec, &self.critic.params, x, &mut s.critic_tape)?;
            let d_real = s.critic_tape.output()[0];
            let (l, g) = match self.mode {
                CriticMode::Wasserstein => (-d_real, -1.0),
                CriticMode::Vanilla => neg_log(d_real),
            };
            loss += l * inv_b;
            backward_into(
                spec,
                &self.critic.params,
                &s.critic_tape,
                &[g * inv_b],
                Some(&mut s.critic_grad),
            )?;

            forward_into(spec, &self.critic.params, &fake, &mut s.critic_tape)?;
            let d_fake = s.critic_tape.output()[0];
            let (l, g) = match self.mode {
                CriticMode::Wasserstein => (d_fake, 1.0),
                CriticMode::Vanilla => {
                    let (l, g) = neg_log(1.0 - d_fake);
                    (l, -g)
                }
            };
            loss += l * inv_b;
            backward_into(
                spec,
                &self.critic.params,
                &s.critic_tape,
                &[g * inv_b],
                Some(&mut s.critic_grad),
            )?;
        }
        spec.add_l2_grad(&self.critic.params, &mut s.critic_grad);
        crate::numcore::adam_step(&mut self.critic.params, &s.critic_grad, &mut self.critic_opt)
            .map_err(|e| self.diverged("critic", e))?;
        if self.mode == CriticMode::Wasserstein {
            clip_weights(&mut self.critic.params, self.cfg.clip);
        }
        Ok(loss)
    }

    fn generator_update(&mut self, s: &mut Scratch) -> Result<f64> {
        let b = self.cfg.batch_size;
        let inv_b = 1.0 / b as f64;
        let gspec = &self.generator.spec;
        s.gen_grad.clear();
        s.gen_grad.resize(gspec.param_count(), 0.0);
        let mut loss = 0.0;
        for _ in 0..b {
            let z = self.generator.latent_prior.sample(&mut self.rng, self.cfg.latent_dim);
            forward_into(gspec, &self.generator.params, &z, &mut s.gen_tape)?;
            forward_into(
                &self.critic.spec,
                &self.critic.params,
                s.gen_tape.output(),
                &mut s.critic_tape,
            )?;
            let d = s.critic_tape.output()[0];
            // Non-saturating generator loss for the vanilla GAN.
            let (l, g) = match self.mode {
                CriticMode::Wasserstein => (-d, -1.0),
                CriticMode::Vanilla => neg_log(d),
            };
            loss += l * inv_b;
            let dx = backward_into(
                &self.critic.spec,
                &self.critic.params,
                &s.critic_tape,
                &[g * inv_b],
                None,
            )?;
            backward_into(
                gspec,
                &self.generator.params,
                &s.gen_tape,
                &dx,
                Some(&mut s.gen_grad),
            )?;
        }
        gspec.add_l2_grad(&self.generator.params, &mut s.gen_grad);
        crate::numcore::adam_step(&mut self.generator.params, &s.gen_grad, &mut self.gen_opt)
            .map_err(|e| self.diverged("generator", e))?;
        Ok(loss)
    }

    fn diverged(&self, who: &str, e: Error) -> Error {
        match e {
            Error::Diverged(msg) => {
                Error::Diverged(format!("gan step {}: {who} update: {msg}", self.step + 1))
            }
            other => other,
        }
    }
}

#[derive(Default)]
struct Scratch {
    gen_tape: Tape,
    critic_tape: Tape,
    gen_grad: Vec<f64>,
    critic_grad: Vec<f64>,
}

/// `−log(max(p, floor))` and its derivative with respect to `p`.
fn neg_log(p: f64) -> (f64, f64) {
    if p > LOG_FLOOR {
        (-p.ln(), -1.0 / p)
    } else {
        (-LOG_FLOOR.ln(), 0.0)
    }
}

/// Trains a Wasserstein GAN with a weight-clipped critic.
pub fn train_wgan(data: &[Vec<f64>], cfg: &GanConfig) -> Result<GanOutcome> {
    train_gan(data, cfg, CriticMode::Wasserstein)
}

/// Trains a GAN with a sigmoid discriminator and log loss.
pub fn train_gan_vanilla(data: &[Vec<f64>], cfg: &GanConfig) -> Result<GanOutcome> {
    train_gan(data, cfg, CriticMode::Vanilla)
}

fn train_gan(data: &[Vec<f64>], cfg: &GanConfig, mode: CriticMode) -> Result<GanOutcome> {
    let dim = data
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("training data is empty".into()))?;
    let mut trainer = GanTrainer::new(cfg, mode, dim)?;
    trainer.train(data, cfg.steps)?;
    Ok(trainer.into_outcome())
}

/// Value of the vanilla objective `E[log D(x)] + E[log(1 − D(G(z)))]` given
/// discriminator outputs on real and generated samples.
pub fn vanilla_objective(d_real: &[f64], d_fake: &[f64]) -> f64 {
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&p| f(p)).sum::<f64>() / v.len() as f64;
    mean(d_real, &|p| p.max(LOG_FLOOR).ln()) + mean(d_fake, &|p| (1.0 - p).max(LOG_FLOOR).ln())
}

/// Fraction of samples the discriminator labels correctly at the 0.5 cut:
/// real samples should score above it, generated ones below.
pub fn critic_accuracy(critic: &CriticModel, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    let cut = match critic.mode {
        CriticMode::Vanilla => 0.5,
        CriticMode::Wasserstein => 0.0,
    };
    let mut correct = 0usize;
    for x in real {
        correct += (critic.score(x)? > cut) as usize;
    }
    for x in fake {
        correct += (critic.score(x)? < cut) as usize;
    }
    Ok(correct as f64 / (real.len() + fake.len()) as f64)
}

/// Draws `count` samples `G(z)`, `z` from the generator's latent prior.
pub fn sample_generator(model: &GeneratorModel, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed, "gan/sample", 0);
    let mut tape = Tape::default();
    (0..count)
        .map(|_| {
            let z = model.latent_prior.sample(&mut rng, model.latent_dim());
            forward_into(&model.spec, &model.params, &z, &mut tape)?;
            Ok(tape.output().to_vec())
        })
        .collect()
}
