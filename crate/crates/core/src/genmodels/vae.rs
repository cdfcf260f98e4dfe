use std::path::PathBuf;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{TrainLog, TrainRecord};
use crate::error::{ensure_dim, Error, Result};
use crate::numcore::{
    adam_step, backward_into, forward_into, init_params, predict, save_checkpoint, Activation,
    AdamState, ModelRole, NetworkSpec, ParamVector, Tape,
};
use crate::seed;

/// Encoder `q_φ` producing `(μ, log σ²)` and decoder `g_θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    pub encoder_spec: NetworkSpec,
    pub encoder_params: ParamVector,
    pub decoder_spec: NetworkSpec,
    pub decoder_params: ParamVector,
}

impl VaeModel {
    pub fn new(
        encoder_spec: NetworkSpec,
        encoder_params: ParamVector,
        decoder_spec: NetworkSpec,
        decoder_params: ParamVector,
    ) -> Result<Self> {
        let k = decoder_spec.input_dim();
        ensure_dim(2 * k, encoder_spec.output_dim())?;
        ensure_dim(encoder_spec.input_dim(), decoder_spec.output_dim())?;
        ensure_dim(encoder_spec.param_count(), encoder_params.len())?;
        ensure_dim(decoder_spec.param_count(), decoder_params.len())?;
        Ok(VaeModel {
            encoder_spec,
            encoder_params,
            decoder_spec,
            decoder_params,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder_spec.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.decoder_spec.output_dim()
    }

    /// Posterior mean and log-variance for `x`.
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut out = predict(&self.encoder_spec, &self.encoder_params, x)?;
        let logvar = out.split_off(self.latent_dim());
        Ok((out, logvar))
    }
}

/// `g_θ(z)`: the only part of a VAE an attacker is shown.
pub fn vae_decode(model: &VaeModel, z: &[f64]) -> Result<Vec<f64>> {
    predict(&model.decoder_spec, &model.decoder_params, z)
}

pub fn vae_encode_mean(model: &VaeModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(model.encode(x)?.0)
}

/// `KL(N(μ, σ²) ‖ N(0, 1)) = ½ Σ_j (μ_j² + σ_j² − 1 − log σ_j²)`
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// `z = μ + σ·ε`
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub decoder_output: Activation,
    /// Standard deviation of the isotropic Gaussian likelihood; the
    /// reconstruction term is `‖x − g(z)‖² / (2·std²)`.
    pub likelihood_std: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            latent_dim: 16,
            encoder_hidden: vec![128, 128],
            decoder_hidden: vec![128, 128],
            decoder_output: Activation::Sigmoid,
            likelihood_std: 0.1,
            steps: 2000,
            batch_size: 64,
            learning_rate: 1e-3,
            l2_reg: 1e-4,
            seed: 0,
            checkpoint_every: 100,
            checkpoint_dir: None,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "latent_dim and batch_size must be positive".into(),
            ));
        }
        if !(self.likelihood_std > 0.0 && self.learning_rate > 0.0 && self.l2_reg >= 0.0) {
            return Err(Error::InvalidArgument(
                "likelihood_std and learning_rate must be positive, l2_reg nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct VaeOutcome {
    pub model: VaeModel,
    pub log: TrainLog,
}

/// Minimises squared-error reconstruction plus the closed-form KL term, with a
/// fresh reparameterised sample in every forward pass.
pub fn train_vae(data: &[Vec<f64>], cfg: &VaeConfig) -> Result<VaeOutcome> {
    cfg.validate()?;
    let d = data
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("training data is empty".into()))?;
    for row in data {
        ensure_dim(d, row.len())?;
    }
    let k = cfg.latent_dim;
    let enc_spec = NetworkSpec::mlp(d, &cfg.encoder_hidden, 2 * k, Activation::Relu, Activation::Identity)?
        .with_l2(cfg.l2_reg)?;
    let dec_spec = NetworkSpec::mlp(k, &cfg.decoder_hidden, d, Activation::Relu, cfg.decoder_output)?
        .with_l2(cfg.l2_reg)?;
    let mut model = VaeModel {
        encoder_params: init_params(&enc_spec, seed::derive(cfg.seed, "vae/encoder-init", 0)),
        decoder_params: init_params(&dec_spec, seed::derive(cfg.seed, "vae/decoder-init", 0)),
        encoder_spec: enc_spec,
        decoder_spec: dec_spec,
    };
    let mut enc_opt = AdamState::new(model.encoder_params.len(), cfg.learning_rate);
    let mut dec_opt = AdamState::new(model.decoder_params.len(), cfg.learning_rate);
    let mut rng = seed::rng_for(cfg.seed, "vae/train", 0);
    let mut log = TrainLog::default();

    let inv_var = 1.0 / (cfg.likelihood_std * cfg.likelihood_std);
    let inv_b = 1.0 / cfg.batch_size as f64;
    let mut enc_tape = Tape::default();
    let mut dec_tape = Tape::default();
    let mut enc_grad = vec![0.0; model.encoder_params.len()];
    let mut dec_grad = vec![0.0; model.decoder_params.len()];
    let mut eps = vec![0.0; k];

    for step in 1..=cfg.steps {
        enc_grad.iter_mut().for_each(|g| *g = 0.0);
        dec_grad.iter_mut().for_each(|g| *g = 0.0);
        let (mut recon_total, mut kl_total) = (0.0, 0.0);
        for _ in 0..cfg.batch_size {
            let x = &data[rng.gen_range(0..data.len())];
            forward_into(&model.encoder_spec, &model.encoder_params, x, &mut enc_tape)?;
            let (mu, logvar) = enc_tape.output().split_at(k);
            eps.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
            let z = reparameterize(mu, logvar, &eps);
            kl_total += kl_divergence(mu, logvar);

            forward_into(&model.decoder_spec, &model.decoder_params, &z, &mut dec_tape)?;
            let xhat = dec_tape.output();
            let mut out_grad = Vec::with_capacity(d);
            let mut sq = 0.0;
            for (xh, xv) in xhat.iter().zip(x) {
                let r = xh - xv;
                sq += r * r;
                out_grad.push(r * inv_var * inv_b);
            }
            recon_total += 0.5 * sq * inv_var;
            let dz = backward_into(
                &model.decoder_spec,
                &model.decoder_params,
                &dec_tape,
                &out_grad,
                Some(&mut dec_grad),
            )?;

            let mut enc_out_grad = vec![0.0; 2 * k];
            for j in 0..k {
                let sigma = (0.5 * logvar[j]).exp();
                enc_out_grad[j] = dz[j] + mu[j] * inv_b;
                enc_out_grad[k + j] =
                    dz[j] * 0.5 * sigma * eps[j] + 0.5 * (logvar[j].exp() - 1.0) * inv_b;
            }
            backward_into(
                &model.encoder_spec,
                &model.encoder_params,
                &enc_tape,
                &enc_out_grad,
                Some(&mut enc_grad),
            )?;
        }
        let recon = recon_total * inv_b;
        let kl = kl_total * inv_b;
        if !(recon.is_finite() && kl.is_finite()) {
            return Err(Error::Diverged(format!(
                "vae step {step}: reconstruction {recon}, kl {kl}"
            )));
        }
        model.encoder_spec.add_l2_grad(&model.encoder_params, &mut enc_grad);
        model.decoder_spec.add_l2_grad(&model.decoder_params, &mut dec_grad);
        adam_step(&mut model.encoder_params, &enc_grad, &mut enc_opt)
            .and_then(|_| adam_step(&mut model.decoder_params, &dec_grad, &mut dec_opt))
            .map_err(|e| Error::Diverged(format!("vae step {step}: {e}")))?;

        log.push(TrainRecord {
            step,
            generator_loss: recon + kl,
            critic_or_kl_loss: kl,
            recon_loss: Some(recon),
        });
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            log.checkpoints.push(step);
            if let Some(dir) = &cfg.checkpoint_dir {
                std::fs::create_dir_all(dir)?;
                save_checkpoint(
                    dir.join(format!("encoder_step{step:06}.glnk")),
                    ModelRole::Encoder,
                    &model.encoder_spec,
                    &model.encoder_params,
                )?;
                save_checkpoint(
                    dir.join(format!("decoder_step{step:06}.glnk")),
                    ModelRole::Decoder,
                    &model.decoder_spec,
                    &model.decoder_params,
                )?;
            }
        }
    }
    Ok(VaeOutcome { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(kl_divergence(&[1.0], &[0.0]), 0.5);
        // σ² = e: ½(e − 1 − 1)
        assert!((kl_divergence(&[0.0], &[1.0]) - 0.5 * (1f64.exp() - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_returns_the_mean() {
        let mu = [0.3, -1.2, 4.0];
        assert_eq!(reparameterize(&mu, &[0.7, -3.0, 2.0], &[0.0; 3]), mu.to_vec());
        assert_eq!(reparameterize(&[1.0], &[2f64.ln() * 2.0], &[1.5]), vec![1.0 + 2.0 * 1.5]);
    }

    #[test]
    fn decoder_dimension_is_checked() {
        let enc = NetworkSpec::mlp(4, &[3], 4, Activation::Relu, Activation::Identity).unwrap();
        let dec = NetworkSpec::mlp(2, &[3], 4, Activation::Relu, Activation::Sigmoid).unwrap();
        let model = VaeModel::new(enc.clone(), init_params(&enc, 0), dec.clone(), init_params(&dec, 1)).unwrap();
        assert_eq!(vae_decode(&model, &[0.1, 0.2]).unwrap().len(), 4);
        assert!(matches!(
            vae_decode(&model, &[0.1, 0.2, 0.3]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(VaeModel::new(dec.clone(), init_params(&dec, 0), dec.clone(), init_params(&dec, 1)).is_err());
    }

    #[test]
    fn zero_weight_decoder_is_constant() {
        let enc = NetworkSpec::mlp(3, &[], 4, Activation::Relu, Activation::Identity).unwrap();
        let dec = NetworkSpec::new(vec![2, 3], Activation::Relu, Activation::Identity).unwrap();
        let mut p = vec![0.0; dec.param_count()];
        p[6..].copy_from_slice(&[0.1, 0.2, 0.3]);
        let dec_params = ParamVector::from_vec(&dec, p).unwrap();
        let model = VaeModel::new(enc.clone(), init_params(&enc, 0), dec, dec_params).unwrap();
        for z in [[0.0, 0.0], [5.0, -2.0]] {
            assert_eq!(vae_decode(&model, &z).unwrap(), vec![0.1, 0.2, 0.3]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(VaeConfig { latent_dim: 0, ..VaeConfig::default() }.validate().is_err());
        assert!(VaeConfig { likelihood_std: 0.0, ..VaeConfig::default() }.validate().is_err());
        assert!(train_vae(&[], &VaeConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)) {
            let (mu, lv): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let kl = kl_divergence(&mu, &lv);
            prop_assert!(kl >= 0.0);
            let at_prior = mu.iter().chain(&lv).all(|x| *x == 0.0);
            prop_assert_eq!(kl == 0.0, at_prior);
        }
    }
}
