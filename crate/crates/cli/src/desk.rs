//! Building blocks shared by the pipelines: data, trained models, evaluation
//! units and the three attack methods.

use std::fs;
use std::path::Path;

use comember::attacks::{
    attack_losses, co_attack_losses, nearest_neighbor_losses, projection_losses, AttackConfig,
    AttackMethod, AttackRecord, Generator, VaeDecoder,
};
use comember::datalab::{
    group_eval, load_idx, synth_digits, synth_gaussian_mixture, Dataset, Membership, MembershipSplit,
};
use comember::genmodels::{
    sample_generator, train_vae, train_wgan, GeneratorModel, LatentPrior, TrainLog, VaeModel,
};
use comember::numcore::{load_checkpoint, save_checkpoint, ModelRole};
use comember::seed;

use crate::config::{DatasetConfig, ModelConfig, ModelKind};
use crate::error::{CliError, CliResult};

/// A trained generative model; attacks only ever see its generator/decoder.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Wgan(GeneratorModel),
    Vae(VaeModel),
}

impl Generator for TrainedModel {
    fn latent_dim(&self) -> usize {
        match self {
            TrainedModel::Wgan(g) => g.latent_dim(),
            TrainedModel::Vae(v) => v.latent_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            TrainedModel::Wgan(g) => g.output_dim(),
            TrainedModel::Vae(v) => v.data_dim(),
        }
    }

    fn latent_prior(&self) -> LatentPrior {
        match self {
            TrainedModel::Wgan(g) => g.latent_prior,
            TrainedModel::Vae(_) => LatentPrior::StandardNormal,
        }
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        match self {
            TrainedModel::Wgan(g) => Generator::generate(g, z),
            TrainedModel::Vae(v) => VaeDecoder(v).generate(z),
        }
    }

    fn pullback(
        &self,
        z: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        match self {
            TrainedModel::Wgan(g) => g.pullback(z, output_grad),
            TrainedModel::Vae(v) => VaeDecoder(v).pullback(z, output_grad),
        }
    }
}

/// The data an experiment draws training and evaluation points from.
pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> CliResult<Dataset> {
    let ds = match cfg {
        DatasetConfig::SynthDigits {
            pool_size,
            glyph_size,
        } => synth_digits(*pool_size, *glyph_size, seed)?,
        DatasetConfig::GaussianMixture {
            components,
            points_per_component,
            dimension,
            spread,
        } => synth_gaussian_mixture(*components, *points_per_component, *dimension, *spread, seed)?,
        DatasetConfig::Idx {
            images,
            labels,
            limit,
        } => {
            let ds = load_idx(images, labels.as_deref())?;
            match limit {
                Some(n) if *n < ds.len() => {
                    let ids: Vec<u64> = ds.ids()[..*n].to_vec();
                    Dataset::with_ids(ds.select(&ids)?, ids)?
                }
                _ => ds,
            }
        }
    };
    Ok(ds)
}

pub fn train_model(
    kind: ModelKind,
    data: &[Vec<f64>],
    cfg: &ModelConfig,
    seed: u64,
) -> CliResult<(TrainedModel, TrainLog)> {
    Ok(match kind {
        ModelKind::Wgan => {
            let out = train_wgan(data, &cfg.gan(seed))?;
            (TrainedModel::Wgan(out.generator), out.log)
        }
        ModelKind::Vae => {
            let out = train_vae(data, &cfg.vae(seed))?;
            (TrainedModel::Vae(out.model), out.log)
        }
    })
}

/// Checkpoint file names of a model, relative to wherever it is stored.
pub fn checkpoint_names(kind: ModelKind, stem: &str) -> Vec<String> {
    match kind {
        ModelKind::Wgan => vec![format!("{stem}.glnk")],
        ModelKind::Vae => vec![format!("{stem}.encoder.glnk"), format!("{stem}.decoder.glnk")],
    }
}

pub fn save_model(model: &TrainedModel, dir: &Path, stem: &str) -> CliResult<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    match model {
        TrainedModel::Wgan(g) => {
            let names = checkpoint_names(ModelKind::Wgan, stem);
            save_checkpoint(dir.join(&names[0]), ModelRole::Generator, &g.spec, &g.params)?;
            Ok(names)
        }
        TrainedModel::Vae(v) => {
            let names = checkpoint_names(ModelKind::Vae, stem);
            save_checkpoint(dir.join(&names[0]), ModelRole::Encoder, &v.encoder_spec, &v.encoder_params)?;
            save_checkpoint(dir.join(&names[1]), ModelRole::Decoder, &v.decoder_spec, &v.decoder_params)?;
            Ok(names)
        }
    }
}

pub fn load_model(kind: ModelKind, dir: &Path, stem: &str, prior: LatentPrior) -> CliResult<TrainedModel> {
    let names = checkpoint_names(kind, stem);
    let load = |name: &str, role: ModelRole| {
        let ck = load_checkpoint(dir.join(name))?;
        if ck.role != role {
            return Err(CliError::Integrity(format!("{name} holds a {:?}, expected {role:?}", ck.role)));
        }
        Ok(ck)
    };
    Ok(match kind {
        ModelKind::Wgan => {
            let g = load(&names[0], ModelRole::Generator)?;
            TrainedModel::Wgan(GeneratorModel::new(g.spec, g.params, prior)?)
        }
        ModelKind::Vae => {
            let e = load(&names[0], ModelRole::Encoder)?;
            let d = load(&names[1], ModelRole::Decoder)?;
            TrainedModel::Vae(VaeModel::new(e.spec, e.params, d.spec, d.params)?)
        }
    })
}

/// Draws `count` outputs of the model from its prior.
pub fn generated_samples(model: &TrainedModel, count: usize, seed: u64) -> CliResult<Vec<Vec<f64>>> {
    match model {
        TrainedModel::Wgan(g) => Ok(sample_generator(g, count, seed)?),
        TrainedModel::Vae(v) => {
            let mut rng = seed::rng_for(seed, "vae/sample", 0);
            let dec = VaeDecoder(v);
            Ok((0..count)
                .map(|_| dec.generate(&LatentPrior::StandardNormal.sample(&mut rng, v.latent_dim())))
                .collect())
        }
    }
}

/// One attack target: a single instance or a co-membership group, with the
/// label kept apart from the rows the attack sees.
#[derive(Clone, Debug)]
pub struct EvalUnit {
    pub id: String,
    pub rows: Vec<Vec<f64>>,
    pub label: Membership,
}

/// Evaluation units of a split: every evaluation instance on its own for
/// `n = 1`, groups of `n` sharing a label otherwise.
pub fn split_units(ds: &Dataset, split: &MembershipSplit, n: usize, seed: u64) -> CliResult<Vec<EvalUnit>> {
    let reveal = |id: u64| {
        split
            .labels()
            .reveal(id)
            .ok_or_else(|| CliError::Integrity(format!("no sealed label for id {id}")))
    };
    if n == 1 {
        return split
            .eval_ids
            .iter()
            .map(|&id| {
                Ok(EvalUnit {
                    id: id.to_string(),
                    rows: ds.select(&[id])?,
                    label: reveal(id)?,
                })
            })
            .collect();
    }
    group_eval(split, n, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(EvalUnit {
                id: format!("g{i}"),
                rows: ds.select(&g.member_ids)?,
                label: g.shared_label,
            })
        })
        .collect()
}

/// Single-instance units for explicit member and nonmember id lists.
pub fn explicit_units(ds: &Dataset, members: &[u64], nonmembers: &[u64]) -> CliResult<Vec<EvalUnit>> {
    let tagged = members
        .iter()
        .map(|&id| (id, Membership::Member))
        .chain(nonmembers.iter().map(|&id| (id, Membership::Nonmember)));
    tagged
        .map(|(id, label)| {
            Ok(EvalUnit {
                id: id.to_string(),
                rows: ds.select(&[id])?,
                label,
            })
        })
        .collect()
}

/// Losses of one method over all units, in unit order.
///
/// `samples` is the generated pool searched by the nearest-neighbour baseline.
/// Baselines attack instances independently and refuse groups.
pub fn method_losses(
    model: &TrainedModel,
    method: AttackMethod,
    units: &[EvalUnit],
    cfg: &AttackConfig,
    samples: Option<&[Vec<f64>]>,
) -> CliResult<Vec<f64>> {
    let grouped = units.iter().any(|u| u.rows.len() != 1);
    if grouped && method != AttackMethod::AttackerNet {
        return Err(CliError::Config(format!("{method} attacks instances one at a time")));
    }
    let singles = || units.iter().map(|u| u.rows[0].clone()).collect::<Vec<_>>();
    Ok(match method {
        AttackMethod::AttackerNet if grouped => {
            let groups: Vec<Vec<Vec<f64>>> = units.iter().map(|u| u.rows.clone()).collect();
            co_attack_losses(model, &groups, cfg)?
        }
        AttackMethod::AttackerNet => attack_losses(model, &singles(), cfg)?,
        AttackMethod::DirectProjection => projection_losses(model, &singles(), cfg)?,
        AttackMethod::NearestNeighbor => {
            let pool = samples.ok_or_else(|| CliError::Config("nearest neighbour needs samples".into()))?;
            nearest_neighbor_losses(pool, &singles())?
        }
    })
}

pub fn attack_records(
    units: &[EvalUnit],
    losses: &[f64],
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Vec<AttackRecord> {
    let (restarts, iterations, mode) = match method {
        AttackMethod::NearestNeighbor => (0, 0, "scan".to_string()),
        _ => (cfg.restarts, cfg.iterations, cfg.gradient_mode.to_string()),
    };
    units
        .iter()
        .zip(losses)
        .map(|(u, &loss)| AttackRecord {
            id: u.id.clone(),
            n: u.rows.len(),
            true_membership: Some(u.label.is_member()),
            loss,
            restarts,
            iterations,
            mode: mode.clone(),
        })
        .collect()
}
