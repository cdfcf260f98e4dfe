use rand::seq::index::sample;
use rand::seq::SliceRandom;

use crate::attacks::{attack_losses, AttackConfig};
use crate::error::{Error, Result};
use crate::genmodels::{CriticMode, GanConfig, GanTrainer, GeneratorModel};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialSamplingConfig {
    /// Unseen points ranked per round.
    pub batch_size: usize,
    /// Size of the selected subset and of the random control.
    pub target_size: usize,
    /// Training steps on each batch after the pick.
    pub finetune_steps: usize,
    pub seed: u64,
}

impl Default for AdversarialSamplingConfig {
    fn default() -> Self {
        AdversarialSamplingConfig {
            batch_size: 8,
            target_size: 32,
            finetune_steps: 200,
            seed: 0,
        }
    }
}

/// One round: the batch (pool indices), the attack loss of each batch member
/// against the current generator, and the position of the pick.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPick {
    pub batch: Vec<usize>,
    pub losses: Vec<f64>,
    pub picked: usize,
}

#[derive(Clone, Debug)]
pub struct AdversarialSample {
    /// Pool indices of the least reproducible point of every batch.
    pub selected: Vec<usize>,
    /// Pool indices drawn uniformly from the whole pool, independent of `selected`.
    pub control: Vec<usize>,
    /// `|selected ∩ control|`
    pub overlap: usize,
    pub rounds: Vec<BatchPick>,
    pub generator: GeneratorModel,
}

/// Runs through fresh batches of the pool in seeded order; from each, keeps the
/// point the current WGAN reproduces worst, then trains that WGAN on the batch.
pub fn adversarial_sampling(
    pool: &[Vec<f64>],
    cfg: &AdversarialSamplingConfig,
    gan_cfg: &GanConfig,
    attack_cfg: &AttackConfig,
) -> Result<AdversarialSample> {
    let (b, m) = (cfg.batch_size, cfg.target_size);
    if b == 0 || m == 0 {
        return Err(Error::InvalidArgument("batch and target sizes must be positive".into()));
    }
    let available = pool.len() / b;
    if available < m {
        return Err(Error::DatasetExhausted {
            selected: available,
            wanted: m,
        });
    }
    let d = pool[0].len();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut seed::rng_for(cfg.seed, "metrics/adversarial-order", 0));

    let mut trainer = GanTrainer::new(gan_cfg, CriticMode::Wasserstein, d)?;
    let mut selected = Vec::with_capacity(m);
    let mut rounds = Vec::with_capacity(m);
    for batch in order.chunks_exact(b).take(m) {
        let rows: Vec<Vec<f64>> = batch.iter().map(|&i| pool[i].clone()).collect();
        let losses = attack_losses(trainer.generator(), &rows, attack_cfg)?;
        let mut picked = 0;
        for (i, l) in losses.iter().enumerate() {
            if *l > losses[picked] {
                picked = i;
            }
        }
        selected.push(batch[picked]);
        rounds.push(BatchPick {
            batch: batch.to_vec(),
            losses,
            picked,
        });
        trainer.train(&rows, cfg.finetune_steps)?;
    }

    let mut rng = seed::rng_for(cfg.seed, "metrics/control", 0);
    let control = sample(&mut rng, pool.len(), m).into_vec();
    let overlap = control.iter().filter(|c| selected.contains(c)).count();
    Ok(AdversarialSample {
        selected,
        control,
        overlap,
        rounds,
        generator: trainer.into_outcome().generator,
    })
}
