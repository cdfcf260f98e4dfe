use std::io::Write;

use rand::seq::index::sample;
use serde::Serialize;

use super::stats::mean_std;
use crate::attacks::{attack_losses, AttackConfig, Generator};
use crate::error::{Error, Result};
use crate::genmodels::{CriticMode, GanConfig, GanTrainer};
use crate::seed;

/// Attacker loss on unseen data minus attacker loss on training data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub train_losses: Vec<f64>,
    pub test_losses: Vec<f64>,
    pub mean_train_loss: f64,
    pub mean_test_loss: f64,
    pub std_train_loss: f64,
    pub std_test_loss: f64,
    pub gap: f64,
}

impl GapReport {
    pub fn from_losses(train_losses: Vec<f64>, test_losses: Vec<f64>) -> Self {
        let (mean_train_loss, std_train_loss) = mean_std(&train_losses);
        let (mean_test_loss, std_test_loss) = mean_std(&test_losses);
        GapReport {
            train_losses,
            test_losses,
            mean_train_loss,
            mean_test_loss,
            std_train_loss,
            std_test_loss,
            gap: mean_test_loss - mean_train_loss,
        }
    }
}

pub fn generalization_gap<G: Generator + ?Sized>(
    gen: &G,
    train_sample: &[Vec<f64>],
    test_sample: &[Vec<f64>],
    cfg: &AttackConfig,
) -> Result<GapReport> {
    if train_sample.is_empty() || test_sample.is_empty() {
        return Err(Error::InvalidArgument("both samples must be nonempty".into()));
    }
    Ok(GapReport::from_losses(
        attack_losses(gen, train_sample, cfg)?,
        attack_losses(gen, test_sample, cfg)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningCurveConfig {
    /// Training steps at which to attack; 0 probes the untrained model.
    pub probe_steps: Vec<usize>,
    /// Instances per probe subset, drawn once from each side.
    pub probe_size: usize,
    pub seed: u64,
}

impl Default for LearningCurveConfig {
    fn default() -> Self {
        LearningCurveConfig {
            probe_steps: vec![0, 100, 200, 400, 800, 1200, 1600, 2000],
            probe_size: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_std: f64,
    pub test_std: f64,
}

/// Up to `size` rows of `data`, the same positions for any data of equal length.
pub fn select_probes(data: &[Vec<f64>], size: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng_for(seed, "metrics/probe", 0);
    let mut idx = sample(&mut rng, data.len(), size.min(data.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| data[i].clone()).collect()
}

/// Trains a WGAN on `train` and, at each probe step, attacks fixed probe
/// subsets of `train` and `test`.
pub fn learning_curve(
    train: &[Vec<f64>],
    test: &[Vec<f64>],
    gan_cfg: &GanConfig,
    attack_cfg: &AttackConfig,
    curve_cfg: &LearningCurveConfig,
) -> Result<Vec<CurvePoint>> {
    let d = train
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("training data is empty".into()))?;
    if test.is_empty() || curve_cfg.probe_size == 0 {
        return Err(Error::InvalidArgument("test data and probe size must be nonempty".into()));
    }
    let mut steps = curve_cfg.probe_steps.clone();
    steps.sort_unstable();
    steps.dedup();
    if steps.last().is_some_and(|&s| s > gan_cfg.steps) {
        return Err(Error::InvalidArgument(format!(
            "probe step {} beyond the training budget {}",
            steps.last().unwrap(),
            gan_cfg.steps
        )));
    }
    let train_probe = select_probes(train, curve_cfg.probe_size, curve_cfg.seed);
    let test_probe = select_probes(test, curve_cfg.probe_size, curve_cfg.seed);

    let mut trainer = GanTrainer::new(gan_cfg, CriticMode::Wasserstein, d)?;
    let mut curve = Vec::with_capacity(steps.len());
    for step in steps {
        trainer.train(train, step - trainer.steps_done())?;
        let report = generalization_gap(trainer.generator(), &train_probe, &test_probe, attack_cfg)?;
        curve.push(CurvePoint {
            step,
            train_loss: report.mean_train_loss,
            test_loss: report.mean_test_loss,
            train_std: report.std_train_loss,
            test_std: report.std_test_loss,
        });
    }
    Ok(curve)
}

/// `step,train_attack_loss,test_attack_loss` rows.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut w: W) -> Result<()> {
    writeln!(w, "step,train_attack_loss,test_attack_loss")?;
    for p in curve {
        writeln!(w, "{},{:e},{:e}", p.step, p.train_loss, p.test_loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::IdentityGenerator;

    #[test]
    fn report_arithmetic() {
        let r = GapReport::from_losses(vec![1.0, 3.0], vec![4.0, 6.0]);
        assert_eq!((r.mean_train_loss, r.mean_test_loss, r.gap), (2.0, 5.0, 3.0));
    }

    #[test]
    fn same_sample_no_gap_and_swap_antisymmetry() {
        let gen = IdentityGenerator { dim: 3 };
        let cfg = AttackConfig {
            iterations: 20,
            restarts: 1,
            ..AttackConfig::default()
        };
        let a = vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.0, 0.4]];
        let b = vec![vec![0.5, 0.5, 0.5]];
        assert_eq!(generalization_gap(&gen, &a, &a, &cfg).unwrap().gap, 0.0);
        let ab = generalization_gap(&gen, &a, &b, &cfg).unwrap();
        let ba = generalization_gap(&gen, &b, &a, &cfg).unwrap();
        assert_eq!(ab.gap, -ba.gap);
        assert!(generalization_gap(&gen, &[], &b, &cfg).is_err());
    }

    #[test]
    fn probes_are_positional() {
        let a: Vec<Vec<f64>> = (0..50).map(|i| vec![f64::from(i)]).collect();
        let p = select_probes(&a, 8, 3);
        assert_eq!(p, select_probes(&a, 8, 3));
        assert_eq!(p.len(), 8);
        assert_eq!(select_probes(&a[..5], 8, 3).len(), 5);
    }
}
