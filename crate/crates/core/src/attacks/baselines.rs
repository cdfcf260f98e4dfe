use std::time::Instant;

use super::attacker::{check_targets, AttackResult};
use super::surface::Generator;
use super::{AttackConfig, GradientMode};
use crate::error::{ensure_dim, Error, Result};
use crate::numcore::{forward_difference, squared_distance, Optimizer};
use crate::seed;

/// Direct projection baseline: optimises the latent code itself,
/// `min_z ‖x − G(z)‖`, restarting from fresh prior draws.
pub fn attack_direct_projection<G: Generator + ?Sized>(
    gen: &G,
    x: &[f64],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    attack_direct_projection_group(gen, &[x], cfg)
}

/// Entry point for callers holding a group: direct projection cannot share
/// anything across targets, so any group larger than one is refused.
pub fn attack_direct_projection_group<G: Generator + ?Sized>(
    gen: &G,
    targets: &[&[f64]],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_targets(gen, targets)?;
    if targets.len() != 1 {
        return Err(Error::GroupNotSupported(targets.len()));
    }
    let x = targets[0];
    let started = Instant::now();
    let restarts = (0..cfg.restarts)
        .map(|r| {
            let mut rng = seed::rng_for(cfg.seed, "attack/projection", r as u64);
            let mut z = gen.latent_prior().sample(&mut rng, gen.latent_dim());
            let mut opt = Optimizer::new(cfg.optimizer, z.len(), cfg.projection_learning_rate);
            for it in 0..cfg.iterations {
                opt.set_learning_rate(cfg.lr_schedule.rate(
                    cfg.projection_learning_rate,
                    it,
                    cfg.iterations,
                ));
                let (loss, grad) = match cfg.gradient_mode {
                    GradientMode::WhiteBox => {
                        let mut dist = 0.0;
                        let grad = gen.pullback(&z, &mut |out: &[f64]| {
                            dist = squared_distance(out, x).sqrt();
                            if dist > 0.0 {
                                out.iter().zip(x).map(|(o, t)| (o - t) / dist).collect()
                            } else {
                                vec![0.0; out.len()]
                            }
                        });
                        match grad {
                            Some(g) => (dist, g),
                            None => return (f64::INFINITY, Vec::new()),
                        }
                    }
                    GradientMode::BlackBox => forward_difference(
                        |z| squared_distance(&gen.generate(z), x).sqrt(),
                        &z,
                        cfg.fd_step,
                    ),
                };
                if !loss.is_finite() || opt.step(&mut z, &grad).is_err() {
                    return (f64::INFINITY, Vec::new());
                }
            }
            let out = gen.generate(&z);
            let loss = squared_distance(&out, x).sqrt();
            if loss.is_finite() {
                (loss, vec![out])
            } else {
                (f64::INFINITY, Vec::new())
            }
        })
        .collect();
    AttackResult::from_restarts(restarts, started)
}

/// Nearest-neighbour baseline: distance from `x` to the closest generated
/// sample in `pool`.
pub fn attack_nearest_neighbor(pool: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("nearest-neighbour pool is empty".into()));
    }
    let mut best = f64::INFINITY;
    for row in pool {
        ensure_dim(x.len(), row.len())?;
        best = best.min(squared_distance(row, x));
    }
    Ok(best.sqrt())
}
