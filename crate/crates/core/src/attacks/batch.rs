//! Many independent attacks against one shared generator, fanned out over the
//! current rayon pool. Results always come back in input order.

use rayon::prelude::*;

use super::surface::Generator;
use super::{attack_co, attack_direct_projection, attack_nearest_neighbor, attack_single, AttackConfig};
use crate::error::Result;

pub fn attack_losses<G: Generator + ?Sized>(
    gen: &G,
    targets: &[Vec<f64>],
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    targets
        .par_iter()
        .map(|x| attack_single(gen, x, cfg).map(|r| r.loss))
        .collect()
}

/// One co-attack per group; each group is a list of targets.
pub fn co_attack_losses<G: Generator + ?Sized>(
    gen: &G,
    groups: &[Vec<Vec<f64>>],
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    groups
        .par_iter()
        .map(|g| {
            let refs: Vec<&[f64]> = g.iter().map(Vec::as_slice).collect();
            attack_co(gen, &refs, cfg).map(|r| r.loss)
        })
        .collect()
}

pub fn projection_losses<G: Generator + ?Sized>(
    gen: &G,
    targets: &[Vec<f64>],
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    targets
        .par_iter()
        .map(|x| attack_direct_projection(gen, x, cfg).map(|r| r.loss))
        .collect()
}

pub fn nearest_neighbor_losses(pool: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<f64>> {
    targets
        .par_iter()
        .map(|x| attack_nearest_neighbor(pool, x))
        .collect()
}
