use std::time::{Duration, Instant};

use super::surface::Generator;
use super::{AttackConfig, GradientMode};
use crate::error::{ensure_dim, Error, Result};
use crate::numcore::{
    backward_into, forward_difference, forward_into, init_params, predict, squared_distance,
    NetworkSpec, Optimizer, Tape,
};
use crate::seed;

/// Outcome of one attack on a single target or a co-attack group.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    /// Smallest final loss over the successful restarts.
    pub loss: f64,
    /// Final loss of every restart, `+∞` for restarts that diverged.
    pub per_restart_losses: Vec<f64>,
    /// `G(A(x_i))` (or `G(z_i)`) of the best restart, one per target.
    pub reconstructions: Vec<Vec<f64>>,
    pub wall_time: Duration,
}

impl AttackResult {
    pub(crate) fn from_restarts(
        restarts: Vec<(f64, Vec<Vec<f64>>)>,
        started: Instant,
    ) -> Result<Self> {
        let per_restart_losses: Vec<f64> = restarts.iter().map(|r| r.0).collect();
        let best = per_restart_losses
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or(Error::AllRestartsFailed)?;
        let (loss, reconstructions) = restarts.into_iter().nth(best).unwrap();
        Ok(AttackResult {
            loss,
            per_restart_losses,
            reconstructions,
            wall_time: started.elapsed(),
        })
    }
}

pub(crate) fn check_targets<G: Generator + ?Sized>(gen: &G, targets: &[&[f64]]) -> Result<usize> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("attack needs at least one target".into()));
    }
    let d = gen.output_dim();
    for x in targets {
        ensure_dim(d, x.len())?;
    }
    Ok(d)
}

/// Single membership attack: optimises a freshly initialised attacker network
/// `A_γ` on `‖x − G(A_γ(x))‖` and reports the final distance, minimised over
/// restarts.
pub fn attack_single<G: Generator + ?Sized>(
    gen: &G,
    x: &[f64],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    attack_co(gen, &[x], cfg)
}

/// Co-membership attack: one attacker network per restart, optimised on the
/// mean distance over the whole group. The reported loss is that mean.
pub fn attack_co<G: Generator + ?Sized>(
    gen: &G,
    targets: &[&[f64]],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let d = check_targets(gen, targets)?;
    let spec = cfg.attacker_spec(d, gen.latent_dim())?;
    let started = Instant::now();
    let restarts = (0..cfg.restarts)
        .map(|r| run_restart(gen, &spec, targets, cfg, r))
        .collect();
    AttackResult::from_restarts(restarts, started)
}

fn run_restart<G: Generator + ?Sized>(
    gen: &G,
    spec: &NetworkSpec,
    targets: &[&[f64]],
    cfg: &AttackConfig,
    restart: usize,
) -> (f64, Vec<Vec<f64>>) {
    let failed = || (f64::INFINITY, Vec::new());
    let mut params = init_params(spec, cfg.restart_seed(restart));
    let mut opt = Optimizer::new(cfg.optimizer, params.len(), cfg.learning_rate);
    for it in 0..cfg.iterations {
        opt.set_learning_rate(cfg.lr_schedule.rate(cfg.learning_rate, it, cfg.iterations));
        let step = match cfg.gradient_mode {
            GradientMode::WhiteBox => whitebox_loss_and_grad(gen, spec, &params, targets),
            GradientMode::BlackBox => {
                Some(blackbox_loss_and_grad(gen, spec, &params, targets, cfg.fd_step))
            }
        };
        let Some((loss, grad)) = step else {
            return failed();
        };
        if !loss.is_finite() || opt.step(&mut params, &grad).is_err() {
            return failed();
        }
    }
    let mut recon = Vec::with_capacity(targets.len());
    let mut total = 0.0;
    for x in targets {
        let Ok(z) = predict(spec, &params, x) else {
            return failed();
        };
        let out = gen.generate(&z);
        total += squared_distance(&out, x).sqrt();
        recon.push(out);
    }
    let loss = total / targets.len() as f64;
    if loss.is_finite() {
        (loss, recon)
    } else {
        failed()
    }
}

/// Analytic gradient of the mean distance with respect to the attacker
/// parameters, chained through the generator. `None` if the generator is opaque.
pub fn whitebox_loss_and_grad<G: Generator + ?Sized>(
    gen: &G,
    spec: &NetworkSpec,
    params: &[f64],
    targets: &[&[f64]],
) -> Option<(f64, Vec<f64>)> {
    let inv_n = 1.0 / targets.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut tape = Tape::default();
    let mut loss = 0.0;
    for x in targets {
        forward_into(spec, params, x, &mut tape).ok()?;
        let mut dist = 0.0;
        let dz = gen.pullback(tape.output(), &mut |out: &[f64]| {
            dist = squared_distance(out, x).sqrt();
            if dist > 0.0 {
                let scale = inv_n / dist;
                out.iter().zip(*x).map(|(o, t)| (o - t) * scale).collect()
            } else {
                vec![0.0; out.len()]
            }
        })?;
        loss += dist * inv_n;
        backward_into(spec, params, &tape, &dz, Some(&mut grad)).ok()?;
    }
    Some((loss, grad))
}

/// Mean distance over `targets` for attacker parameters `params`, querying the
/// generator once per target.
fn blackbox_loss<G: Generator + ?Sized>(
    gen: &G,
    spec: &NetworkSpec,
    params: &[f64],
    targets: &[&[f64]],
) -> f64 {
    let total: f64 = targets
        .iter()
        .map(|x| match predict(spec, params, x) {
            Ok(z) => squared_distance(&gen.generate(&z), x).sqrt(),
            Err(_) => f64::NAN,
        })
        .sum();
    total / targets.len() as f64
}

/// Forward-difference gradient `(l(γ + h·e_i) − l(γ)) / h` of the attacker
/// loss, using only generator queries: `(|γ| + 1)` of them per target.
pub fn blackbox_loss_and_grad<G: Generator + ?Sized>(
    gen: &G,
    spec: &NetworkSpec,
    params: &[f64],
    targets: &[&[f64]],
    fd_step: f64,
) -> (f64, Vec<f64>) {
    forward_difference(|p| blackbox_loss(gen, spec, p, targets), params, fd_step)
}

/// Restart seeds are a pure function of `(cfg.seed, restart index)`.
pub(crate) fn restart_seed(base: u64, restart: usize) -> u64 {
    seed::derive(base, "attack/restart", restart as u64)
}
