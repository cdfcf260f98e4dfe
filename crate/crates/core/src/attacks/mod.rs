//! Membership attacks against a frozen generator.
//!
//! The attacker network `A_γ : R^d → R^k` is trained from scratch for every
//! attack so that `G(A_γ(x))` reproduces the target `x`; the reconstruction
//! distance that remains is the membership statistic. Small distances point to
//! training members.

mod attacker;
mod baselines;
mod batch;
mod surface;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numcore::{Activation, NetworkSpec, OptimizerKind, DEFAULT_FD_STEP};

pub use attacker::{
    attack_co, attack_single, blackbox_loss_and_grad, whitebox_loss_and_grad, AttackResult,
};
pub use baselines::{
    attack_direct_projection, attack_direct_projection_group, attack_nearest_neighbor,
};
pub use batch::{attack_losses, co_attack_losses, nearest_neighbor_losses, projection_losses};
pub use surface::{
    ConstantGenerator, Generator, IdentityGenerator, LinearGenerator, Opaque, VaeDecoder,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientMode {
    /// Back-propagate through the generator.
    WhiteBox,
    /// Forward differences over generator queries only.
    BlackBox,
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientMode::WhiteBox => "white_box",
            GradientMode::BlackBox => "black_box",
        })
    }
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white_box" => Ok(GradientMode::WhiteBox),
            "black_box" => Ok(GradientMode::BlackBox),
            other => Err(Error::InvalidArgument(format!("unknown gradient mode {other:?}"))),
        }
    }
}

/// Step-size schedule over the iterations of one restart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the base rate to zero.
    Cosine,
}

impl LrSchedule {
    pub fn rate(self, base: f64, iteration: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let frac = iteration as f64 / total as f64;
                0.5 * base * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::Constant => "constant",
            LrSchedule::Cosine => "cosine",
        })
    }
}

impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Attack hyperparameters. The attacker's input and output sizes come from the
/// target generator at attack time.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub iterations: usize,
    pub restarts: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    /// Step size for the direct-projection baseline, which moves the latent
    /// code itself rather than network weights.
    pub projection_learning_rate: f64,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            hidden: vec![100, 100],
            activation: Activation::Relu,
            iterations: 1000,
            restarts: 4,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Cosine,
            projection_learning_rate: 1e-2,
            gradient_mode: GradientMode::WhiteBox,
            fd_step: DEFAULT_FD_STEP,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument(
                "attack iterations and restarts must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.projection_learning_rate > 0.0 && self.fd_step > 0.0)
        {
            return Err(Error::InvalidArgument(
                "learning rates and fd_step must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `d → hidden… → k`, identity output.
    pub fn attacker_spec(&self, data_dim: usize, latent_dim: usize) -> Result<NetworkSpec> {
        NetworkSpec::mlp(
            data_dim,
            &self.hidden,
            latent_dim,
            self.activation,
            Activation::Identity,
        )
    }

    pub fn restart_seed(&self, restart: usize) -> u64 {
        attacker::restart_seed(self.seed, restart)
    }
}

/// Declares a target a training member when its loss is strictly below the
/// threshold.
pub fn decide_membership(loss: f64, threshold: f64) -> bool {
    loss < threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackMethod {
    AttackerNet,
    NearestNeighbor,
    DirectProjection,
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMethod::AttackerNet => "attacker_net",
            AttackMethod::NearestNeighbor => "nearest_neighbor",
            AttackMethod::DirectProjection => "direct_projection",
        })
    }
}

impl FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attacker_net" => Ok(AttackMethod::AttackerNet),
            "nearest_neighbor" => Ok(AttackMethod::NearestNeighbor),
            "direct_projection" => Ok(AttackMethod::DirectProjection),
            other => Err(Error::InvalidArgument(format!("unknown attack method {other:?}"))),
        }
    }
}

/// One row of the attack outcome stream.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackRecord {
    pub id: String,
    pub n: usize,
    pub true_membership: Option<bool>,
    pub loss: f64,
    pub restarts: usize,
    pub iterations: usize,
    pub mode: String,
}

pub const ATTACK_CSV_HEADER: &str =
    "instance_or_group_id,n,true_membership,loss,restarts,iterations,mode";

pub fn write_attack_csv<W: Write>(records: &[AttackRecord], mut w: W) -> Result<()> {
    writeln!(w, "{ATTACK_CSV_HEADER}")?;
    for r in records {
        let label = match r.true_membership {
            Some(true) => "member",
            Some(false) => "nonmember",
            None => "",
        };
        writeln!(
            w,
            "{},{},{},{:e},{},{},{}",
            r.id, r.n, label, r.loss, r.restarts, r.iterations, r.mode
        )?;
    }
    Ok(())
}

pub fn read_attack_csv(text: &str) -> Result<Vec<AttackRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(ATTACK_CSV_HEADER) {
        return Err(Error::InvalidArgument("attack CSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidArgument(format!("malformed attack CSV row {line:?}"));
            if f.len() != 7 {
                return Err(bad());
            }
            Ok(AttackRecord {
                id: f[0].to_string(),
                n: f[1].parse().map_err(|_| bad())?,
                true_membership: match f[2] {
                    "member" => Some(true),
                    "nonmember" => Some(false),
                    "" => None,
                    _ => return Err(bad()),
                },
                loss: f[3].parse().map_err(|_| bad())?,
                restarts: f[4].parse().map_err(|_| bad())?,
                iterations: f[5].parse().map_err(|_| bad())?,
                mode: f[6].to_string(),
            })
        })
        .collect()
}
