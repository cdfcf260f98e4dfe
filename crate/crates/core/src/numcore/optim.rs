//! First-order optimizers and weight clipping.

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_dim, Error, Result};

/// Adam moments and hyperparameters for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_hyperparameters(
        len: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "adam needs 0 <= beta < 1 and epsilon > 0 (beta1={beta1}, beta2={beta2}, epsilon={epsilon})"
            )));
        }
        Ok(AdamState {
            beta1,
            beta2,
            epsilon,
            ..AdamState::new(len, learning_rate)
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }
}

fn check_finite(grads: &[f64]) -> Result<()> {
    match grads.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::Diverged(format!("gradient component {i} is {}", grads[i]))),
        None => Ok(()),
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when the
/// gradient is not finite.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    ensure_dim(params.len(), grads.len())?;
    ensure_dim(state.len(), params.len())?;
    check_finite(grads)?;

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 / (1.0 - b1.powi(t));
    let c2 = 1.0 / (1.0 - b2.powi(t));
    let lr = state.learning_rate;
    let eps = state.epsilon;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m * c1) / ((*v * c2).sqrt() + eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    PlainGd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::PlainGd => "plain_gd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "plain_gd" | "gd" => Ok(OptimizerKind::PlainGd),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Either Adam or fixed-step gradient descent.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Adam(AdamState),
    GradientDescent { learning_rate: f64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, len: usize, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(len, learning_rate)),
            OptimizerKind::PlainGd => Optimizer::GradientDescent { learning_rate },
        }
    }

    pub fn set_learning_rate(&mut self, rate: f64) {
        match self {
            Optimizer::Adam(state) => state.learning_rate = rate,
            Optimizer::GradientDescent { learning_rate } => *learning_rate = rate,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Adam(state) => adam_step(params, grads, state),
            Optimizer::GradientDescent { learning_rate } => {
                ensure_dim(params.len(), grads.len())?;
                check_finite(grads)?;
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= *learning_rate * g;
                }
                Ok(())
            }
        }
    }
}

/// Clamps every component into `[-c, c]`.
pub fn clip_weights(params: &mut [f64], c: f64) {
    assert!(c > 0.0, "clip constant must be positive");
    for p in params {
        *p = p.clamp(-c, c);
    }
}
