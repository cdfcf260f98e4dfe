//! Finite-difference gradients and the L2 distance.

use crate::error::{ensure_dim, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdMode {
    /// `(l(p + h·e_i) − l(p)) / h`, one extra evaluation per coordinate.
    Forward,
    /// `(l(p + h·e_i) − l(p − h·e_i)) / 2h`, used as a test oracle.
    Central,
}

/// Default step for black-box gradients.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

pub fn finite_diff_grad<F>(loss_fn: F, params: &[f64], h: f64, mode: FdMode) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    match mode {
        FdMode::Forward => forward_difference(loss_fn, params, h).1,
        FdMode::Central => central_difference(loss_fn, params, h),
    }
}

/// Loss at `params` together with its forward-difference gradient, using
/// exactly `params.len() + 1` evaluations.
pub fn forward_difference<F>(mut loss_fn: F, params: &[f64], h: f64) -> (f64, Vec<f64>)
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    let base = loss_fn(&p);
    let grad = (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let g = (loss_fn(&p) - base) / h;
            p[i] = orig;
            g
        })
        .collect();
    (base, grad)
}

fn central_difference<F>(mut loss_fn: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss_fn(&p);
            p[i] = orig - h;
            let g = (up - loss_fn(&p)) / (2.0 * h);
            p[i] = orig;
            g
        })
        .collect()
}

/// Euclidean distance `‖a − b‖`.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_dim(a.len(), b.len())?;
    Ok(squared_distance(a, b).sqrt())
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
