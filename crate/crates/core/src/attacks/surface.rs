//! What an attacker gets to see of a generative model.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::genmodels::{GeneratorModel, LatentPrior, VaeModel};
use crate::numcore::{backward_into, forward_into, predict, NetworkSpec, Tape};

/// A frozen map from latent codes to data space.
///
/// Implementations that expose their internals return the pulled-back
/// gradient from [`Generator::pullback`]; opaque ones return `None` and can only
/// be attacked with finite differences.
pub trait Generator: Sync {
    fn latent_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn latent_prior(&self) -> LatentPrior {
        LatentPrior::StandardNormal
    }

    fn generate(&self, z: &[f64]) -> Vec<f64>;

    /// Evaluates `G(z)`, asks `output_grad` for `∂loss/∂G(z)` and returns
    /// `∂loss/∂z`.
    fn pullback(&self, z: &[f64], output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>)
        -> Option<Vec<f64>>;
}

fn network_pullback(
    spec: &NetworkSpec,
    params: &[f64],
    z: &[f64],
    output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
) -> Option<Vec<f64>> {
    let mut tape = Tape::default();
    forward_into(spec, params, z, &mut tape).ok()?;
    let g = output_grad(tape.output());
    backward_into(spec, params, &tape, &g, None).ok()
}

impl Generator for GeneratorModel {
    fn latent_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    fn latent_prior(&self) -> LatentPrior {
        self.latent_prior
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        predict(&self.spec, &self.params, z).expect("latent code has generator input size")
    }

    fn pullback(
        &self,
        z: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        network_pullback(&self.spec, &self.params, z, output_grad)
    }
}

/// The decoder of a VAE; the encoder stays hidden.
#[derive(Clone, Copy, Debug)]
pub struct VaeDecoder<'a>(pub &'a VaeModel);

impl Generator for VaeDecoder<'_> {
    fn latent_dim(&self) -> usize {
        self.0.latent_dim()
    }

    fn output_dim(&self) -> usize {
        self.0.data_dim()
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        predict(&self.0.decoder_spec, &self.0.decoder_params, z)
            .expect("latent code has decoder input size")
    }

    fn pullback(
        &self,
        z: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        network_pullback(&self.0.decoder_spec, &self.0.decoder_params, z, output_grad)
    }
}

/// Hides the internals of a generator: only `generate` is usable.
#[derive(Debug)]
pub struct Opaque<G> {
    inner: G,
    queries: AtomicUsize,
}

impl<G> Opaque<G> {
    pub fn new(inner: G) -> Self {
        Opaque {
            inner,
            queries: AtomicUsize::new(0),
        }
    }

    /// Number of `generate` calls answered so far.
    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }
}

impl<G: Generator> Generator for Opaque<G> {
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn latent_prior(&self) -> LatentPrior {
        self.inner.latent_prior()
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.generate(z)
    }

    fn pullback(&self, _: &[f64], _: &mut dyn FnMut(&[f64]) -> Vec<f64>) -> Option<Vec<f64>> {
        None
    }
}

/// `G(z) = z`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityGenerator {
    pub dim: usize,
}

impl Generator for IdentityGenerator {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        z.to_vec()
    }

    fn pullback(
        &self,
        z: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        Some(output_grad(z))
    }
}

/// `G(z) = c` for every `z`.
#[derive(Clone, Debug)]
pub struct ConstantGenerator {
    pub value: Vec<f64>,
    pub latent_dim: usize,
}

impl Generator for ConstantGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn output_dim(&self) -> usize {
        self.value.len()
    }

    fn generate(&self, _: &[f64]) -> Vec<f64> {
        self.value.clone()
    }

    fn pullback(
        &self,
        _: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        output_grad(&self.value);
        Some(vec![0.0; self.latent_dim])
    }
}

/// `G(z) = W z` with `W` stored row-major as `d` rows of length `k`.
#[derive(Clone, Debug)]
pub struct LinearGenerator {
    pub rows: Vec<Vec<f64>>,
}

impl Generator for LinearGenerator {
    fn latent_dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn output_dim(&self) -> usize {
        self.rows.len()
    }

    fn generate(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(z).map(|(w, v)| w * v).sum())
            .collect()
    }

    fn pullback(
        &self,
        z: &[f64],
        output_grad: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Option<Vec<f64>> {
        let g = output_grad(&self.generate(z));
        let mut dz = vec![0.0; z.len()];
        for (row, gi) in self.rows.iter().zip(&g) {
            for (d, w) in dz.iter_mut().zip(row) {
                *d += gi * w;
            }
        }
        Some(dz)
    }
}
