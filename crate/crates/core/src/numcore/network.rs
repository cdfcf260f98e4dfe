//! Fully-connected feed-forward networks with a hand-written reverse pass.
//!
//! Parameters live in one flat vector. For each layer the weight matrix comes
//! first (row-major, `out × in`), followed by the bias vector.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{ensure_dim, Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Identity,
            _ => return None,
        })
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidSpec(format!("unknown activation {other:?}"))),
        }
    }
}

/// Shape and activations of a fully-connected network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    l2_reg_coeff: f64,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(
                "need at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec("layer sizes must be positive".into()));
        }
        Ok(NetworkSpec {
            layer_sizes,
            hidden_activation,
            output_activation,
            l2_reg_coeff: 0.0,
        })
    }

    /// Convenience constructor: `input → hidden… → output`.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, hidden_activation, output_activation)
    }

    pub fn with_l2(mut self, coeff: f64) -> Result<Self> {
        if !(coeff >= 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "l2 coefficient must be a nonnegative real, got {coeff}"
            )));
        }
        self.l2_reg_coeff = coeff;
        Ok(self)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn l2_reg_coeff(&self) -> f64 {
        self.l2_reg_coeff
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// `Σ_l (n_l·n_{l+1} + n_{l+1})`
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.depth() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Sum of all layer widths except the input.
    fn unit_count(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }

    /// `l2_reg_coeff · ‖params‖²`
    pub fn l2_penalty(&self, params: &[f64]) -> f64 {
        if self.l2_reg_coeff == 0.0 {
            return 0.0;
        }
        self.l2_reg_coeff * params.iter().map(|p| p * p).sum::<f64>()
    }

    /// Adds the gradient of [`NetworkSpec::l2_penalty`] to `grad`.
    pub fn add_l2_grad(&self, params: &[f64], grad: &mut [f64]) {
        if self.l2_reg_coeff == 0.0 {
            return;
        }
        let k = 2.0 * self.l2_reg_coeff;
        for (g, p) in grad.iter_mut().zip(params) {
            *g += k * p;
        }
    }
}

/// Flat parameter vector of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        ParamVector(vec![0.0; spec.param_count()])
    }

    pub fn from_vec(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        ensure_dim(spec.param_count(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged("parameter vector".into()));
        }
        Ok(ParamVector(values))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
    let mut rng = seed::rng(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        values.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)));
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParamVector(values)
}

/// Activations recorded by [`forward`] for the reverse pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    layer_sizes: Vec<usize>,
    param_count: usize,
    /// Input followed by the post-activation of every layer.
    acts: Vec<f64>,
    /// Pre-activation of every layer.
    pre: Vec<f64>,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.acts[..self.layer_sizes[0]]
    }

    pub fn output(&self) -> &[f64] {
        let n = *self.layer_sizes.last().unwrap();
        &self.acts[self.acts.len() - n..]
    }

    fn matches(&self, spec: &NetworkSpec, params: &[f64]) -> bool {
        self.layer_sizes == spec.layer_sizes && self.param_count == params.len()
    }
}

/// Evaluates the network and records a tape.
pub fn forward(spec: &NetworkSpec, params: &[f64], input: &[f64]) -> Result<(Vec<f64>, Tape)> {
    let mut tape = Tape::default();
    forward_into(spec, params, input, &mut tape)?;
    Ok((tape.output().to_vec(), tape))
}

/// [`forward`] reusing the buffers of an existing tape.
pub fn forward_into(
    spec: &NetworkSpec,
    params: &[f64],
    input: &[f64],
    tape: &mut Tape,
) -> Result<()> {
    ensure_dim(spec.input_dim(), input.len())?;
    ensure_dim(spec.param_count(), params.len())?;

    if tape.layer_sizes != spec.layer_sizes {
        tape.layer_sizes.clone_from(&spec.layer_sizes);
    }
    tape.param_count = params.len();
    tape.acts.clear();
    tape.acts.extend_from_slice(input);
    tape.pre.clear();
    tape.pre.reserve(spec.unit_count());
    tape.acts.reserve(spec.unit_count());

    let mut offset = 0;
    let mut in_start = 0;
    for layer in 0..spec.depth() {
        let (n_in, n_out) = (spec.layer_sizes[layer], spec.layer_sizes[layer + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        let act = spec.activation(layer);
        for j in 0..n_out {
            let row = &weights[j * n_in..(j + 1) * n_in];
            let x = &tape.acts[in_start..in_start + n_in];
            let z = biases[j] + dot(row, x);
            tape.pre.push(z);
        }
        let pre_start = tape.pre.len() - n_out;
        for j in 0..n_out {
            let y = act.apply(tape.pre[pre_start + j]);
            tape.acts.push(y);
        }
        in_start += n_in;
        offset += n_in * n_out + n_out;
    }
    Ok(())
}

/// Evaluates the network without keeping a tape.
pub fn predict(spec: &NetworkSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(spec, params, input)?.0)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Gradients returned by [`backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// Reverse pass: gradient of a scalar loss with respect to every parameter and
/// to the network input, given `∂loss/∂output`.
pub fn backward(
    spec: &NetworkSpec,
    params: &[f64],
    tape: &Tape,
    output_grad: &[f64],
) -> Result<Gradients> {
    let mut param_grad = vec![0.0; params.len()];
    let input = backward_into(spec, params, tape, output_grad, Some(&mut param_grad))?;
    Ok(Gradients {
        params: param_grad,
        input,
    })
}

/// Reverse pass that accumulates into `param_grad` (when given) and returns the
/// input gradient. Passing `None` skips the weight gradients entirely, which is
/// all an attacker needs when pulling a gradient back through a frozen model.
pub fn backward_into(
    spec: &NetworkSpec,
    params: &[f64],
    tape: &Tape,
    output_grad: &[f64],
    mut param_grad: Option<&mut [f64]>,
) -> Result<Vec<f64>> {
    if !tape.matches(spec, params) {
        return Err(Error::StaleTape);
    }
    ensure_dim(spec.output_dim(), output_grad.len())?;
    if let Some(g) = param_grad.as_deref() {
        ensure_dim(params.len(), g.len())?;
    }

    let depth = spec.depth();
    let mut offsets = Vec::with_capacity(depth);
    let mut act_starts = Vec::with_capacity(depth);
    let mut pre_starts = Vec::with_capacity(depth);
    let (mut offset, mut act, mut pre) = (0, 0, 0);
    for w in spec.layer_sizes.windows(2) {
        offsets.push(offset);
        act_starts.push(act);
        pre_starts.push(pre);
        offset += w[0] * w[1] + w[1];
        act += w[0];
        pre += w[1];
    }

    let mut upstream = output_grad.to_vec();
    let mut delta = Vec::new();
    for layer in (0..depth).rev() {
        let (n_in, n_out) = (spec.layer_sizes[layer], spec.layer_sizes[layer + 1]);
        let act = spec.activation(layer);
        let z = &tape.pre[pre_starts[layer]..pre_starts[layer] + n_out];
        let y_start = act_starts[layer] + n_in;
        let y = &tape.acts[y_start..y_start + n_out];
        let x = &tape.acts[act_starts[layer]..act_starts[layer] + n_in];

        delta.clear();
        delta.extend((0..n_out).map(|j| upstream[j] * act.derivative(z[j], y[j])));

        let w_start = offsets[layer];
        let b_start = w_start + n_in * n_out;
        if let Some(g) = param_grad.as_deref_mut() {
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g[w_start + j * n_in..w_start + (j + 1) * n_in];
                for (gw, xi) in row.iter_mut().zip(x) {
                    *gw += d * xi;
                }
                g[b_start + j] += d;
            }
        }

        upstream.clear();
        upstream.resize(n_in, 0.0);
        let weights = &params[w_start..b_start];
        for (j, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &weights[j * n_in..(j + 1) * n_in];
            for (u, w) in upstream.iter_mut().zip(row) {
                *u += d * w;
            }
        }
    }
    Ok(upstream)
}
