//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights are row-major `(out_dim, in_dim)`. A [`NetworkParams`] is either one
//! layer stack, or several independent stacks that all read the same input and
//! whose outputs are concatenated (one stack per physical component).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative; the ReLU kink at exactly 0 gets 0.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config(format!(
                "layer dimensions must be positive, got {out_dim} x {in_dim}"
            )));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::config(format!(
                "layer {out_dim} x {in_dim} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::config("layer parameters must be finite"));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Identity on the top-left square block, zeros elsewhere, zero bias.
    pub fn identity(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self::shifted_identity(in_dim, out_dim, 0, activation)
    }

    /// `weights[i][i + col_offset] = 1` wherever that column exists.
    ///
    /// Used for the output layers of per-component sub-networks, which must
    /// pick their own component out of the flattened state.
    pub fn shifted_identity(
        in_dim: usize,
        out_dim: usize,
        col_offset: usize,
        activation: Activation,
    ) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim, activation);
        for i in 0..out_dim {
            let j = i + col_offset;
            if j < in_dim {
                layer.weights[i * in_dim + j] = 1.0;
            }
        }
        layer
    }

    /// Uniform `[-a, a]` weights with `a = sqrt(6 / in_dim)`, small uniform biases.
    pub fn random<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let a = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.gen_range(-a..a)).collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn affine(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Single,
    /// Independent stacks over the same input, outputs concatenated.
    Multi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    topology: Topology,
    stacks: Vec<Vec<DenseLayer>>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    signature: Vec<Vec<(usize, usize)>>,
    input: Vec<f64>,
    /// `pre[s][l]`: pre-activation of layer `l` in stack `s`.
    pre: Vec<Vec<Vec<f64>>>,
    /// `post[s][l]`: activation output of layer `l` in stack `s`.
    post: Vec<Vec<Vec<f64>>>,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> impl Iterator<Item = &[f64]> {
        self.pre.iter().flat_map(|s| s.iter().map(Vec::as_slice))
    }
}

fn check_stack(layers: &[DenseLayer]) -> Result<()> {
    let last = layers
        .last()
        .ok_or_else(|| Error::config("a network stack needs at least one layer"))?;
    for (k, pair) in layers.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::config(format!(
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                k + 1,
                pair[1].in_dim
            )));
        }
    }
    if last.activation != Activation::Linear {
        return Err(Error::config("the output layer must be linear"));
    }
    Ok(())
}

impl NetworkParams {
    pub fn single(layers: Vec<DenseLayer>) -> Result<Self> {
        check_stack(&layers)?;
        Ok(NetworkParams {
            topology: Topology::Single,
            stacks: vec![layers],
        })
    }

    pub fn multi(stacks: Vec<Vec<DenseLayer>>) -> Result<Self> {
        if stacks.is_empty() {
            return Err(Error::config("a multi-network needs at least one stack"));
        }
        for s in &stacks {
            check_stack(s)?;
        }
        let in_dim = stacks[0][0].in_dim;
        if stacks.iter().any(|s| s[0].in_dim != in_dim) {
            return Err(Error::config("all sub-networks must read the same input width"));
        }
        Ok(NetworkParams {
            topology: Topology::Multi,
            stacks,
        })
    }

    /// Identity-initialized stack with ReLU hidden layers and a linear output.
    /// `dims` lists every width from input to output.
    pub fn identity(dims: &[usize]) -> Result<Self> {
        Self::single(identity_stack(dims, 0)?)
    }

    /// `n_stacks` identity-initialized sub-networks of shape `dims`; stack `s`
    /// maps input slice `[s * out, (s + 1) * out)` to its output at initialization.
    pub fn identity_multi(dims: &[usize], n_stacks: usize) -> Result<Self> {
        let out = *dims.last().ok_or_else(|| Error::config("empty layer list"))?;
        let stacks = (0..n_stacks)
            .map(|s| identity_stack(dims, s * out))
            .collect::<Result<Vec<_>>>()?;
        Self::multi(stacks)
    }

    pub fn random<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Self::single(random_stack(dims, rng)?)
    }

    pub fn random_multi<R: Rng>(dims: &[usize], n_stacks: usize, rng: &mut R) -> Result<Self> {
        let stacks = (0..n_stacks)
            .map(|_| random_stack(dims, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::multi(stacks)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn stacks(&self) -> &[Vec<DenseLayer>] {
        &self.stacks
    }

    pub fn stacks_mut(&mut self) -> &mut [Vec<DenseLayer>] {
        &mut self.stacks
    }

    pub fn in_dim(&self) -> usize {
        self.stacks[0][0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.stacks.iter().map(|s| s.last().unwrap().out_dim).sum()
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.stacks.iter().flatten()
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.stacks.iter_mut().flatten()
    }

    /// Same shape, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            topology: self.topology,
            stacks: self
                .stacks
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim, l.activation))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.signature() == other.signature()
    }

    fn signature(&self) -> Vec<Vec<(usize, usize)>> {
        self.stacks
            .iter()
            .map(|s| s.iter().map(|l| (l.out_dim, l.in_dim)).collect())
            .collect()
    }

    /// Weight and bias buffers in a fixed order (layer by layer, weights first).
    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.in_dim() {
            return Err(Error::config(format!(
                "network expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("network input must be finite"));
        }
        let mut y = Vec::with_capacity(self.out_dim());
        let mut pre = Vec::with_capacity(self.stacks.len());
        let mut post = Vec::with_capacity(self.stacks.len());
        let mut layer_index = 0;
        for stack in &self.stacks {
            let mut stack_pre = Vec::with_capacity(stack.len());
            let mut stack_post: Vec<Vec<f64>> = Vec::with_capacity(stack.len());
            for layer in stack {
                let input = stack_post.last().map_or(x, Vec::as_slice);
                let mut z = Vec::with_capacity(layer.out_dim);
                layer.affine(input, &mut z);
                let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalOverflow { layer: layer_index });
                }
                stack_pre.push(z);
                stack_post.push(a);
                layer_index += 1;
            }
            y.extend_from_slice(stack_post.last().unwrap());
            pre.push(stack_pre);
            post.push(stack_post);
        }
        let cache = ForwardCache {
            signature: self.signature(),
            input: x.to_vec(),
            pre,
            post,
        };
        Ok((y, cache))
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Gradients of the scalar whose output-gradient is `dy`, with respect to
    /// every parameter and to the input.
    pub fn backward(&self, cache: &ForwardCache, dy: &[f64]) -> Result<(NetworkParams, Vec<f64>)> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, dy, &mut grads)?;
        Ok((grads, dx))
    }

    /// Like [`backward`](Self::backward) but overwrites a preallocated gradient buffer.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        dy: &[f64],
        grads: &mut NetworkParams,
    ) -> Result<Vec<f64>> {
        if cache.signature != self.signature() {
            return Err(Error::usage("forward cache was produced by a different network"));
        }
        if !grads.same_shape(self) {
            return Err(Error::usage("gradient buffer does not match the network shape"));
        }
        if dy.len() != self.out_dim() {
            return Err(Error::usage(format!(
                "output gradient has {} entries, network outputs {}",
                dy.len(),
                self.out_dim()
            )));
        }
        let mut dx = vec![0.0; self.in_dim()];
        let mut offset = 0;
        for (s, stack) in self.stacks.iter().enumerate() {
            let out = stack.last().unwrap().out_dim;
            let mut delta_out = dy[offset..offset + out].to_vec();
            offset += out;
            for l in (0..stack.len()).rev() {
                let layer = &stack[l];
                let z = &cache.pre[s][l];
                let delta: Vec<f64> = delta_out
                    .iter()
                    .zip(z)
                    .map(|(d, &zi)| d * layer.activation.derivative(zi))
                    .collect();
                let input = if l == 0 { &cache.input } else { &cache.post[s][l - 1] };
                let g = &mut grads.stacks[s][l];
                for ((grow, &d), gb) in g
                    .weights
                    .chunks_exact_mut(layer.in_dim)
                    .zip(&delta)
                    .zip(g.bias.iter_mut())
                {
                    *gb = d;
                    if d == 0.0 {
                        grow.fill(0.0);
                    } else {
                        for (gw, xi) in grow.iter_mut().zip(input) {
                            *gw = d * xi;
                        }
                    }
                }
                let mut din = vec![0.0; layer.in_dim];
                for (row, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                    if d != 0.0 {
                        for (acc, w) in din.iter_mut().zip(row) {
                            *acc += w * d;
                        }
                    }
                }
                delta_out = din;
            }
            for (a, b) in dx.iter_mut().zip(&delta_out) {
                *a += b;
            }
        }
        Ok(dx)
    }
}

fn identity_stack(dims: &[usize], output_offset: usize) -> Result<Vec<DenseLayer>> {
    build_stack(dims, |k, n_in, n_out, act| {
        // hidden layers carry the whole input; only the output layer is shifted
        let offset = if k + 2 == dims.len() { output_offset } else { 0 };
        DenseLayer::shifted_identity(n_in, n_out, offset, act)
    })
}

fn random_stack<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Vec<DenseLayer>> {
    build_stack(dims, |_, n_in, n_out, act| DenseLayer::random(n_in, n_out, act, rng))
}

fn build_stack<F>(dims: &[usize], mut make: F) -> Result<Vec<DenseLayer>>
where
    F: FnMut(usize, usize, usize, Activation) -> DenseLayer,
{
    if dims.len() < 2 {
        return Err(Error::config("a network needs at least an input and an output width"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::config("layer widths must be positive"));
    }
    let n_layers = dims.len() - 1;
    Ok((0..n_layers)
        .map(|k| {
            let act = if k + 1 == n_layers {
                Activation::Linear
            } else {
                Activation::Relu
            };
            make(k, dims[k], dims[k + 1], act)
        })
        .collect())
}

/// Boundary handling of [`conv1d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Output has the input length; out-of-range samples read as zero.
    SamePadZero,
    /// Only positions where the whole kernel fits.
    Valid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1DKernel {
    taps: Vec<f64>,
    padding: Padding,
}

impl Conv1DKernel {
    pub fn new(taps: Vec<f64>, padding: Padding) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::config("convolution kernel needs at least one tap"));
        }
        if padding == Padding::SamePadZero && taps.len() % 2 == 0 {
            return Err(Error::config("same-padded convolution needs an odd kernel"));
        }
        Ok(Conv1DKernel { taps, padding })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Discrete convolution in the finite-difference sense: each output is a
/// weighted sum of the input over a fixed stencil around it.
pub fn conv1d(input: &[f64], kernel: &Conv1DKernel) -> Result<Vec<f64>> {
    let k = kernel.taps.len();
    match kernel.padding {
        Padding::Valid => {
            if input.len() < k {
                return Err(Error::config(format!(
                    "valid convolution needs at least {k} inputs, got {}",
                    input.len()
                )));
            }
            Ok(input
                .windows(k)
                .map(|w| w.iter().zip(&kernel.taps).map(|(a, b)| a * b).sum())
                .collect())
        }
        Padding::SamePadZero => {
            let half = (k / 2) as isize;
            let n = input.len() as isize;
            Ok((0..n)
                .map(|x| {
                    (-half..=half)
                        .filter(|o| (0..n).contains(&(x + o)))
                        .map(|o| input[(x + o) as usize] * kernel.taps[(o + half) as usize])
                        .sum()
                })
                .collect())
        }
    }
}
