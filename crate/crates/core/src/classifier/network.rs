//! Forward and backward passes of the convolutional classifier.
//!
//! Parameters are one flat `f32` buffer; activations and gradients are
//! `f64`. Every block is conv(3×3, stride 1, pad 1) → ReLU → dropout →
//! optional max-pool, followed by linear → ReLU → dropout blocks and a
//! final linear layer producing a single logit.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{NetworkConfig, Pool};
use super::optim::Optimizer;
use crate::error::{Error, Result};
use crate::image::ImageStack;

pub const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        /// Offset of the `[out][in][3][3]` kernel, followed by `out` biases.
        offset: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    MaxPool {
        channels: usize,
        height: usize,
        width: usize,
        pool: Pool,
        out_height: usize,
        out_width: usize,
    },
    Linear {
        inputs: usize,
        outputs: usize,
        /// Offset of the `[out][in]` weights, followed by `out` biases.
        offset: usize,
    },
}

impl Layer {
    fn param_count(&self) -> usize {
        match *self {
            Layer::Conv { in_channels, out_channels, .. } => {
                out_channels * in_channels * KERNEL * KERNEL + out_channels
            }
            Layer::Linear { inputs, outputs, .. } => outputs * inputs + outputs,
            _ => 0,
        }
    }
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Cached state of one forward pass.
struct Tape {
    /// Input of each layer.
    inputs: Vec<Vec<f64>>,
    /// Per-layer dropout scale factors or pooling argmax, when relevant.
    aux: Vec<Aux>,
}

enum Aux {
    None,
    Mask(Vec<f64>),
    Argmax(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
    params: Vec<f32>,
    pub(crate) optimizer: Optimizer,
    pub(crate) rng: ChaCha8Rng,
}

fn conv_forward(
    input: &[f64],
    params: &[f32],
    (in_c, out_c, h, w): (usize, usize, usize, usize),
) -> Vec<f64> {
    let hw = h * w;
    let (kernels, biases) = params.split_at(out_c * in_c * KERNEL * KERNEL);
    let mut out = vec![0.0; out_c * hw];
    for o in 0..out_c {
        let plane = &mut out[o * hw..(o + 1) * hw];
        plane.fill(biases[o] as f64);
        for c in 0..in_c {
            let src = &input[c * hw..(c + 1) * hw];
            let k = &kernels[(o * in_c + c) * 9..(o * in_c + c + 1) * 9];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wgt = k[ky * KERNEL + kx] as f64;
                    if wgt == 0.0 {
                        continue;
                    }
                    let (y0, y1) = shifted_range(ky, h);
                    let (x0, x1) = shifted_range(kx, w);
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let dst = &mut plane[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (d, v) in dst.iter_mut().zip(s) {
                            *d += wgt * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Output positions whose source `pos + k - 1` (pad 1) is in bounds.
fn shifted_range(k: usize, len: usize) -> (usize, usize) {
    let start = if k == 0 { 1 } else { 0 };
    let end = (len + 1 - k).min(len);
    (start.min(end), end)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    grad_out: &[f64],
    params: &[f32],
    grads: Option<&mut [f64]>,
    (in_c, out_c, h, w): (usize, usize, usize, usize),
    want_input: bool,
) -> Vec<f64> {
    let hw = h * w;
    let nk = out_c * in_c * KERNEL * KERNEL;
    let kernels = &params[..nk];
    let mut grad_in = if want_input { vec![0.0; in_c * hw] } else { Vec::new() };
    let mut grads = grads;
    for o in 0..out_c {
        let g = &grad_out[o * hw..(o + 1) * hw];
        if let Some(gr) = grads.as_deref_mut() {
            gr[nk + o] += g.iter().sum::<f64>();
        }
        for c in 0..in_c {
            let src = &input[c * hw..(c + 1) * hw];
            let base = (o * in_c + c) * 9;
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let (y0, y1) = shifted_range(ky, h);
                    let (x0, x1) = shifted_range(kx, w);
                    let wgt = kernels[base + ky * KERNEL + kx] as f64;
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let go = &g[y * w + x0..y * w + x1];
                        let range = sy * w + x0 + kx - 1..sy * w + x1 + kx - 1;
                        if grads.is_some() {
                            acc += go.iter().zip(&src[range.clone()]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        if want_input && wgt != 0.0 {
                            let dst = &mut grad_in[c * hw + range.start..c * hw + range.end];
                            for (d, v) in dst.iter_mut().zip(go) {
                                *d += wgt * v;
                            }
                        }
                    }
                    if let Some(gr) = grads.as_deref_mut() {
                        gr[base + ky * KERNEL + kx] += acc;
                    }
                }
            }
        }
    }
    grad_in
}

fn pool_forward(input: &[f64], channels: usize, h: usize, w: usize, pool: Pool, oh: usize, ow: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; channels * oh * ow];
    let mut arg = vec![0usize; channels * oh * ow];
    for c in 0..channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = usize::MAX;
                for ky in 0..pool.kernel {
                    let y = (oy * pool.stride + ky) as isize - pool.pad as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..pool.kernel {
                        let x = (ox * pool.stride + kx) as isize - pool.pad as isize;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let idx = c * h * w + y as usize * w + x as usize;
                        if input[idx] > best {
                            best = input[idx];
                            best_at = idx;
                        }
                    }
                }
                let o = c * oh * ow + oy * ow + ox;
                // windows never lie entirely in the padding since 2·pad ≤ kernel
                out[o] = if best_at == usize::MAX { 0.0 } else { best };
                arg[o] = best_at;
            }
        }
    }
    (out, arg)
}

fn linear_forward(input: &[f64], params: &[f32], inputs: usize, outputs: usize) -> Vec<f64> {
    let (weights, biases) = params.split_at(inputs * outputs);
    (0..outputs)
        .map(|o| {
            let row = &weights[o * inputs..(o + 1) * inputs];
            biases[o] as f64 + row.iter().zip(input).map(|(&wv, &x)| wv as f64 * x).sum::<f64>()
        })
        .collect()
}

impl Network {
    /// Lays out the layers and draws initial parameters uniformly from
    /// `±1/√fan_in`, deterministically from `config.seed`.
    pub fn build(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let [mut c, mut h, mut w] = config.input_shape;
        let pools = config.pools()?;
        let mut layers: Vec<Layer> = Vec::new();
        let mut offset = 0;
        fn push(layers: &mut Vec<Layer>, offset: &mut usize, layer: Layer) {
            *offset += layer.param_count();
            layers.push(layer);
        }
        for (&filters, pool) in config.filters.iter().zip(&pools) {
            let layer = Layer::Conv { in_channels: c, out_channels: filters, height: h, width: w, offset };
            push(&mut layers, &mut offset, layer);
            c = filters;
            let layer = Layer::Relu;
            push(&mut layers, &mut offset, layer);
            if config.dropout > 0.0 {
                let layer = Layer::Dropout { rate: config.dropout };
                push(&mut layers, &mut offset, layer);
            }
            if let Some(pool) = *pool {
                let (oh, ow) = match (pool.output_len(h), pool.output_len(w)) {
                    (Some(a), Some(b)) if a >= 1 && b >= 1 => (a, b),
                    _ => {
                        return Err(Error::Shape {
                            expected: format!("pool {pool:?} to fit a {h}×{w} map"),
                            got: "empty output".into(),
                        })
                    }
                };
                let layer = Layer::MaxPool { channels: c, height: h, width: w, pool, out_height: oh, out_width: ow };
                push(&mut layers, &mut offset, layer);
                h = oh;
                w = ow;
            }
        }
        let mut features = c * h * w;
        for &width in &config.linear {
            let layer = Layer::Linear { inputs: features, outputs: width, offset };
            push(&mut layers, &mut offset, layer);
            let layer = Layer::Relu;
            push(&mut layers, &mut offset, layer);
            if config.dropout > 0.0 {
                let layer = Layer::Dropout { rate: config.dropout };
                push(&mut layers, &mut offset, layer);
            }
            features = width;
        }
        let layer = Layer::Linear { inputs: features, outputs: 1, offset };
        push(&mut layers, &mut offset, layer);
        let total = offset;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0f32; total];
        for layer in &layers {
            let (fan_in, start) = match *layer {
                Layer::Conv { in_channels, offset, .. } => (in_channels * KERNEL * KERNEL, offset),
                Layer::Linear { inputs, offset, .. } => (inputs, offset),
                _ => continue,
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[start..start + layer.param_count()] {
                *p = rng.gen_range(-bound..bound) as f32;
            }
        }
        Ok(Network {
            config: config.clone(),
            layers,
            optimizer: Optimizer::new(config.optimizer, config.lr, total),
            params,
            rng,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn parameters(&self) -> &[f32] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.config.input_shape.iter().product()
    }

    /// Sets every bias to zero.
    pub fn zero_biases(&mut self) {
        for layer in &self.layers {
            match *layer {
                Layer::Conv { in_channels, out_channels, offset, .. } => {
                    let start = offset + out_channels * in_channels * KERNEL * KERNEL;
                    self.params[start..start + out_channels].fill(0.0);
                }
                Layer::Linear { inputs, outputs, offset } => {
                    let start = offset + inputs * outputs;
                    self.params[start..start + outputs].fill(0.0);
                }
                _ => {}
            }
        }
    }

    /// Zeroes every first-layer weight that reads input channel `channel`,
    /// so the logit no longer depends on it.
    pub fn mask_input_channel(&mut self, channel: usize) {
        let [_, h, w] = self.config.input_shape;
        match self.layers.first() {
            Some(&Layer::Conv { in_channels, out_channels, offset, .. }) => {
                for o in 0..out_channels {
                    let start = offset + (o * in_channels + channel) * KERNEL * KERNEL;
                    self.params[start..start + KERNEL * KERNEL].fill(0.0);
                }
            }
            Some(&Layer::Linear { inputs, outputs, offset }) => {
                let hw = h * w;
                for o in 0..outputs {
                    let start = offset + o * inputs + channel * hw;
                    self.params[start..start + hw].fill(0.0);
                }
            }
            _ => {}
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_len() {
            return Err(Error::Shape {
                expected: format!("{:?}", self.config.input_shape),
                got: format!("{len} values"),
            });
        }
        Ok(())
    }

    pub fn check_stack(&self, stack: &ImageStack) -> Result<()> {
        if stack.shape() != self.config.input_shape {
            return Err(Error::Shape {
                expected: format!("{:?}", self.config.input_shape),
                got: format!("{:?} for {}", stack.shape(), stack.sentence_id),
            });
        }
        Ok(())
    }

    fn run(&mut self, input: Vec<f64>, mode: Mode) -> (f64, Tape) {
        let mut tape = Tape { inputs: Vec::with_capacity(self.layers.len()), aux: Vec::new() };
        let mut x = input;
        for layer in &self.layers {
            let (next, aux) = match *layer {
                Layer::Conv { in_channels, out_channels, height, width, offset } => {
                    let p = &self.params[offset..offset + layer.param_count()];
                    (conv_forward(&x, p, (in_channels, out_channels, height, width)), Aux::None)
                }
                Layer::Relu => (x.iter().map(|&v| v.max(0.0)).collect(), Aux::None),
                Layer::Dropout { rate } => match mode {
                    Mode::Eval => (x.clone(), Aux::None),
                    Mode::Train => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { keep })
                            .collect();
                        (x.iter().zip(&mask).map(|(a, m)| a * m).collect(), Aux::Mask(mask))
                    }
                },
                Layer::MaxPool { channels, height, width, pool, out_height, out_width } => {
                    let (out, arg) = pool_forward(&x, channels, height, width, pool, out_height, out_width);
                    (out, Aux::Argmax(arg))
                }
                Layer::Linear { inputs, outputs, offset } => {
                    let p = &self.params[offset..offset + layer.param_count()];
                    (linear_forward(&x, p, inputs, outputs), Aux::None)
                }
            };
            tape.inputs.push(std::mem::replace(&mut x, next));
            tape.aux.push(aux);
        }
        (x[0], tape)
    }

    /// Backpropagates `d_logit`; accumulates parameter gradients into
    /// `grads` when given and returns the input gradient when asked.
    fn backprop(&self, tape: &Tape, d_logit: f64, mut grads: Option<&mut [f64]>, want_input: bool) -> Vec<f64> {
        let mut g = vec![d_logit];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[idx];
            let need_below = want_input || idx > 0;
            g = match *layer {
                Layer::Conv { in_channels, out_channels, height, width, offset } => {
                    let n = layer.param_count();
                    let p = &self.params[offset..offset + n];
                    let gslice = grads.as_deref_mut().map(|gr| &mut gr[offset..offset + n]);
                    conv_backward(input, &g, p, gslice, (in_channels, out_channels, height, width), need_below)
                }
                Layer::Relu => g.iter().zip(input).map(|(d, &x)| if x > 0.0 { *d } else { 0.0 }).collect(),
                Layer::Dropout { .. } => match &tape.aux[idx] {
                    Aux::Mask(mask) => g.iter().zip(mask).map(|(d, m)| d * m).collect(),
                    _ => g,
                },
                Layer::MaxPool { .. } => {
                    let Aux::Argmax(arg) = &tape.aux[idx] else { unreachable!() };
                    let mut out = vec![0.0; input.len()];
                    for (d, &a) in g.iter().zip(arg) {
                        if a != usize::MAX {
                            out[a] += d;
                        }
                    }
                    out
                }
                Layer::Linear { inputs, outputs, offset } => {
                    let weights = &self.params[offset..offset + inputs * outputs];
                    if let Some(gr) = grads.as_deref_mut() {
                        let gw = &mut gr[offset..offset + inputs * outputs + outputs];
                        for o in 0..outputs {
                            let d = g[o];
                            if d != 0.0 {
                                for (acc, x) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(input) {
                                    *acc += d * x;
                                }
                            }
                            gw[inputs * outputs + o] += d;
                        }
                    }
                    if need_below {
                        let mut below = vec![0.0; inputs];
                        for o in 0..outputs {
                            let d = g[o];
                            if d == 0.0 {
                                continue;
                            }
                            for (b, &wv) in below.iter_mut().zip(&weights[o * inputs..(o + 1) * inputs]) {
                                *b += d * wv as f64;
                            }
                        }
                        below
                    } else {
                        Vec::new()
                    }
                }
            };
        }
        g
    }

    /// Logit for a raw input in `f64`.
    pub fn forward_raw(&mut self, input: &[f64], mode: Mode) -> Result<f64> {
        self.check_input(input.len())?;
        Ok(self.run(input.to_vec(), mode).0)
    }

    pub fn forward(&mut self, stack: &ImageStack, mode: Mode) -> Result<f64> {
        self.check_stack(stack)?;
        Ok(self.run(to_f64(stack.data()), mode).0)
    }

    /// Forward + backward on one sample, adding `∂loss/∂θ` into `grads`.
    /// Returns the logit.
    pub(crate) fn accumulate(
        &mut self,
        input: Vec<f64>,
        grads: &mut [f64],
        d_loss: impl Fn(f64) -> f64,
    ) -> f64 {
        let (logit, tape) = self.run(input, Mode::Train);
        self.backprop(&tape, d_loss(logit), Some(grads), false);
        logit
    }

    /// `∂logit/∂input` in evaluation mode.
    pub fn input_gradient_raw(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let (_, tape) = self.run(input.to_vec(), Mode::Eval);
        Ok(self.backprop(&tape, 1.0, None, true))
    }

    pub fn input_gradient(&mut self, stack: &ImageStack) -> Result<Vec<f64>> {
        self.check_stack(stack)?;
        self.input_gradient_raw(&to_f64(stack.data()))
    }

    /// ReLU on/off pattern and pooling winners of an evaluation pass; two
    /// inputs with the same pattern lie in the same linear region.
    pub fn activation_pattern(&mut self, input: &[f64]) -> Result<Vec<usize>> {
        self.check_input(input.len())?;
        let (_, tape) = self.run(input.to_vec(), Mode::Eval);
        let mut pattern = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Relu => pattern.extend(tape.inputs[idx].iter().map(|&x| (x > 0.0) as usize)),
                Layer::MaxPool { .. } => {
                    if let Aux::Argmax(a) = &tape.aux[idx] {
                        pattern.extend_from_slice(a);
                    }
                }
                _ => {}
            }
        }
        Ok(pattern)
    }

    /// Class 1 iff the logit is positive.
    pub fn predict(&mut self, stack: &ImageStack) -> Result<u8> {
        Ok((self.forward(stack, Mode::Eval)? > 0.0) as u8)
    }

    pub(crate) fn apply_gradients(&mut self, grads: &[f64]) {
        self.optimizer.step(&mut self.params, grads);
    }

    /// Writes `model.json` (config and layer table) and `params.bin`
    /// (little-endian `f32`) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = Checkpoint {
            config: self.config.clone(),
            layers: self.layers.clone(),
            param_count: self.params.len(),
        };
        let path = dir.join("model.json");
        let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json { path: path.clone(), source })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let bin = dir.join("params.bin");
        let bytes: Vec<u8> = self.params.iter().flat_map(|p| p.to_le_bytes()).collect();
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("model.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Checkpoint = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
        let mut net = Network::build(&meta.config)?;
        if net.layers != meta.layers || net.params.len() != meta.param_count {
            return Err(Error::invalid(format!("{} does not match its config", path.display())));
        }
        let bin = dir.join("params.bin");
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != 4 * meta.param_count {
            return Err(Error::ByteLength {
                path: bin,
                expected: 4 * meta.param_count as u64,
                found: bytes.len() as u64,
            });
        }
        for (p, c) in net.params.iter_mut().zip(bytes.chunks_exact(4)) {
            *p = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: NetworkConfig,
    layers: Vec<Layer>,
    param_count: usize,
}

pub(crate) fn to_f64(data: &[f32]) -> Vec<f64> {
    data.iter().map(|&v| v as f64).collect()
}
