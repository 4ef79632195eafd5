//! U-Net variant with a row-collapsing head.
//!
//! ```text
//! input (B,1,R,W)
//!   encoder d = 0..L-1:  conv3-relu, conv3-relu  -> skip_d, maxpool 2×2
//!   bottleneck:          conv3-relu, conv3-relu
//!   decoder d = L-1..0:  upsample ×2, conv3-relu, concat [skip_d, up], conv3-relu, conv3-relu
//!   head:                max over rows (R×1), conv1, sigmoid|clamp   -> (B,1,1,W)
//! ```
//!
//! Channels double at every encoder depth starting from `base_channels`.

use crate::error::{Error, Result};
use crate::rng::SampleRng;
use crate::sigmodel::Order;

use super::ops;
use super::{NetConfig, OutputActivation, Real, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    Conv1x1,
}

impl LayerKind {
    pub fn id(self) -> u8 {
        match self {
            LayerKind::Conv3x3 => 1,
            LayerKind::Conv1x1 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(LayerKind::Conv3x3),
            2 => Some(LayerKind::Conv1x1),
            _ => None,
        }
    }

    pub fn kernel(self) -> usize {
        match self {
            LayerKind::Conv3x3 => 3,
            LayerKind::Conv1x1 => 1,
        }
    }
}

/// A convolution's parameters and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub m_weight: Vec<T>,
    pub v_weight: Vec<T>,
    pub m_bias: Vec<T>,
    pub v_bias: Vec<T>,
}

impl<T: Real> ConvLayer<T> {
    fn zeros(kind: LayerKind, c_in: usize, c_out: usize) -> Self {
        let k = kind.kernel();
        let wlen = c_out * c_in * k * k;
        ConvLayer {
            kind,
            c_in,
            c_out,
            weight: vec![T::zero(); wlen],
            bias: vec![T::zero(); c_out],
            m_weight: vec![T::zero(); wlen],
            v_weight: vec![T::zero(); wlen],
            m_bias: vec![T::zero(); c_out],
            v_bias: vec![T::zero(); c_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.c_in * self.kind.kernel() * self.kind.kernel()
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn cast<U: Real>(&self) -> ConvLayer<U> {
        let c = |v: &Vec<T>| v.iter().map(|&x| U::of(x.to_f64().unwrap_or(f64::NAN))).collect();
        ConvLayer {
            kind: self.kind,
            c_in: self.c_in,
            c_out: self.c_out,
            weight: c(&self.weight),
            bias: c(&self.bias),
            m_weight: c(&self.m_weight),
            v_weight: c(&self.v_weight),
            m_bias: c(&self.m_bias),
            v_bias: c(&self.v_bias),
        }
    }
}

/// `(kind, c_in, c_out)` of every layer, in parameter order.
pub fn topology(config: &NetConfig) -> Vec<(LayerKind, usize, usize)> {
    let levels = config.levels;
    let mut layers = Vec::new();
    let mut c_in = 1;
    for d in 0..levels {
        let c = config.channels_at(d);
        layers.push((LayerKind::Conv3x3, c_in, c));
        layers.push((LayerKind::Conv3x3, c, c));
        c_in = c;
    }
    let cb = config.channels_at(levels);
    layers.push((LayerKind::Conv3x3, c_in, cb));
    layers.push((LayerKind::Conv3x3, cb, cb));
    for d in (0..levels).rev() {
        let c = config.channels_at(d);
        layers.push((LayerKind::Conv3x3, 2 * c, c));
        layers.push((LayerKind::Conv3x3, 2 * c, c));
        layers.push((LayerKind::Conv3x3, c, c));
    }
    layers.push((LayerKind::Conv1x1, config.base_channels, 1));
    layers
}

/// Parameter gradients, one `(weight, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![T::zero(); l.weight.len()],
                    bias: vec![T::zero(); l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Flattened view in parameter order (weights then bias, layer by layer).
    pub fn flatten(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// A selective-removal network: topology, parameters, optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetConfig,
    /// Which nonlinearity order this network was trained to remove.
    pub order: Option<Order>,
    pub layers: Vec<ConvLayer<T>>,
    /// Adam step counter.
    pub step: u64,
}

enum Op {
    Input,
    Conv { src: usize, layer: usize },
    Relu { src: usize },
    MaxPool { src: usize, arg: Vec<u32> },
    RowMax { src: usize, arg: Vec<u32> },
    Upsample { src: usize },
    Concat { a: usize, b: usize },
    Sigmoid { src: usize },
    Clamp { src: usize },
}

struct Tape<T> {
    values: Vec<Tensor4<T>>,
    ops: Vec<Op>,
}

impl<T: Real> Tape<T> {
    fn push(&mut self, value: Tensor4<T>, op: Op) -> usize {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }
}

impl<T: Real> Network<T> {
    /// All parameters and moments zero.
    pub fn zeros(config: NetConfig, order: Option<Order>) -> Result<Self> {
        config.validate()?;
        let layers = topology(&config)
            .into_iter()
            .map(|(kind, c_in, c_out)| ConvLayer::zeros(kind, c_in, c_out))
            .collect();
        Ok(Network {
            config,
            order,
            layers,
            step: 0,
        })
    }

    /// He-uniform weights `U(-√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn new(config: NetConfig, order: Option<Order>, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config, order)?;
        let mut rng = SampleRng::from_seed(seed);
        for layer in &mut net.layers {
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            for w in &mut layer.weight {
                *w = T::of(rng.uniform(-bound, bound));
            }
        }
        Ok(net)
    }

    /// Sets the head bias so a zero feature map outputs `mean`. Without this the
    /// first Adam steps push every output into the flat tail of the sigmoid.
    pub fn init_head_bias(&mut self, mean: f64) {
        let mean = mean.clamp(1e-3, 1.0 - 1e-3);
        let bias = match self.config.output_activation {
            OutputActivation::Sigmoid => (mean / (1.0 - mean)).ln(),
            OutputActivation::Clamp => mean,
        };
        if let Some(head) = self.layers.last_mut() {
            head.bias.iter_mut().for_each(|b| *b = T::of(bias));
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.num_parameters()).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config,
            order: self.order,
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            step: self.step,
        }
    }

    fn check_input(&self, input: &Tensor4<T>) -> Result<()> {
        let [_, c, h, w] = input.dims;
        if c != 1 || h != self.config.rows || w != self.config.width {
            return Err(Error::ShapeMismatch(format!(
                "input dims {:?} do not match (B, 1, {}, {})",
                input.dims, self.config.rows, self.config.width
            )));
        }
        let finite = self
            .layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(())
    }

    fn run(&self, input: &Tensor4<T>) -> Result<Tape<T>> {
        self.check_input(input)?;
        let mut tape = Tape {
            values: Vec::with_capacity(64),
            ops: Vec::with_capacity(64),
        };
        let mut x = tape.push(input.clone(), Op::Input);
        let mut layer = 0;

        let conv_relu = |tape: &mut Tape<T>, src: usize, layer: &mut usize| -> usize {
            let l = &self.layers[*layer];
            let y = ops::conv_forward(&tape.values[src], &l.weight, &l.bias, l.c_out, l.kind.kernel());
            let conv = tape.push(y, Op::Conv { src, layer: *layer });
            *layer += 1;
            let r = ops::relu_forward(&tape.values[conv]);
            tape.push(r, Op::Relu { src: conv })
        };

        let mut skips = Vec::with_capacity(self.config.levels);
        for _ in 0..self.config.levels {
            x = conv_relu(&mut tape, x, &mut layer);
            x = conv_relu(&mut tape, x, &mut layer);
            skips.push(x);
            let (pooled, arg) = ops::maxpool2_forward(&tape.values[x]);
            x = tape.push(pooled, Op::MaxPool { src: x, arg });
        }
        x = conv_relu(&mut tape, x, &mut layer);
        x = conv_relu(&mut tape, x, &mut layer);
        for skip in skips.into_iter().rev() {
            let up = ops::upsample2_forward(&tape.values[x]);
            x = tape.push(up, Op::Upsample { src: x });
            x = conv_relu(&mut tape, x, &mut layer);
            let cat = ops::concat_forward(&tape.values[skip], &tape.values[x]);
            x = tape.push(cat, Op::Concat { a: skip, b: x });
            x = conv_relu(&mut tape, x, &mut layer);
            x = conv_relu(&mut tape, x, &mut layer);
        }
        let (collapsed, arg) = ops::rowmax_forward(&tape.values[x]);
        x = tape.push(collapsed, Op::RowMax { src: x, arg });
        let head = &self.layers[layer];
        let y = ops::conv_forward(&tape.values[x], &head.weight, &head.bias, 1, 1);
        x = tape.push(y, Op::Conv { src: x, layer });
        let out = match self.config.output_activation {
            OutputActivation::Sigmoid => (ops::sigmoid_forward(&tape.values[x]), Op::Sigmoid { src: x }),
            OutputActivation::Clamp => (ops::clamp_forward(&tape.values[x]), Op::Clamp { src: x }),
        };
        tape.push(out.0, out.1);
        Ok(tape)
    }

    /// One output vector of length `width` per batch item, each in `[0, 1]`.
    pub fn forward(&self, input: &Tensor4<T>) -> Result<Vec<Vec<T>>> {
        let tape = self.run(input)?;
        let out = tape.values.last().expect("tape has an output");
        Ok(out.data.chunks(self.config.width).map(|c| c.to_vec()).collect())
    }

    /// MAE loss and exact parameter gradients for `input` against `target`
    /// (row-major `batch × width`).
    pub fn backward(&self, input: &Tensor4<T>, target: &[T]) -> Result<(T, Gradients<T>)> {
        self.backward_scaled(input, target, T::one())
    }

    /// As [`Network::backward`] for the loss `scale · MAE`.
    pub fn backward_scaled(&self, input: &Tensor4<T>, target: &[T], scale: T) -> Result<(T, Gradients<T>)> {
        let tape = self.run(input)?;
        let out = tape.values.last().expect("tape has an output");
        if target.len() != out.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "target has {} values, output has {}",
                target.len(),
                out.data.len()
            )));
        }
        let count = T::of(out.data.len() as f64);
        let mut loss = T::zero();
        let mut dout = Tensor4::zeros(out.dims);
        for ((d, &p), &t) in dout.data.iter_mut().zip(&out.data).zip(target) {
            let diff = p - t;
            loss += diff.abs();
            // subgradient 0 at equality
            *d = if diff > T::zero() {
                scale / count
            } else if diff < T::zero() {
                -scale / count
            } else {
                T::zero()
            };
        }
        loss = scale * loss / count;

        let mut grads = Gradients::zeros_like(self);
        let mut adj: Vec<Option<Tensor4<T>>> = (0..tape.values.len()).map(|_| None).collect();
        let last = tape.values.len() - 1;
        adj[last] = Some(dout);

        fn accumulate<T: Real>(slot: &mut Option<Tensor4<T>>, g: Tensor4<T>) {
            match slot {
                Some(existing) => {
                    for (a, b) in existing.data.iter_mut().zip(&g.data) {
                        *a += *b;
                    }
                }
                None => *slot = Some(g),
            }
        }

        for node in (0..tape.values.len()).rev() {
            let Some(g) = adj[node].take() else { continue };
            match &tape.ops[node] {
                Op::Input => {}
                Op::Conv { src, layer } => {
                    let l = &self.layers[*layer];
                    let lg = &mut grads.layers[*layer];
                    let need_dx = !matches!(tape.ops[*src], Op::Input);
                    let dx = ops::conv_backward(
                        &tape.values[*src],
                        &l.weight,
                        l.kind.kernel(),
                        l.c_out,
                        &g,
                        &mut lg.weight,
                        &mut lg.bias,
                        need_dx,
                    );
                    if let Some(dx) = dx {
                        accumulate(&mut adj[*src], dx);
                    }
                }
                Op::Relu { src } => {
                    let dx = ops::relu_backward(&tape.values[node], &g);
                    accumulate(&mut adj[*src], dx);
                }
                Op::MaxPool { src, arg } | Op::RowMax { src, arg } => {
                    let dx = ops::pool_backward(tape.values[*src].dims, arg, &g);
                    accumulate(&mut adj[*src], dx);
                }
                Op::Upsample { src } => {
                    let dx = ops::upsample2_backward(tape.values[*src].dims, &g);
                    accumulate(&mut adj[*src], dx);
                }
                Op::Concat { a, b } => {
                    let (da, db) = ops::concat_backward(tape.values[*a].dims, tape.values[*b].dims, &g);
                    accumulate(&mut adj[*a], da);
                    accumulate(&mut adj[*b], db);
                }
                Op::Sigmoid { src } => {
                    let dx = ops::sigmoid_backward(&tape.values[node], &g);
                    accumulate(&mut adj[*src], dx);
                }
                Op::Clamp { src } => {
                    let dx = ops::clamp_backward(&tape.values[*src], &g);
                    accumulate(&mut adj[*src], dx);
                }
            }
        }
        Ok((loss, grads))
    }

    /// Distance of the evaluation point from the nearest non-differentiable
    /// point: ReLU inputs near zero, near-ties in max pooling, outputs near
    /// their target under the absolute loss.
    pub fn kink_margin(&self, input: &Tensor4<T>, target: &[T]) -> Result<T> {
        let tape = self.run(input)?;
        let mut margin = T::infinity();
        for op in &tape.ops {
            let m = match op {
                Op::Relu { src } => tape.values[*src].data.iter().fold(T::infinity(), |m, v| m.min(v.abs())),
                Op::MaxPool { src, .. } => ops::maxpool2_margin(&tape.values[*src]),
                Op::RowMax { src, .. } => ops::rowmax_margin(&tape.values[*src]),
                _ => T::infinity(),
            };
            margin = margin.min(m);
        }
        let out = tape.values.last().expect("tape has an output");
        if target.len() != out.data.len() {
            return Err(Error::ShapeMismatch("target length does not match the output".into()));
        }
        for (&p, &t) in out.data.iter().zip(target) {
            margin = margin.min((p - t).abs());
        }
        Ok(margin)
    }

    /// MAE of the network output against `target`, forward pass only.
    pub fn loss(&self, input: &Tensor4<T>, target: &[T]) -> Result<T> {
        let out = self.forward(input)?;
        let flat: Vec<T> = out.into_iter().flatten().collect();
        mae_loss(&flat, target)
    }

    /// Mutable access to the `index`-th scalar parameter in flattened order.
    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut T> {
        for layer in &mut self.layers {
            if index < layer.weight.len() {
                return Some(&mut layer.weight[index]);
            }
            index -= layer.weight.len();
            if index < layer.bias.len() {
                return Some(&mut layer.bias[index]);
            }
            index -= layer.bias.len();
        }
        None
    }
}

/// Mean absolute error.
pub fn mae_loss<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} values, target has {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for (&p, &t) in pred.iter().zip(target) {
        sum += (p - t).abs();
    }
    Ok(sum / T::of(pred.len() as f64))
}
