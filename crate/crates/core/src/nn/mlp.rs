//! Fully connected network with explicit reverse-mode gradients. Parameters
//! live in one flat vector (weights row-major `[out, in]`, then bias, layer by
//! layer) so optimizers and gradient clipping work on plain slices.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::tensor::TensorBuffer;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Initialization scheme, kept with the parameters for reproducibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Orthogonal weights scaled by the gain, zero biases. The last layer uses
    /// `output_gain`.
    Orthogonal {
        seed: u64,
        hidden_gain: f64,
        output_gain: f64,
    },
    Zeros,
    /// Parameters supplied directly (checkpoint or test).
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activation: Activation,
    init: Init,
    layers: Vec<LayerShape>,
    params: Vec<T>,
}

/// Layer inputs and the final output of one forward pass. An empty cache
/// (the `Default`) cannot be used for a backward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardCache<T> {
    activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

fn layout(widths: &[usize]) -> Result<(Vec<LayerShape>, usize)> {
    if widths.len() < 2 {
        return Err(Error::Config("a network needs an input and an output width".into()));
    }
    if widths.contains(&0) {
        return Err(Error::Config(format!("layer widths must be positive: {widths:?}")));
    }
    let mut layers = Vec::with_capacity(widths.len() - 1);
    let mut offset = 0;
    for w in widths.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        layers.push(LayerShape {
            inputs,
            outputs,
            weight_offset: offset,
            bias_offset: offset + inputs * outputs,
        });
        offset += inputs * outputs + outputs;
    }
    Ok((layers, offset))
}

/// `rows x cols` matrix with orthonormal rows or columns, whichever is fewer.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut rng::SimRng) -> DMatrix<f64> {
    let (tall_r, tall_c) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall_r, tall_c, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..tall_c {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    q * gain
}

impl<T: Scalar> Mlp<T> {
    /// `widths = [input, hidden.., output]`; hidden layers use `activation`,
    /// the output layer is linear.
    pub fn new(widths: &[usize], activation: Activation, init: Init) -> Result<Self> {
        let (layers, count) = layout(widths)?;
        let mut params = vec![T::zero(); count];
        if let Init::Orthogonal {
            seed,
            hidden_gain,
            output_gain,
        } = init
        {
            let mut r = rng::stream(seed, rng::STREAM_INIT);
            for (i, l) in layers.iter().enumerate() {
                let gain = if i + 1 == layers.len() { output_gain } else { hidden_gain };
                let w = orthogonal(l.outputs, l.inputs, gain, &mut r);
                for o in 0..l.outputs {
                    for c in 0..l.inputs {
                        params[l.weight_offset + o * l.inputs + c] = T::lit(w[(o, c)]);
                    }
                }
            }
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            init,
            layers,
            params,
        })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: Vec<T>) -> Result<Self> {
        let (layers, count) = layout(widths)?;
        if params.len() != count {
            return Err(Error::Shape {
                context: "network parameters",
                expected: count,
                got: params.len(),
            });
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            init: Init::Explicit,
            layers,
            params,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn init(&self) -> Init {
        self.init
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.widths[0]
    }

    pub fn output_len(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn weight(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        &self.params[l.weight_offset..l.bias_offset]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        &self.params[l.bias_offset..l.bias_offset + l.outputs]
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    fn layer_forward(&self, i: usize, x: &[T]) -> Vec<T> {
        let l = &self.layers[i];
        let last = i + 1 == self.layers.len();
        let w = &self.params[l.weight_offset..l.bias_offset];
        let b = &self.params[l.bias_offset..l.bias_offset + l.outputs];
        (0..l.outputs)
            .map(|o| {
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                let z = row.iter().zip(x).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi);
                if last { z } else { self.activation.apply(z) }
            })
            .collect()
    }

    /// Output only, no cache.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for i in 0..self.layers.len() {
            x = self.layer_forward(i, &x);
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[T]) -> Result<ForwardCache<T>> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for i in 0..self.layers.len() {
            let next = self.layer_forward(i, &activations[i]);
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`
    /// and returns `d loss / d input`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &[T],
        grads: &mut [T],
    ) -> Result<Vec<T>> {
        if cache.is_empty() {
            return Err(Error::Contract("backward called without a forward cache".into()));
        }
        if cache.activations.len() != self.layers.len() + 1
            || cache.activations[0].len() != self.input_len()
        {
            return Err(Error::Contract("forward cache belongs to a different network".into()));
        }
        if grad_output.len() != self.output_len() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: self.output_len(),
                got: grad_output.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape {
                context: "gradient buffer",
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let mut delta = grad_output.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[i];
            let w = &self.params[l.weight_offset..l.bias_offset];
            let mut back = vec![T::zero(); l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = l.weight_offset + o * l.inputs;
                for c in 0..l.inputs {
                    grads[row + c] = grads[row + c] + d * x[c];
                    back[c] = back[c] + d * w[o * l.inputs + c];
                }
                grads[l.bias_offset + o] = grads[l.bias_offset + o] + d;
            }
            if i > 0 {
                for (b, &y) in back.iter_mut().zip(x) {
                    *b = *b * self.activation.slope(y);
                }
            }
            delta = back;
        }
        Ok(delta)
    }

    /// Named blocks `{prefix}.layer{i}.weight` (`[out, in]`) and `.bias` (`[out]`).
    pub fn to_blocks(&self, prefix: &str) -> Vec<(String, TensorBuffer<f64>)> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let w = self.weight(i).iter().map(|v| v.as_f64()).collect();
            let b = self.bias(i).iter().map(|v| v.as_f64()).collect();
            out.push((
                format!("{prefix}.layer{i}.weight"),
                TensorBuffer::new(vec![l.outputs, l.inputs], w).expect("finite parameters"),
            ));
            out.push((
                format!("{prefix}.layer{i}.bias"),
                TensorBuffer::new(vec![l.outputs], b).expect("finite parameters"),
            ));
        }
        out
    }

    /// Rebuilds a network from blocks written by [`Mlp::to_blocks`].
    pub fn from_blocks<'a>(
        prefix: &str,
        activation: Activation,
        lookup: impl Fn(&str) -> Option<&'a TensorBuffer<f64>>,
    ) -> Result<Self> {
        let mut widths = Vec::new();
        let mut params = Vec::new();
        for i in 0.. {
            let Some(w) = lookup(&format!("{prefix}.layer{i}.weight")) else {
                break;
            };
            let name = format!("{prefix}.layer{i}.bias");
            let b = lookup(&name).ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))?;
            let [out, inp] = w.shape() else {
                return Err(Error::Checkpoint(format!("{prefix}.layer{i}.weight is not a matrix")));
            };
            if b.shape() != [*out] {
                return Err(Error::Checkpoint(format!("{name} has shape {:?}", b.shape())));
            }
            if i == 0 {
                widths.push(*inp);
            } else if widths[i] != *inp {
                return Err(Error::Checkpoint(format!(
                    "{prefix}.layer{i} expects {inp} inputs, previous layer gives {}",
                    widths[i]
                )));
            }
            widths.push(*out);
            params.extend(w.values().iter().chain(b.values()).map(|&v| T::lit(v)));
        }
        if widths.is_empty() {
            return Err(Error::Checkpoint(format!("no layers under `{prefix}`")));
        }
        Self::from_params(&widths, activation, params)
    }
}
