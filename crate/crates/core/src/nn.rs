//! Fully connected scalar-output networks with batched evaluation and
//! reverse-mode weight gradients.
//!
//! Parameters are stored flat, layer-major: for each layer the weight matrix
//! (`fan_out x fan_in`, row-major) followed by its bias vector.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sin,
    Tanh,
    Relu,
    Elu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sin => "sin",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Elu => "elu",
        }
    }

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Sin => z.sin(),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sin => z.cos(),
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
        }
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(Self { input_dim, hidden, activation })
    }

    /// `[input_dim, hidden..., 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn layers(&self) -> Vec<LayerSpan> {
        let widths = self.widths();
        let mut offset = 0;
        widths
            .windows(2)
            .map(|w| {
                let span = LayerSpan {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    bias: offset + w[0] * w[1],
                };
                offset += (w[0] + 1) * w[1];
                span
            })
            .collect()
    }

    /// Number of network parameters `K`.
    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, seed: u64) -> ParameterVector {
        let mut rng = SplitMix64::new(seed);
        let mut values = vec![0.0; self.param_count()];
        for span in self.layers() {
            let bound = (6.0 / (span.fan_in + span.fan_out) as f64).sqrt();
            for w in &mut values[span.weights..span.bias] {
                *w = rng.uniform(-bound, bound);
            }
        }
        ParameterVector::new(values)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() < self.param_count() {
            return Err(Error::LengthMismatch { expected: self.param_count(), actual: params.len() });
        }
        if let Some(i) = params[..self.param_count()].iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter(i));
        }
        Ok(())
    }

    fn weight_view<'a>(&self, params: &'a [f64], span: &LayerSpan) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((span.fan_out, span.fan_in), &params[span.weights..span.bias])
            .expect("layer span matches parameter layout")
    }

    fn bias_view<'a>(&self, params: &'a [f64], span: &LayerSpan) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[span.bias..span.bias + span.fan_out])
    }

    /// Evaluates the network at every row of `points`. Only the first
    /// [`param_count`](Self::param_count) entries of `params` are used.
    pub fn forward_batch(&self, params: &[f64], points: ArrayView2<f64>) -> Result<(Vec<f64>, ForwardTape)> {
        self.check_params(params)?;
        if points.ncols() != self.input_dim {
            return Err(Error::LengthMismatch { expected: self.input_dim, actual: points.ncols() });
        }
        if let Some(&bad) = points.iter().find(|v| !(v.abs() <= 1.0 + 1e-9)) {
            return Err(Error::OutOfDomain { value: bad });
        }
        let layers = self.layers();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut act = points.to_owned();
        let last = layers.len() - 1;
        for (l, span) in layers.iter().enumerate() {
            let mut z = act.dot(&self.weight_view(params, span).t());
            z += &self.bias_view(params, span);
            inputs.push(act);
            if l == last {
                act = z;
            } else {
                act = z.mapv(|v| self.activation.eval(v));
                pre.push(z);
            }
        }
        let output = act.into_raw_vec_and_offset().0;
        let tape = ForwardTape {
            params: params[..self.param_count()].to_vec(),
            inputs,
            pre,
            output: output.clone(),
        };
        Ok((output, tape))
    }

    /// Plain evaluation without keeping a tape.
    pub fn eval(&self, params: &[f64], points: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.forward_batch(params, points).map(|(v, _)| v)
    }

    /// Gradient of `sum_p v_p u(p, theta)` with respect to the network
    /// parameters, by one reverse sweep over `tape`.
    pub fn vjp_weights(&self, params: &[f64], tape: &ForwardTape, cotangent: &[f64]) -> Result<Vec<f64>> {
        let k = self.param_count();
        if params.len() < k || params[..k] != tape.params[..] {
            return Err(Error::StaleTape);
        }
        if cotangent.len() != tape.output.len() {
            return Err(Error::LengthMismatch { expected: tape.output.len(), actual: cotangent.len() });
        }
        let layers = self.layers();
        let mut grad = vec![0.0; k];
        let mut g = Array2::from_shape_vec((cotangent.len(), 1), cotangent.to_vec())
            .expect("column vector shape");
        for (l, span) in layers.iter().enumerate().rev() {
            let input = &tape.inputs[l];
            let dw = g.t().dot(input);
            for (dst, src) in grad[span.weights..span.bias].iter_mut().zip(dw.iter()) {
                *dst = *src;
            }
            let db = g.sum_axis(Axis(0));
            grad[span.bias..span.bias + span.fan_out].copy_from_slice(db.as_slice().expect("contiguous"));
            if l > 0 {
                let mut back = g.dot(&self.weight_view(params, span));
                let z = &tape.pre[l - 1];
                back.zip_mut_with(z, |b, &zv| *b *= self.activation.derivative(zv));
                g = back;
            }
        }
        Ok(grad)
    }
}

/// Cached per-layer activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    params: Vec<f64>,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Vec<f64>,
}

impl ForwardTape {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output.is_empty()
    }

    /// Recomputes the output from the cached last-layer input.
    pub fn replay(&self, arch: &MlpArchitecture) -> Vec<f64> {
        let span = *arch.layers().last().expect("at least one layer");
        let mut z = self.inputs.last().expect("recorded layer").dot(&arch.weight_view(&self.params, &span).t());
        z += &arch.bias_view(&self.params, &span);
        z.into_raw_vec_and_offset().0
    }
}

/// Network weights followed by optional trainable scalars (inverse-problem
/// parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    net_len: usize,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        let net_len = values.len();
        Self { values, net_len }
    }

    pub fn with_extras(mut self, extras: &[f64]) -> Self {
        self.values.truncate(self.net_len);
        self.values.extend_from_slice(extras);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn net(&self) -> &[f64] {
        &self.values[..self.net_len]
    }

    pub fn extras(&self) -> &[f64] {
        &self.values[self.net_len..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
