//! Dense tanh networks with hand-derived reverse-mode gradients.
//!
//! Parameters live in one contiguous vector in the canonical order used by
//! federation and checkpoints: layer by layer, the `in x out` weight matrix in
//! row-major order followed by the `out` biases. Element `(i, j)` of a weight
//! matrix connects input `i` to output `j`.

mod codec;
mod optim;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

pub use codec::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, FlatParams, CHECKPOINT_MAGIC};
pub use optim::{apply_update, AdamConfig, OptState};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Builds the shape list `[in, h_1, ..., h_k, out]` as chained layers.
pub fn chain_shapes(widths: &[usize]) -> Vec<LayerShape> {
    widths
        .windows(2)
        .map(|w| LayerShape::new(w[0], w[1]))
        .collect()
}

pub(crate) fn check_chain(shapes: &[LayerShape]) -> Result<()> {
    if shapes.is_empty() {
        return Err(Error::ShapeChain {
            layer: 0,
            expected: 1,
            actual: 0,
        });
    }
    for (l, s) in shapes.iter().enumerate() {
        if s.inputs == 0 || s.outputs == 0 {
            return Err(Error::ShapeChain {
                layer: l,
                expected: s.inputs.max(1),
                actual: 0,
            });
        }
        if l > 0 && shapes[l - 1].outputs != s.inputs {
            return Err(Error::ShapeChain {
                layer: l,
                expected: s.inputs,
                actual: shapes[l - 1].outputs,
            });
        }
    }
    Ok(())
}

/// Parameter gradient in the canonical flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Layer activations kept from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input batch, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Array2<f64>>,
    /// Output layer before its activation.
    output_pre: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least the input is cached")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("at least the input is cached")
    }

    pub fn output_preactivation(&self) -> &Array2<f64> {
        &self.output_pre
    }
}

/// Feed-forward network: tanh on hidden layers, configurable on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    shapes: Vec<LayerShape>,
    output_activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Weights and biases uniform in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn init(shapes: &[LayerShape], output_activation: Activation, seed: u64) -> Result<Self> {
        check_chain(shapes)?;
        let mut rng = seeded(seed);
        let mut params = Vec::with_capacity(shapes.iter().map(LayerShape::param_count).sum());
        for s in shapes {
            let bound = 1.0 / (s.inputs as f64).sqrt();
            for _ in 0..s.param_count() {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Self {
            shapes: shapes.to_vec(),
            output_activation,
            params,
        })
    }

    pub fn zeros(shapes: &[LayerShape], output_activation: Activation) -> Result<Self> {
        check_chain(shapes)?;
        let n = shapes.iter().map(LayerShape::param_count).sum();
        Ok(Self {
            shapes: shapes.to_vec(),
            output_activation,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(
        shapes: &[LayerShape],
        output_activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_chain(shapes)?;
        let expected: usize = shapes.iter().map(LayerShape::param_count).sum();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "mlp parameters",
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            shapes: shapes.to_vec(),
            output_activation,
            params,
        })
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Overwrites all parameters; lengths must match.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "mlp parameters",
                expected: self.params.len(),
                actual: values.len(),
            });
        }
        self.params.copy_from_slice(values);
        Ok(())
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.shapes.len() {
            self.output_activation
        } else {
            Activation::Tanh
        }
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, LayerShape)> + '_ {
        self.shapes.iter().scan(0usize, |offset, s| {
            let start = *offset;
            *offset += s.param_count();
            Some((start, *s))
        })
    }

    fn layer_views(&self, offset: usize, s: LayerShape) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let w_len = s.inputs * s.outputs;
        let w = ArrayView2::from_shape((s.inputs, s.outputs), &self.params[offset..offset + w_len])
            .expect("layout matches shape");
        let b = ArrayView1::from(&self.params[offset + w_len..offset + w_len + s.outputs]);
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut x = Array1::from(input.to_vec());
        for (l, (offset, s)) in self.layer_offsets().enumerate() {
            let (w, b) = self.layer_views(offset, s);
            let act = self.activation_of(l);
            let mut y = x.dot(&w);
            y += &b;
            y.mapv_inplace(|v| act.apply(v));
            x = y;
        }
        Ok(x.to_vec())
    }

    /// Row-per-sample forward pass keeping activations for `backward_batch`.
    pub fn forward_batch(&self, input: Array2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp batch input",
                expected: self.input_dim(),
                actual: input.ncols(),
            });
        }
        let mut activations = Vec::with_capacity(self.shapes.len() + 1);
        activations.push(input);
        let last = self.shapes.len() - 1;
        let mut output_pre = Array2::zeros((0, 0));
        for (l, (offset, s)) in self.layer_offsets().enumerate() {
            let (w, b) = self.layer_views(offset, s);
            let act = self.activation_of(l);
            let mut y = activations[l].dot(&w);
            y += &b;
            if l == last {
                output_pre = y.clone();
            }
            y.mapv_inplace(|v| act.apply(v));
            activations.push(y);
        }
        Ok(ForwardCache { activations, output_pre })
    }

    /// Forward pass that discards intermediate activations.
    pub fn predict_batch(&self, input: Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_batch(input)?.into_output())
    }

    /// Gradients of `sum_rows(upstream . output)` with respect to the
    /// parameters and to each input row.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let mut grads = Gradients::zeros(self.params.len());
        let input_grad = self.backprop(cache, upstream, None, Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// As `backward_batch`, with an extra gradient `pre_upstream` taken with
    /// respect to the output layer's pre-activation.
    pub fn backward_batch_preactivation(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        pre_upstream: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let mut grads = Gradients::zeros(self.params.len());
        let input_grad = self.backprop(cache, upstream, Some(pre_upstream), Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// Input gradient only; skips the parameter gradient products.
    pub fn input_gradient_batch(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        self.backprop(cache, upstream, None, None)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        pre_upstream: Option<&Array2<f64>>,
        mut grads: Option<&mut Gradients>,
    ) -> Result<Array2<f64>> {
        let output = cache.output();
        for u in std::iter::once(upstream).chain(pre_upstream) {
            if u.dim() != output.dim() {
                return Err(Error::DimensionMismatch {
                    context: "upstream gradient",
                    expected: output.len(),
                    actual: u.len(),
                });
            }
        }
        let layers: Vec<(usize, LayerShape)> = self.layer_offsets().collect();
        let last = layers.len() - 1;
        let out_act = self.output_activation;
        let mut delta = upstream * &output.mapv(|y| out_act.derivative_from_output(y));
        if let Some(pre) = pre_upstream {
            delta += pre;
        }
        for l in (0..=last).rev() {
            let (offset, s) = layers[l];
            let (w, _) = self.layer_views(offset, s);
            let below = &cache.activations[l];
            if let Some(g) = grads.as_deref_mut() {
                let w_len = s.inputs * s.outputs;
                let slice = g.as_mut_slice();
                let mut gw = ArrayViewMut2::from_shape(
                    (s.inputs, s.outputs),
                    &mut slice[offset..offset + w_len],
                )
                .expect("layout matches shape");
                general_mat_mul(1.0, &below.t(), &delta, 0.0, &mut gw);
                let gb = delta.sum_axis(Axis(0));
                slice[offset + w_len..offset + w_len + s.outputs]
                    .copy_from_slice(gb.as_slice().expect("contiguous"));
            }
            let mut back = delta.dot(&w.t());
            if l > 0 {
                back.zip_mut_with(below, |d, &y| *d *= Activation::Tanh.derivative_from_output(y));
            }
            delta = back;
        }
        Ok(delta)
    }

    /// Single-sample convenience over `backward_batch`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        let u = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec()).expect("row vector");
        let cache = self.forward_batch(x)?;
        let (grads, input_grad) = self.backward_batch(&cache, &u)?;
        Ok((grads, input_grad.into_raw_vec_and_offset().0))
    }

    pub fn flatten(&self) -> FlatParams {
        FlatParams::new(self.shapes.clone(), self.params.clone()).expect("mlp is consistent")
    }

    pub fn unflatten(flat: &FlatParams, output_activation: Activation) -> Result<Self> {
        Self::from_params(flat.shapes(), output_activation, flat.values().to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
