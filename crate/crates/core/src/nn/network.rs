use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{time_embedding_batch, Activation, Scalar};
use crate::error::{Error, Result};

/// Hyperparameters that fix every tensor shape of a [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    /// Encoded row width M; also the output width.
    pub input_width: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Number of conditioning classes K.
    pub num_classes: usize,
    /// Raw sinusoidal time-embedding width before projection.
    pub time_dim: usize,
    pub activation: Activation,
}

impl NetworkShape {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden_width == 0 || self.hidden_layers == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig(format!("degenerate network shape {self:?}")));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(Error::OddDimension(self.time_dim));
        }
        Ok(())
    }
}

/// Affine map stored as `in × out` weights so a batch multiplies on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// Glorot/Xavier uniform weights, zero bias.
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Linear {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                F::from_f64_lossy(rng.random_range(-bound..bound))
            }),
            bias: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &ArrayView2<'_, F>) -> Array2<F> {
        let mut out = x.dot(&self.weight);
        out += &self.bias;
        out
    }

    pub fn glorot_bound(&self) -> f64 {
        (6.0 / (self.weight.nrows() + self.weight.ncols()) as f64).sqrt()
    }
}

/// Noise predictor: `h = x·W_in + τ(t)·W_t + L[label]`, then `L` hidden
/// layers with the chosen nonlinearity, then a linear head back to width M.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<F> {
    shape: NetworkShape,
    pub input_proj: Linear<F>,
    pub time_proj: Linear<F>,
    /// `K × H` additive class embeddings.
    pub label_embedding: Array2<F>,
    pub hidden: Vec<Linear<F>>,
    pub output: Linear<F>,
}

/// Result of a backward pass.
#[derive(Clone, Debug)]
pub struct Backward<F> {
    /// Mean squared error over batch and output dimensions.
    pub loss: f64,
    /// Parameter gradients, shaped like the network.
    pub grads: Network<F>,
    /// Gradient with respect to the leading columns of the input.
    pub input_grad: Array2<F>,
}

struct Cache<F> {
    time: Array2<F>,
    /// `activations[0]` is the aggregated input; `activations[l + 1]` follows hidden layer l.
    activations: Vec<Array2<F>>,
    pre_activations: Vec<Array2<F>>,
    output: Array2<F>,
}

impl<F: Scalar> Network<F> {
    /// Glorot-uniform weights, zero biases, class embeddings `N(0,1)·0.02`.
    pub fn init(shape: NetworkShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = shape.hidden_width;
        let input_proj = Linear::glorot(shape.input_width, h, &mut rng);
        let time_proj = Linear::glorot(shape.time_dim, h, &mut rng);
        let label_embedding = Array2::from_shape_simple_fn((shape.num_classes, h), || {
            let z: f64 = rng.sample(StandardNormal);
            F::from_f64_lossy(0.02 * z)
        });
        let hidden = (0..shape.hidden_layers).map(|_| Linear::glorot(h, h, &mut rng)).collect();
        let output = Linear::glorot(h, shape.input_width, &mut rng);
        Ok(Network {
            shape,
            input_proj,
            time_proj,
            label_embedding,
            hidden,
            output,
        })
    }

    /// All parameters zero.
    pub fn zeros(shape: NetworkShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self::zeros_unchecked(shape))
    }

    fn zeros_unchecked(shape: NetworkShape) -> Self {
        let h = shape.hidden_width;
        Network {
            shape,
            input_proj: Linear::zeros(shape.input_width, h),
            time_proj: Linear::zeros(shape.time_dim, h),
            label_embedding: Array2::zeros((shape.num_classes, h)),
            hidden: (0..shape.hidden_layers).map(|_| Linear::zeros(h, h)).collect(),
            output: Linear::zeros(h, shape.input_width),
        }
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    fn check_batch(&self, x: &ArrayView2<'_, F>, steps: &[usize], labels: &[usize]) {
        assert_eq!(x.ncols(), self.shape.input_width, "input width");
        assert_eq!(x.nrows(), steps.len(), "one step per row");
        assert_eq!(x.nrows(), labels.len(), "one label per row");
        assert!(
            labels.iter().all(|&l| l < self.shape.num_classes),
            "label index out of range"
        );
    }

    fn forward_cached(&self, x: ArrayView2<'_, F>, steps: &[usize], labels: &[usize]) -> Cache<F> {
        self.check_batch(&x, steps, labels);
        let time = time_embedding_batch::<F>(steps, self.shape.time_dim);
        let mut h = self.input_proj.forward(&x);
        h += &self.time_proj.forward(&time.view());
        for (mut row, &label) in h.rows_mut().into_iter().zip(labels) {
            row += &self.label_embedding.row(label);
        }
        let act = self.shape.activation;
        let mut activations = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.hidden.len());
        activations.push(h);
        for layer in &self.hidden {
            let z = layer.forward(&activations.last().expect("non-empty").view());
            let a = z.mapv(|v| act.apply(v));
            pre_activations.push(z);
            activations.push(a);
        }
        let output = self.output.forward(&activations.last().expect("non-empty").view());
        Cache {
            time,
            activations,
            pre_activations,
            output,
        }
    }

    /// Predicted noise for a batch; `B × M` in, `B × M` out.
    pub fn forward(&self, x: ArrayView2<'_, F>, steps: &[usize], labels: &[usize]) -> Array2<F> {
        self.forward_cached(x, steps, labels).output
    }

    /// Mean squared error against `target`, accumulated in f64.
    pub fn loss(&self, x: ArrayView2<'_, F>, steps: &[usize], labels: &[usize], target: ArrayView2<'_, F>) -> f64 {
        mse(&self.forward(x, steps, labels).view(), &target)
    }

    /// Loss and exact gradients. `input_grad_width` selects how many leading
    /// input columns receive a gradient (the embedding slots during training).
    pub fn backward(
        &self,
        x: ArrayView2<'_, F>,
        steps: &[usize],
        labels: &[usize],
        target: ArrayView2<'_, F>,
        input_grad_width: usize,
    ) -> Result<Backward<F>> {
        assert_eq!(target.dim(), x.dim(), "target shape");
        assert!(input_grad_width <= self.shape.input_width);
        let cache = self.forward_cached(x, steps, labels);
        let loss = mse(&cache.output.view(), &target);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                loss,
                context: format!("backward pass over {} rows", x.nrows()),
            });
        }
        let scale = F::from_f64_lossy(2.0 / (x.nrows() * x.ncols()) as f64);
        let mut delta = &cache.output - &target;
        delta.mapv_inplace(|v| v * scale);

        let mut grads = Self::zeros_unchecked(self.shape);
        let last = cache.activations.last().expect("non-empty");
        grads.output.weight.assign(&last.t().dot(&delta));
        grads.output.bias = delta.sum_axis(Axis(0));
        let mut upstream = delta.dot(&self.output.weight.t());

        let act = self.shape.activation;
        for l in (0..self.hidden.len()).rev() {
            Zip::from(&mut upstream)
                .and(&cache.pre_activations[l])
                .for_each(|g, &z| *g = *g * act.derivative(z));
            grads.hidden[l].weight.assign(&cache.activations[l].t().dot(&upstream));
            grads.hidden[l].bias = upstream.sum_axis(Axis(0));
            upstream = upstream.dot(&self.hidden[l].weight.t());
        }

        grads.input_proj.weight.assign(&x.t().dot(&upstream));
        grads.input_proj.bias = upstream.sum_axis(Axis(0));
        grads.time_proj.weight.assign(&cache.time.t().dot(&upstream));
        grads.time_proj.bias = upstream.sum_axis(Axis(0));
        for (row, &label) in upstream.rows().into_iter().zip(labels) {
            let mut target_row = grads.label_embedding.row_mut(label);
            target_row += &row;
        }
        let input_grad = upstream.dot(&self.input_proj.weight.slice(s![..input_grad_width, ..]).t());
        Ok(Backward {
            loss,
            grads,
            input_grad,
        })
    }

    /// Names and shapes of every parameter tensor, in a fixed order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        self.tensors()
            .into_iter()
            .map(|(name, shape, _)| (name, shape))
            .collect()
    }

    /// Named parameter tensors as flat row-major slices.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let mut out = Vec::with_capacity(2 * self.hidden.len() + 7);
        out.push(named2("input_proj.weight", &self.input_proj.weight));
        out.push(named1("input_proj.bias", &self.input_proj.bias));
        out.push(named2("time_proj.weight", &self.time_proj.weight));
        out.push(named1("time_proj.bias", &self.time_proj.bias));
        out.push(named2("label_embedding", &self.label_embedding));
        for (i, layer) in self.hidden.iter().enumerate() {
            out.push(named2(&format!("hidden.{i}.weight"), &layer.weight));
            out.push(named1(&format!("hidden.{i}.bias"), &layer.bias));
        }
        out.push(named2("output.weight", &self.output.weight));
        out.push(named1("output.bias", &self.output.bias));
        out
    }

    /// Mutable flat views in the same order as [`Network::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![
            flat_mut(&mut self.input_proj.weight),
            self.input_proj.bias.as_slice_mut().expect("contiguous"),
            flat_mut(&mut self.time_proj.weight),
            self.time_proj.bias.as_slice_mut().expect("contiguous"),
            flat_mut(&mut self.label_embedding),
        ];
        for layer in &mut self.hidden {
            out.push(flat_mut(&mut layer.weight));
            out.push(layer.bias.as_slice_mut().expect("contiguous"));
        }
        out.push(flat_mut(&mut self.output.weight));
        out.push(self.output.bias.as_slice_mut().expect("contiguous"));
        out
    }

    /// Rebuild from flat tensors in [`Network::tensors`] order.
    pub fn from_tensors(shape: NetworkShape, tensors: Vec<Vec<F>>) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let slots = net.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} tensors, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, data) in slots.into_iter().zip(tensors) {
            if slot.len() != data.len() {
                return Err(Error::InvalidConfig(format!(
                    "tensor length {} does not match expected {}",
                    data.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(&data);
        }
        Ok(net)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Same parameters in another precision.
    pub fn cast<G: Scalar>(&self) -> Network<G> {
        let tensors = self
            .tensors()
            .into_iter()
            .map(|(_, _, t)| t.iter().map(|v| G::from_f64_lossy(v.to_f64().expect("finite"))).collect())
            .collect();
        Network::from_tensors(self.shape, tensors).expect("same shape")
    }
}

fn named2<'a, F: Scalar>(name: &str, a: &'a Array2<F>) -> (String, Vec<usize>, &'a [F]) {
    (name.to_string(), a.shape().to_vec(), a.as_slice().expect("standard layout"))
}

fn named1<'a, F: Scalar>(name: &str, a: &'a Array1<F>) -> (String, Vec<usize>, &'a [F]) {
    (name.to_string(), a.shape().to_vec(), a.as_slice().expect("contiguous"))
}

fn flat_mut<F: Scalar>(a: &mut Array2<F>) -> &mut [F] {
    a.as_slice_mut().expect("standard layout")
}

fn mse<F: Scalar>(pred: &ArrayView2<'_, F>, target: &ArrayView2<'_, F>) -> f64 {
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(&p, &t)| {
            let d = p.to_f64().unwrap_or(f64::NAN) - t.to_f64().unwrap_or(f64::NAN);
            d * d
        })
        .sum();
    sum / n
}
