//! Fully connected autoencoders: construction, forward and reverse passes, Adam training
//! with validation early stopping, and dataset embedding.

mod adam;
mod embed;
mod io;
mod loss;
mod train;

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, Axis, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use embed::{embed_dataset, load_embedded, save_embedded, EmbeddedManifest, EmbeddedSet};
pub use io::{load_model, save_model, ModelHeader, StoredModel};
pub use loss::{losses, mse_gradient};
pub use train::{train, train_with_evaluator, EarlyStopping, StopState, TrainConfig, TrainHistory};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("input contains a non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not match the current model parameters")]
    StaleCache,
    #[error("training requires non-empty train and validation sets")]
    EmptyData,
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

/// Floating-point element type of a network.
pub trait Real: Float + FromPrimitive + std::ops::AddAssign + ndarray::LinalgScalar + ScalarOperand + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply<T: Real>(self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(T::zero())),
            Activation::Sigmoid => z.mapv_inplace(|v| T::one() / (T::one() + (-v).exp())),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output<T: Real>(self, a: T) -> T {
        match self {
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
        }
    }
}

/// Affine map `y = act(x·Wᵀ + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Real> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut z = x.dot(&self.weight.t());
        z += &self.bias;
        self.activation.apply(&mut z);
        z
    }

    fn cast<U: Real>(&self) -> Layer<U> {
        let conv = |v: &T| U::from_f64(v.to_f64().expect("finite parameter")).expect("representable");
        Layer { weight: self.weight.map(conv), bias: self.bias.map(conv), activation: self.activation }
    }
}

/// Symmetric autoencoder: encoder `input → hidden… → bottleneck` (ReLU throughout) and
/// decoder `bottleneck → …hidden → input` (ReLU hidden, sigmoid output).
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T: Real = f32> {
    encoder: Vec<Layer<T>>,
    decoder: Vec<Layer<T>>,
    input_dim: usize,
    bottleneck_dim: usize,
    seed: u64,
    // Bumped by every parameter update; ties forward caches to the parameters they saw.
    generation: u64,
}

/// Activations recorded by [`Autoencoder::forward`]: the input followed by every layer output.
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Real> {
    activations: Vec<Array2<T>>,
    generation: u64,
}

impl<T: Real> ForwardCache<T> {
    pub fn input(&self) -> &Array2<T> {
        &self.activations[0]
    }

    pub fn layer_outputs(&self) -> &[Array2<T>] {
        &self.activations[1..]
    }
}

/// Parameter gradients in model order: encoder layers, then decoder layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Real> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")])
            .collect()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Gradients { layers: self.layers.iter().map(|(w, b)| (w * factor, b * factor)).collect() }
    }
}

fn glorot<R: Rng>(rng: &mut R, fan_out: usize, fan_in: usize) -> Array2<f32> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit) as f32)
}

/// Build a mirror-symmetric autoencoder with Glorot-uniform weights and zero biases.
///
/// `hidden` lists the encoder's hidden widths from the input side; the decoder uses
/// them in reverse.
pub fn init_model(input_dim: usize, bottleneck_dim: usize, hidden: &[usize], seed: u64) -> Result<Autoencoder<f32>> {
    if bottleneck_dim == 0 || bottleneck_dim >= input_dim {
        return Err(NnError::InvalidDims(format!("bottleneck {bottleneck_dim} must be in [1, {input_dim})")));
    }
    if hidden.contains(&0) {
        return Err(NnError::InvalidDims("hidden widths must be positive".into()));
    }
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(bottleneck_dim);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |dims: &[usize], last: Activation| -> Vec<Layer<f32>> {
        dims.windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: glorot(&mut rng, w[1], w[0]),
                bias: Array1::zeros(w[1]),
                activation: if i + 2 == dims.len() { last } else { Activation::Relu },
            })
            .collect()
    };
    let encoder = make(&dims, Activation::Relu);
    dims.reverse();
    let decoder = make(&dims, Activation::Sigmoid);
    Ok(Autoencoder { encoder, decoder, input_dim, bottleneck_dim, seed, generation: 0 })
}

fn check_input<T: Real>(batch: ArrayView2<'_, T>, dim: usize) -> Result<()> {
    if batch.ncols() != dim {
        return Err(NnError::DimensionMismatch { expected: dim, got: batch.ncols() });
    }
    if let Some(((row, col), _)) = batch.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(NnError::NonFiniteInput { row, col });
    }
    Ok(())
}

impl<T: Real> Autoencoder<T> {
    /// Assemble a model from explicit layers, checking that dimensions chain.
    pub fn from_layers(encoder: Vec<Layer<T>>, decoder: Vec<Layer<T>>, seed: u64) -> Result<Self> {
        let (first, last) = match (encoder.first(), decoder.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(NnError::InvalidDims("encoder and decoder need at least one layer".into())),
        };
        let input_dim = first.input_dim();
        let bottleneck_dim = encoder.last().map(Layer::output_dim).unwrap_or(0);
        if last.output_dim() != input_dim {
            return Err(NnError::InvalidDims(format!("decoder outputs {} values, input has {input_dim}", last.output_dim())));
        }
        let all: Vec<&Layer<T>> = encoder.iter().chain(decoder.iter()).collect();
        for pair in all.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(NnError::InvalidDims(format!(
                    "layer emits {} values but the next expects {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        for layer in &all {
            if layer.bias.len() != layer.output_dim() {
                return Err(NnError::InvalidDims("bias length differs from layer width".into()));
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(NnError::InvalidDims("non-finite parameter".into()));
            }
        }
        Ok(Autoencoder { encoder, decoder, input_dim, bottleneck_dim, seed, generation: 0 })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.bottleneck_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn encoder(&self) -> &[Layer<T>] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Layer<T>] {
        &self.decoder
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer<T>> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    /// Layer widths from input to reconstruction, e.g. `[3072, 512, 64, 512, 3072]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(self.layers().map(Layer::output_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Mutable parameter buffers in model order (each layer's weight, then bias).
    /// Any later forward cache becomes stale.
    pub fn parameter_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.generation += 1;
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| {
                [l.weight.as_slice_mut().expect("standard layout"), l.bias.as_slice_mut().expect("standard layout")]
            })
            .collect()
    }

    pub fn parameter_slices(&self) -> Vec<&[T]> {
        self.layers()
            .flat_map(|l| [l.weight.as_slice().expect("standard layout"), l.bias.as_slice().expect("standard layout")])
            .collect()
    }

    /// Same architecture and values in another precision.
    pub fn cast<U: Real>(&self) -> Autoencoder<U> {
        Autoencoder {
            encoder: self.encoder.iter().map(Layer::cast).collect(),
            decoder: self.decoder.iter().map(Layer::cast).collect(),
            input_dim: self.input_dim,
            bottleneck_dim: self.bottleneck_dim,
            seed: self.seed,
            generation: 0,
        }
    }

    /// Reconstruct a B×input_dim batch, keeping every activation for [`Autoencoder::backward`].
    pub fn forward(&self, batch: ArrayView2<'_, T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        check_input(batch, self.input_dim)?;
        let mut activations = Vec::with_capacity(self.encoder.len() + self.decoder.len() + 1);
        activations.push(batch.to_owned());
        for layer in self.layers() {
            let next = layer.forward(activations.last().expect("seeded with input").view());
            activations.push(next);
        }
        let output = activations.last().expect("at least one layer").clone();
        Ok((output, ForwardCache { activations, generation: self.generation }))
    }

    /// B×bottleneck_dim embedding from the encoder alone.
    pub fn encode(&self, batch: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_input(batch, self.input_dim)?;
        let mut x = batch.to_owned();
        for layer in &self.encoder {
            x = layer.forward(x.view());
        }
        Ok(x)
    }

    /// Slice of a forward cache holding the bottleneck activations.
    pub fn bottleneck<'c>(&self, cache: &'c ForwardCache<T>) -> &'c Array2<T> {
        &cache.activations[self.encoder.len()]
    }

    /// Reverse-mode gradients of a scalar loss given `d_output = ∂loss/∂reconstruction`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_output: ArrayView2<'_, T>) -> Result<Gradients<T>> {
        let layers: Vec<&Layer<T>> = self.layers().collect();
        if cache.generation != self.generation || cache.activations.len() != layers.len() + 1 {
            return Err(NnError::StaleCache);
        }
        let output = cache.activations.last().expect("non-empty cache");
        if output.dim() != d_output.dim() {
            return Err(NnError::StaleCache);
        }
        let mut grads = Vec::with_capacity(layers.len());
        let mut delta = d_output.to_owned();
        for (l, layer) in layers.iter().enumerate().rev() {
            let out = &cache.activations[l + 1];
            let act = layer.activation;
            ndarray::Zip::from(&mut delta).and(out).for_each(|d, &a| *d = *d * act.derivative_from_output(a));
            let input = &cache.activations[l];
            // The product of a transposed view can come back column-major; keep gradients
            // in the same row-major layout as the weights.
            let grad_w = delta.t().dot(input).as_standard_layout().into_owned();
            let grad_b = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&layer.weight);
            }
            grads.push((grad_w, grad_b));
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn tiny(seed: u64) -> Autoencoder<f64> {
        init_model(6, 2, &[4], seed).unwrap().cast::<f64>()
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn mirror_dims() {
        let m = init_model(3072, 64, &[512], 1).unwrap();
        assert_eq!(m.layer_dims(), vec![3072, 512, 64, 512, 3072]);
        assert_eq!(m.bottleneck_dim(), 64);
        assert!(m.layers().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0f32 / (3072.0 + 512.0)).sqrt();
        assert!(m.encoder()[0].weight.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_model(20, 4, &[8], 5).unwrap(), init_model(20, 4, &[8], 5).unwrap());
        assert_ne!(init_model(20, 4, &[8], 5).unwrap(), init_model(20, 4, &[8], 6).unwrap());
    }

    #[test]
    fn bad_dims() {
        assert!(matches!(init_model(8, 8, &[], 0), Err(NnError::InvalidDims(_))));
        assert!(matches!(init_model(8, 0, &[], 0), Err(NnError::InvalidDims(_))));
        assert!(matches!(init_model(8, 2, &[0], 0), Err(NnError::InvalidDims(_))));
    }

    fn zeroed(mut m: Autoencoder<f64>) -> Autoencoder<f64> {
        for s in m.parameter_slices_mut() {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    #[test]
    fn zero_model_outputs() {
        let m = zeroed(tiny(0));
        let x = random_batch(3, 6, 1);
        let (y, _) = m.forward(x.view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.5));
        assert!(m.encode(x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_batch() {
        let m = tiny(0);
        let x = Array2::<f64>::zeros((0, 6));
        let (y, _) = m.forward(x.view()).unwrap();
        assert_eq!(y.dim(), (0, 6));
    }

    #[test]
    fn non_finite_and_wrong_width() {
        let m = tiny(0);
        let mut x = random_batch(2, 6, 0);
        x[[1, 4]] = f64::NAN;
        assert!(matches!(m.forward(x.view()), Err(NnError::NonFiniteInput { row: 1, col: 4 })));
        let x = random_batch(2, 5, 0);
        assert!(matches!(m.encode(x.view()), Err(NnError::DimensionMismatch { expected: 6, got: 5 })));
    }

    /// Straight-line re-evaluation of the affine/ReLU/sigmoid chain with scalar loops.
    fn scalar_forward(m: &Autoencoder<f64>, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = x.to_vec();
        let mut code = Vec::new();
        for (i, layer) in m.layers().enumerate() {
            let mut next = vec![0.0; layer.output_dim()];
            for (o, out) in next.iter_mut().enumerate() {
                let mut z = layer.bias[o];
                for (k, &v) in a.iter().enumerate() {
                    z += layer.weight[[o, k]] * v;
                }
                *out = match layer.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                };
            }
            a = next;
            if i + 1 == m.encoder().len() {
                code = a.clone();
            }
        }
        (a, code)
    }

    #[test]
    fn forward_matches_scalar_evaluator() {
        let mut m = tiny(3);
        // Non-zero biases so the bias path is exercised.
        for (i, s) in m.parameter_slices_mut().into_iter().enumerate() {
            if i % 2 == 1 {
                s.iter_mut().enumerate().for_each(|(j, v)| *v = 0.1 * j as f64 - 0.05);
            }
        }
        let x = random_batch(5, 6, 9);
        let (y, cache) = m.forward(x.view()).unwrap();
        let code = m.encode(x.view()).unwrap();
        assert_eq!(&code, m.bottleneck(&cache));
        for r in 0..5 {
            let (want, want_code) = scalar_forward(&m, x.row(r).as_slice().unwrap());
            for (a, b) in y.row(r).iter().zip(&want) {
                assert!((a - b).abs() < 1e-6);
            }
            for (a, b) in code.row(r).iter().zip(&want_code) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = tiny(1);
        let x = random_batch(2, 6, 2);
        let (y, cache) = m.forward(x.view()).unwrap();
        m.parameter_slices_mut()[0][0] += 0.1;
        assert!(matches!(m.backward(&cache, mse_gradient(x.view(), y.view()).view()), Err(NnError::StaleCache)));
    }

    #[test]
    fn zero_error_gives_zero_output_gradient() {
        let m = tiny(4);
        let x = random_batch(3, 6, 5);
        let (y, cache) = m.forward(x.view()).unwrap();
        // Target equal to the reconstruction: the loss is at its minimum.
        let g = m.backward(&cache, mse_gradient(y.view(), y.view()).view()).unwrap();
        let (w, b) = g.layers.last().unwrap();
        assert!(w.iter().chain(b.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_is_linear_in_loss_scale() {
        let m = tiny(6);
        let x = random_batch(4, 6, 7);
        let (y, cache) = m.forward(x.view()).unwrap();
        let d = mse_gradient(x.view(), y.view());
        let g1 = m.backward(&cache, d.view()).unwrap();
        let g2 = m.backward(&cache, (&d * 2.0).view()).unwrap();
        assert_eq!(g1.scaled(2.0), g2);
    }

    /// Central differences on the MSE loss for every parameter of a small model.
    #[test]
    fn gradients_match_finite_differences() {
        let mut m = tiny(8);
        let x = random_batch(4, 6, 11);
        let (y, cache) = m.forward(x.view()).unwrap();
        let analytic = m.backward(&cache, mse_gradient(x.view(), y.view()).view()).unwrap();
        let analytic: Vec<f64> = analytic.slices().concat();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for p in 0..analytic.len() {
            let loss_at = |m: &mut Autoencoder<f64>, delta: f64| {
                let flat_index = locate(m, p);
                m.parameter_slices_mut()[flat_index.0][flat_index.1] += delta;
                let (y, _) = m.forward(x.view()).unwrap();
                let l = losses(x.view(), y.view()).0;
                m.parameter_slices_mut()[flat_index.0][flat_index.1] -= delta;
                l
            };
            let numeric = (loss_at(&mut m, h) - loss_at(&mut m, -h)) / (2.0 * h);
            let rel = (analytic[p] - numeric).abs() / analytic[p].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn width_one_layers_give_row_major_gradients() {
        let m = init_model(5, 1, &[], 3).unwrap();
        let x = Array2::from_elem((3, 5), 0.5f32);
        let (y, cache) = m.forward(x.view()).unwrap();
        let g = m.backward(&cache, mse_gradient(x.view(), y.view()).view()).unwrap();
        let sizes: Vec<usize> = g.slices().iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![5, 1, 5, 5]);
    }

    fn locate(m: &Autoencoder<f64>, mut p: usize) -> (usize, usize) {
        for (i, s) in m.parameter_slices().iter().enumerate() {
            if p < s.len() {
                return (i, p);
            }
            p -= s.len();
        }
        unreachable!()
    }
}
