//! Fully connected Q-network with ReLU hidden layers, trained on a masked
//! squared error: each sample only contributes through the output slot of the
//! action it took.
//!
//! Matrices are row-major. A layer with `rows` outputs and `cols` inputs
//! stores `weights[r * cols + c]`. Batches are `n x width` row-major blocks.

mod checkpoint;
mod kernels;
mod optim;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::game::{ActionCode, INPUT_SIZE, NUM_ACTION_CODES};

pub use checkpoint::{
    decode as decode_checkpoint, encode as encode_checkpoint, load_checkpoint, load_model,
    save_checkpoint, save_model, CHECKPOINT_MAGIC,
};
pub use optim::{Algorithm, Hyperparameters, OptimizerState};

/// Widths of the default network, input to output.
pub const DEFAULT_DIMS: [usize; 4] = [INPUT_SIZE, 512, 512, NUM_ACTION_CODES];

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("gradient contains a non-finite value")]
    NonFiniteGradient,
    #[error("input has length {got}, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("bad magic bytes in checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("shape mismatch in checkpoint field `{field}`")]
    ShapeMismatch { field: String },
    #[error("unknown optimizer tag {0}")]
    BadOptimizerTag(u8),
    #[error("checkpoint checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Floating point types the network can run in.
pub trait Scalar: num_traits::Float + Default + std::fmt::Debug + Send + Sync + 'static {
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Vectorized affine kernel for this type, if the CPU has one.
    fn fast_affine_nt() -> Option<kernels::AffineFn<Self>> {
        None
    }

    fn fast_gemm_nn() -> Option<kernels::GemmFn<Self>> {
        None
    }

    /// `y += a * x`
    fn axpy(a: Self, x: &[Self], y: &mut [Self]) {
        for (yv, &xv) in y.iter_mut().zip(x) {
            *yv = *yv + a * xv;
        }
    }
}

impl Scalar for f32 {
    fn from_f32(v: f32) -> Self {
        v
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    #[cfg(target_arch = "x86_64")]
    fn fast_affine_nt() -> Option<kernels::AffineFn<Self>> {
        if kernels::x86_512::has_avx512() {
            return Some(kernels::x86_512::affine_nt_f32);
        }
        kernels::x86::has_avx2_fma()
            .then_some(kernels::x86::affine_nt_f32 as kernels::AffineFn<f32>)
    }

    #[cfg(target_arch = "x86_64")]
    fn fast_gemm_nn() -> Option<kernels::GemmFn<Self>> {
        if kernels::x86_512::has_avx512() {
            return Some(kernels::x86_512::gemm_nn_f32);
        }
        kernels::x86::has_avx2_fma().then_some(kernels::x86::gemm_nn_f32 as kernels::GemmFn<f32>)
    }

    fn axpy(a: f32, x: &[f32], y: &mut [f32]) {
        #[cfg(target_arch = "x86_64")]
        if kernels::x86::has_avx2_fma() {
            // SAFETY: feature presence checked.
            unsafe { kernels::x86::axpy_f32(a, x, y) };
            return;
        }
        for (yv, &xv) in y.iter_mut().zip(x) {
            *yv += a * xv;
        }
    }
}

impl Scalar for f64 {
    fn from_f32(v: f32) -> Self {
        v as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![T::zero(); rows * cols],
            biases: vec![T::zero(); rows],
        }
    }

    fn params(&self) -> impl Iterator<Item = &T> {
        self.weights.iter().chain(self.biases.iter())
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    /// `out = input * W^T + b` for an `n`-row batch.
    fn affine(&self, input: &[T], n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n * self.rows];
        kernels::affine_nt(
            input,
            &self.weights,
            &self.biases,
            n,
            self.cols,
            self.rows,
            &mut out,
        );
        out
    }
}

/// A stack of affine layers with ReLU between them and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    pub layers: Vec<Layer<T>>,
}

/// Parameter-shaped container for gradients and optimizer buffers.
pub type Gradients<T = f32> = Network<T>;

/// One regression sample: push `Q(input)[action]` toward `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTarget {
    pub input: [f32; INPUT_SIZE],
    pub action: ActionCode,
    pub target: f32,
}

/// Activations kept for the backward pass.
struct Trace<T> {
    /// Input to each layer (the batch itself, then each hidden activation).
    inputs: Vec<Vec<T>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// Zero-filled network with the given widths.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        Network {
            layers: dims.windows(2).map(|w| Layer::zeros(w[1], w[0])).collect(),
        }
    }

    /// He-initialized network: weights ~ N(0, 2 / fan_in), zero biases.
    pub fn with_dims(dims: &[usize], seed: u64) -> Self {
        let mut net = Network::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / layer.cols as f64).sqrt()).unwrap();
            for w in &mut layer.weights {
                *w = T::from_f64(normal.sample(&mut rng));
            }
        }
        net
    }

    /// The standard 16-512-512-128 network.
    pub fn new(seed: u64) -> Self {
        Network::with_dims(&DEFAULT_DIMS, seed)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].cols];
        d.extend(self.layers.iter().map(|l| l.rows));
        d
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    /// Weight and bias blocks of every layer, in order.
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn same_shape(&self, other: &Network<T>) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.rows == b.rows && a.cols == b.cols)
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn trace(&self, batch: &[T], n: usize) -> Trace<T> {
        let mut inputs = vec![batch.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(inputs.last().unwrap(), n);
            if i == last {
                return Trace {
                    inputs,
                    pre,
                    output: z,
                };
            }
            let h = z.iter().map(|&v| v.max(T::zero())).collect();
            pre.push(z);
            inputs.push(h);
        }
        unreachable!()
    }

    /// Forward pass over `n = batch.len() / input_size` inputs; returns
    /// `n x output_size` values.
    pub fn forward_batch(&self, batch: &[T]) -> Result<Vec<T>, NeuralError> {
        let width = self.input_size();
        if batch.len() % width != 0 {
            return Err(NeuralError::InputLength {
                expected: width,
                got: batch.len() % width,
            });
        }
        if !batch.iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFiniteInput);
        }
        let n = batch.len() / width;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut h = batch.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.affine(&h, n);
            if i != last {
                h.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
        }
        Ok(h)
    }

    /// Values of every action for one input.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NeuralError> {
        if input.len() != self.input_size() {
            return Err(NeuralError::InputLength {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        self.forward_batch(input)
    }

    /// Mean masked squared error over `batch` and its exact gradient.
    pub fn backward(&self, batch: &[TrainingTarget]) -> Result<(Gradients<T>, T), NeuralError> {
        let inputs: Vec<[f32; INPUT_SIZE]> = batch.iter().map(|s| s.input).collect();
        self.backward_bootstrapped(&inputs, |_| {
            batch.iter().map(|s| (s.action, s.target)).collect()
        })
    }

    /// Like [`Network::backward`], but the targets are built by `targets`
    /// from the outputs of the same forward pass (one row of
    /// `output_size` values per input). Lets a bootstrapped batch reuse the
    /// prediction pass instead of running a second one.
    pub fn backward_bootstrapped<F>(
        &self,
        inputs: &[[f32; INPUT_SIZE]],
        targets: F,
    ) -> Result<(Gradients<T>, T), NeuralError>
    where
        F: FnOnce(&[T]) -> Vec<(ActionCode, f32)>,
    {
        if inputs.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        let n = inputs.len();
        let width = self.input_size();
        if width != INPUT_SIZE {
            return Err(NeuralError::InputLength {
                expected: width,
                got: INPUT_SIZE,
            });
        }
        let mut x = Vec::with_capacity(n * width);
        for input in inputs {
            x.extend(input.iter().map(|&v| T::from_f32(v)));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFiniteInput);
        }
        let trace = self.trace(&x, n);
        let batch = targets(&trace.output);
        assert_eq!(batch.len(), n, "one target per input");
        let mut grads = Network::zeros(&self.dims());
        let n_t = T::from_f64(n as f64);
        let two = T::from_f64(2.0);

        let last = self.layers.len() - 1;
        let out_layer = &self.layers[last];
        let outs = out_layer.rows;
        let h_last = &trace.inputs[last];
        let hw = out_layer.cols;
        let mut loss = T::zero();
        let mut d_h = vec![T::zero(); n * hw];
        {
            let g = &mut grads.layers[last];
            for (i, &(action, target)) in batch.iter().enumerate() {
                let a = action.index();
                assert!(a < outs, "action {a} outside output width {outs}");
                let err = trace.output[i * outs + a] - T::from_f32(target);
                loss = loss + err * err;
                let coef = two * err / n_t;
                let hrow = &h_last[i * hw..(i + 1) * hw];
                let wrow = &out_layer.weights[a * hw..(a + 1) * hw];
                let grow = &mut g.weights[a * hw..(a + 1) * hw];
                let drow = &mut d_h[i * hw..(i + 1) * hw];
                for j in 0..hw {
                    grow[j] = grow[j] + coef * hrow[j];
                    drow[j] = coef * wrow[j];
                }
                g.biases[a] = g.biases[a] + coef;
            }
        }
        loss = loss / n_t;

        for l in (0..last).rev() {
            let layer = &self.layers[l];
            let (rows, cols) = (layer.rows, layer.cols);
            let pre = &trace.pre[l];
            for (d, &z) in d_h.iter_mut().zip(pre) {
                if z <= T::zero() {
                    *d = T::zero();
                }
            }
            let d_z = d_h;
            let g = &mut grads.layers[l];
            kernels::accumulate_tn(&d_z, &trace.inputs[l], n, rows, cols, &mut g.weights);
            for i in 0..n {
                for (b, &d) in g.biases.iter_mut().zip(&d_z[i * rows..(i + 1) * rows]) {
                    *b = *b + d;
                }
            }
            if l == 0 {
                break;
            }
            let mut next = vec![T::zero(); n * cols];
            kernels::matmul_nn(&d_z, &layer.weights, n, rows, cols, &mut next);
            d_h = next;
        }
        Ok((grads, loss))
    }

    /// Mean masked squared error without gradients.
    pub fn loss(&self, batch: &[TrainingTarget]) -> Result<T, NeuralError> {
        if batch.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        let mut x = Vec::with_capacity(batch.len() * self.input_size());
        for s in batch {
            x.extend(s.input.iter().map(|&v| T::from_f32(v)));
        }
        let out = self.forward_batch(&x)?;
        let w = self.output_size();
        let sum = batch.iter().enumerate().fold(T::zero(), |acc, (i, s)| {
            let e = out[i * w + s.action.index()] - T::from_f32(s.target);
            acc + e * e
        });
        Ok(sum / T::from_f64(batch.len() as f64))
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                    biases: l.biases.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

impl Network<f32> {
    /// Forward pass for a batch of board encodings.
    pub fn evaluate(&self, inputs: &[[f32; INPUT_SIZE]]) -> Vec<f32> {
        let flat: Vec<f32> = inputs.iter().flatten().copied().collect();
        self.forward_batch(&flat)
            .expect("board encodings are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(input: [f32; 16], action: usize, target: f32) -> TrainingTarget {
        TrainingTarget {
            input,
            action: ActionCode::new(action).unwrap(),
            target,
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a: Network = Network::new(3);
        let b: Network = Network::new(3);
        assert_eq!(a, b);
        assert_ne!(a, Network::new(4));
        assert_eq!(a.dims(), vec![16, 512, 512, 128]);
    }

    #[test]
    fn output_has_128_entries() {
        let net: Network = Network::new(1);
        assert_eq!(net.forward(&[0.0; 16]).unwrap().len(), 128);
    }

    #[test]
    fn zero_input_follows_bias_path() {
        let mut net: Network<f64> = Network::with_dims(&[16, 8, 8, 128], 2);
        for l in &mut net.layers {
            for (i, b) in l.biases.iter_mut().enumerate() {
                *b = (i as f64 * 0.37).sin();
            }
        }
        let h1: Vec<f64> = net.layers[0].biases.iter().map(|b| b.max(0.0)).collect();
        let h2: Vec<f64> = (0..8)
            .map(|r| {
                let l = &net.layers[1];
                (l.biases[r] + (0..8).map(|c| l.weights[r * 8 + c] * h1[c]).sum::<f64>()).max(0.0)
            })
            .collect();
        let out = net.forward(&[0.0; 16]).unwrap();
        let l = &net.layers[2];
        for r in 0..128 {
            let want = l.biases[r] + (0..8).map(|c| l.weights[r * 8 + c] * h2[c]).sum::<f64>();
            assert!((out[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let net: Network = Network::new(1);
        let mut x = [0.0f32; 16];
        x[3] = f32::NAN;
        assert!(matches!(net.forward(&x), Err(NeuralError::NonFiniteInput)));
    }

    #[test]
    fn empty_batch_rejected() {
        let net: Network = Network::new(1);
        assert!(matches!(net.backward(&[]), Err(NeuralError::EmptyBatch)));
    }

    #[test]
    fn exact_targets_give_zero_loss_and_gradient() {
        let net: Network = Network::with_dims(&[16, 8, 8, 128], 5);
        let x = [
            0.5f32, -1.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0, 0.0, 0.0,
        ];
        let q = net.forward(&x).unwrap();
        let batch = vec![sample(x, 7, q[7]), sample(x, 100, q[100])];
        let (g, loss) = net.backward(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.params().all(|&v| v == 0.0));
    }

    #[test]
    fn single_sample_output_bias_gradient() {
        let net: Network<f64> = Network::with_dims(&[16, 8, 8, 128], 9);
        let x = [1.0f32; 16];
        let q = net.forward(&x.map(|v| v as f64)).unwrap();
        let (g, _) = net.backward(&[sample(x, 40, 0.25)]).unwrap();
        let out = &g.layers[2];
        for (a, &b) in out.biases.iter().enumerate() {
            if a == 40 {
                assert!((b - 2.0 * (q[40] - 0.25)).abs() < 1e-12);
            } else {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn relu_positive_homogeneity() {
        let net: Network<f64> = Network::with_dims(&[16, 8, 8, 128], 11);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut doubled = net.clone();
        for w in doubled.layers[0].params_mut() {
            *w = *w * 2.0;
        }
        let h = |n: &Network<f64>| -> Vec<f64> {
            n.layers[0]
                .affine(&x, 1)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect()
        };
        for (a, b) in h(&net).iter().zip(h(&doubled)) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
