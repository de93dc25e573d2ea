//! Convolutional Q-network: one strided 3×3 convolution over the d×d
//! perspective followed by a stack of fully connected ReLU layers and a
//! linear 4-wide output, with reverse-mode gradients and Adam.
//!
//! Parameters are stored as an ordered tensor list
//! `[conv.w, conv.b, fc1.w, fc1.b, ..., out.w, out.b]`. The convolution weight
//! has shape `[k, k, 1, filters]` (row-major, so it doubles as a `k²×filters`
//! matrix applied to flattened patches) and every dense weight is `[in, out]`.
//! Convolution outputs are flattened position-major: `(i, j, filter)`.

mod adam;
mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::Perspective;
use crate::error::{Error, Result};
use crate::lattice::CodeDistance;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Number of Q-values per perspective, ordered Up, Down, Right, Left.
pub const OUTPUTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub d: CodeDistance,
    pub conv_filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dense: Vec<usize>,
    pub outputs: usize,
}

impl Architecture {
    /// 512 3×3 filters at stride 2 without padding, then 256-128-64-32 dense
    /// ReLU layers and 4 linear outputs.
    pub fn for_distance(d: CodeDistance) -> Self {
        Architecture {
            d,
            conv_filters: 512,
            kernel: 3,
            stride: 2,
            dense: vec![256, 128, 64, 32],
            outputs: OUTPUTS,
        }
    }

    /// Side of the (square) convolution output.
    pub fn conv_side(&self) -> usize {
        (self.d.get() - self.kernel) / self.stride + 1
    }

    /// Width of the flattened convolution output.
    pub fn conv_features(&self) -> usize {
        self.conv_side() * self.conv_side() * self.conv_filters
    }

    /// (fan_in, fan_out) of every layer, convolution first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![(self.kernel * self.kernel, self.conv_filters)];
        let mut width = self.conv_features();
        for &w in self.dense.iter().chain(std::iter::once(&self.outputs)) {
            dims.push((width, w));
            width = w;
        }
        dims
    }

    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for (i, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            if i == 0 {
                shapes.push(vec![self.kernel, self.kernel, 1, fan_out]);
            } else {
                shapes.push(vec![fan_in, fan_out]);
            }
            shapes.push(vec![fan_out]);
        }
        shapes
    }

    /// Weights plus biases of each layer.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| fan_in * fan_out + fan_out)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 || self.kernel > self.d.get() {
            return Err(Error::InvalidArgument(format!(
                "kernel {} / stride {} do not fit a {}x{} input",
                self.kernel, self.stride, self.d, self.d
            )));
        }
        if self.conv_filters == 0 || self.outputs == 0 || self.dense.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Row-major real tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Parameter-shaped gradient set, same order as [`QNetwork::params`].
pub type Gradients = Vec<Tensor>;

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    params: Vec<Tensor>,
}

impl QNetwork {
    /// Network with every parameter zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = arch.tensor_shapes().into_iter().map(Tensor::zeros).collect();
        Ok(QNetwork { arch, params })
    }

    /// He-uniform weights for ReLU layers, Glorot-uniform for the linear
    /// output layer, zero biases.
    pub fn random<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        let mut net = QNetwork::zeros(arch)?;
        let dims = net.arch.layer_dims();
        let last = dims.len() - 1;
        for (layer, (fan_in, fan_out)) in dims.into_iter().enumerate() {
            let limit = if layer == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for w in &mut net.params[2 * layer].data {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn from_params(arch: Architecture, params: Vec<Tensor>) -> Result<Self> {
        arch.validate()?;
        let expected = arch.tensor_shapes();
        if params.len() != expected.len()
            || params
                .iter()
                .zip(&expected)
                .any(|(t, s)| &t.shape != s || t.data.len() != s.iter().product::<usize>())
        {
            return Err(Error::ShapeMismatch(format!(
                "parameter tensors do not match architecture for d={}",
                arch.d
            )));
        }
        Ok(QNetwork { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn input_len(&self) -> usize {
        self.arch.d.get() * self.arch.d.get()
    }

    /// Q-values of one d×d input.
    pub fn forward(&self, input: &[f64]) -> Result<[f64; OUTPUTS]> {
        if input.len() != self.input_len() {
            return Err(Error::InvalidArgument(format!(
                "network input must have {} cells, got {}",
                self.input_len(),
                input.len()
            )));
        }
        let out = self.forward_batch(input, 1);
        let mut q = [0.0; OUTPUTS];
        q.copy_from_slice(&out[..OUTPUTS]);
        Ok(q)
    }

    /// Q-values of `batch` inputs laid out back to back; returns
    /// `batch × outputs` values.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Vec<f64> {
        assert_eq!(inputs.len(), batch * self.input_len(), "input batch size");
        if batch == 0 {
            return Vec::new();
        }
        self.run_forward(inputs, batch, false).output
    }

    /// Q-values for a set of perspectives, one row per perspective.
    pub fn q_rows(&self, perspectives: &[Perspective]) -> Vec<[f64; OUTPUTS]> {
        let inputs = encode(perspectives);
        let flat = self.forward_batch(&inputs, perspectives.len());
        flat.chunks_exact(self.arch.outputs)
            .map(|c| {
                let mut q = [0.0; OUTPUTS];
                q.copy_from_slice(&c[..OUTPUTS]);
                q
            })
            .collect()
    }

    fn run_forward(&self, inputs: &[f64], batch: usize, keep: bool) -> ForwardPass {
        let arch = &self.arch;
        let side = arch.conv_side();
        let kk = arch.kernel * arch.kernel;
        let patches = im2col(inputs, batch, arch.d.get(), arch.kernel, arch.stride, side);

        let rows = batch * side * side;
        let mut act = vec![0.0; rows * arch.conv_filters];
        affine(&patches, rows, kk, &self.params[0].data, &self.params[1].data, arch.conv_filters, &mut act);
        relu(&mut act);

        let mut activations = Vec::new();
        let n_dense = arch.dense.len() + 1;
        let mut width = arch.conv_features();
        for layer in 0..n_dense {
            let w = &self.params[2 + 2 * layer];
            let b = &self.params[3 + 2 * layer];
            let out_width = b.len();
            let mut next = vec![0.0; batch * out_width];
            affine(&act, batch, width, &w.data, &b.data, out_width, &mut next);
            if layer + 1 < n_dense {
                relu(&mut next);
            }
            if keep {
                activations.push(std::mem::replace(&mut act, next));
            } else {
                act = next;
            }
            width = out_width;
        }
        ForwardPass {
            patches: if keep { patches } else { Vec::new() },
            activations,
            output: act,
        }
    }

    /// Gradient of the mean over the batch of `(target - Q(input, action))²`.
    /// Only the selected action's output enters each sample's loss.
    pub fn gradients(&self, batch: &Batch) -> Result<Gradients> {
        Ok(self.loss_and_gradients(batch)?.1)
    }

    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let out = self.forward_batch(&batch.inputs, batch.len());
        Ok(masked_mse(&out, self.arch.outputs, &batch.actions, &batch.targets).0)
    }

    pub fn loss_and_gradients(&self, batch: &Batch) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let arch = &self.arch;
        let n = batch.len();
        let pass = self.run_forward(&batch.inputs, n, true);
        let (loss, mut delta) = masked_mse(&pass.output, arch.outputs, &batch.actions, &batch.targets);

        let mut grads: Gradients = self.params.iter().map(|t| Tensor::zeros(t.shape.clone())).collect();
        let n_dense = arch.dense.len() + 1;
        // pass.activations[l] is the input of dense layer l.
        for layer in (0..n_dense).rev() {
            let input = &pass.activations[layer];
            let w = &self.params[2 + 2 * layer];
            let (fan_in, fan_out) = (w.shape[0], w.shape[1]);
            gemm_tn(input, &delta, n, fan_in, fan_out, &mut grads[2 + 2 * layer].data);
            column_sums(&delta, fan_out, &mut grads[3 + 2 * layer].data);
            let mut back = vec![0.0; n * fan_in];
            gemm_nt(&delta, &w.data, n, fan_out, fan_in, &mut back);
            // every layer input is a ReLU output
            for (g, &a) in back.iter_mut().zip(input) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = back;
        }

        let rows = n * arch.conv_side() * arch.conv_side();
        let kk = arch.kernel * arch.kernel;
        gemm_tn(&pass.patches, &delta, rows, kk, arch.conv_filters, &mut grads[0].data);
        column_sums(&delta, arch.conv_filters, &mut grads[1].data);
        Ok((loss, grads))
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("gradient batch is empty".into()));
        }
        if batch.inputs.len() != batch.len() * self.input_len() {
            return Err(Error::InvalidArgument("batch inputs do not match network input size".into()));
        }
        if let Some(&a) = batch.actions.iter().find(|&&a| a >= self.arch.outputs) {
            return Err(Error::InvalidArgument(format!("action index {a} out of range")));
        }
        Ok(())
    }
}

/// Training rows: inputs back to back, the action whose output is fitted and
/// the regression target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub actions: Vec<usize>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn push(&mut self, input: &[f64], action: usize, target: f64) {
        self.inputs.extend_from_slice(input);
        self.actions.push(action);
        self.targets.push(target);
    }

    pub fn push_perspective(&mut self, p: &Perspective, action: usize, target: f64) {
        self.inputs.extend(p.cells().iter().map(|&v| v as f64));
        self.actions.push(action);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Flattens perspectives into network input rows.
pub fn encode<'a>(perspectives: impl IntoIterator<Item = &'a Perspective>) -> Vec<f64> {
    perspectives
        .into_iter()
        .flat_map(|p| p.cells().iter().map(|&v| v as f64))
        .collect()
}

struct ForwardPass {
    patches: Vec<f64>,
    activations: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn masked_mse(output: &[f64], width: usize, actions: &[usize], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = actions.len();
    let mut delta = vec![0.0; output.len()];
    let mut loss = 0.0;
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = output[i * width + a] - y;
        loss += err * err;
        delta[i * width + a] = 2.0 * err / n as f64;
    }
    (loss / n as f64, delta)
}

fn im2col(inputs: &[f64], batch: usize, d: usize, kernel: usize, stride: usize, side: usize) -> Vec<f64> {
    let kk = kernel * kernel;
    let mut out = Vec::with_capacity(batch * side * side * kk);
    for b in 0..batch {
        let img = &inputs[b * d * d..(b + 1) * d * d];
        for i in 0..side {
            for j in 0..side {
                for ky in 0..kernel {
                    let row = (i * stride + ky) * d + j * stride;
                    out.extend_from_slice(&img[row..row + kernel]);
                }
            }
        }
    }
    out
}

fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// out[m×n] = a[m×k] · w[k×n] + bias (broadcast over rows).
fn affine(a: &[f64], m: usize, k: usize, w: &[f64], bias: &[f64], n: usize, out: &mut [f64]) {
    for row in out.chunks_exact_mut(n) {
        row.copy_from_slice(bias);
    }
    // SAFETY: slice lengths match the row-major strides passed below.
    debug_assert!(a.len() >= m * k && w.len() >= k * n && out.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            w.as_ptr(), n as isize, 1,
            1.0,
            out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// out[k×n] = a[m×k]ᵀ · b[m×n].
fn gemm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= m * n && out.len() >= k * n);
    // SAFETY: as above, aᵀ read through swapped strides.
    unsafe {
        matrixmultiply::dgemm(
            k, m, n, 1.0,
            a.as_ptr(), 1, k as isize,
            b.as_ptr(), n as isize, 1,
            0.0,
            out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// out[m×k] = a[m×n] · w[k×n]ᵀ.
fn gemm_nt(a: &[f64], w: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    debug_assert!(a.len() >= m * n && w.len() >= k * n && out.len() >= m * k);
    // SAFETY: wᵀ read through swapped strides.
    unsafe {
        matrixmultiply::dgemm(
            m, n, k, 1.0,
            a.as_ptr(), n as isize, 1,
            w.as_ptr(), 1, n as isize,
            0.0,
            out.as_mut_ptr(), k as isize, 1,
        );
    }
}

fn column_sums(x: &[f64], width: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for row in x.chunks_exact(width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cd(d: usize) -> CodeDistance {
        CodeDistance::new(d).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(Architecture::for_distance(cd(5)).param_count(), 573_028);
        assert_eq!(Architecture::for_distance(cd(7)).param_count(), 1_228_388);
        let d3 = Architecture::for_distance(cd(3));
        assert_eq!(d3.layer_param_counts(), vec![5_120, 131_328, 32_896, 8_256, 2_080, 132]);
        assert_eq!(d3.param_count(), 179_812);
        assert_eq!(
            Architecture::for_distance(cd(5)).layer_param_counts(),
            vec![5_120, 524_544, 32_896, 8_256, 2_080, 132]
        );
        assert_eq!(Architecture::for_distance(cd(7)).layer_param_counts()[1], 1_179_904);
    }

    #[test]
    fn conv_output_side() {
        let sides: Vec<usize> = [3, 5, 7]
            .iter()
            .map(|&d| Architecture::for_distance(cd(d)).conv_side())
            .collect();
        assert_eq!(sides, vec![1, 2, 3]);
    }

    #[test]
    fn zero_network_outputs_zero_and_bias_passes_through() {
        let mut net = QNetwork::zeros(Architecture::for_distance(cd(3))).unwrap();
        let input = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(net.forward(&input).unwrap(), [0.0; 4]);
        let last = net.params().len() - 1;
        net.params_mut()[last].data.copy_from_slice(&[0.5, -1.0, 2.0, 3.5]);
        assert_eq!(net.forward(&input).unwrap(), [0.5, -1.0, 2.0, 3.5]);
    }

    #[test]
    fn input_shape_is_checked() {
        let net = QNetwork::zeros(Architecture::for_distance(cd(3))).unwrap();
        assert!(matches!(net.forward(&[0.0; 8]), Err(Error::InvalidArgument(_))));
        assert!(net.gradients(&Batch::default()).is_err());
    }

    #[test]
    fn random_net_initialization() {
        let net = QNetwork::random(Architecture::for_distance(cd(5)), &mut rng::stream(3, 0)).unwrap();
        assert_eq!(net.param_count(), 573_028);
        let limit = (6.0f64 / 9.0).sqrt();
        assert!(net.params()[0].data.iter().all(|w| w.abs() <= limit));
        assert!(net.params()[1].data.iter().all(|&b| b == 0.0));
        assert!(net.params()[0].data.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn gradient_vanishes_at_target() {
        let net = QNetwork::random(Architecture::for_distance(cd(3)), &mut rng::stream(5, 0)).unwrap();
        let inputs = [[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]];
        let mut batch = Batch::default();
        for (i, x) in inputs.iter().enumerate() {
            let q = net.forward(x).unwrap();
            batch.push(x, i + 1, q[i + 1]);
        }
        let grads = net.gradients(&batch).unwrap();
        assert!(grads.iter().flat_map(|t| &t.data).all(|&g| g == 0.0));
    }

    #[test]
    fn single_weight_gradient_is_two_err_times_input() {
        // one filter, no hidden dense layers: Q_a = w_a * relu(x) + b_a
        let arch = Architecture {
            d: cd(3),
            conv_filters: 1,
            kernel: 3,
            stride: 2,
            dense: vec![],
            outputs: 4,
        };
        let mut net = QNetwork::zeros(arch).unwrap();
        net.params_mut()[0].data[4] = 1.0; // pass the center cell through
        let w = 0.7;
        net.params_mut()[2].data[1] = w;
        let x = 1.0;
        let y = 2.5;
        let mut input = [0.0; 9];
        input[4] = x;
        let mut batch = Batch::default();
        batch.push(&input, 1, y);
        let grads = net.gradients(&batch).unwrap();
        assert!((grads[2].data[1] - 2.0 * (w * x - y) * x).abs() < 1e-15);
        assert_eq!(grads[2].data[0], 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = QNetwork::random(Architecture::for_distance(cd(5)), &mut rng::stream(9, 0)).unwrap();
        let input: Vec<f64> = (0..25).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let a = net.forward(&input).unwrap();
        let b = net.forward(&input).unwrap();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        // batching does not change a row's value
        let mut two = input.clone();
        two.extend(vec![0.0; 25]);
        let batched = net.forward_batch(&two, 2);
        assert_eq!(&batched[..4], &a[..]);
    }
}
