//! The hybrid network: three SAME-padded convolutions, a flatten that
//! absorbs the indicator vector, and two dense layers ending in softmax
//! cross-entropy.
//!
//! Everything is generic over the float type so training can run in `f32`
//! while gradient checking runs the identical code in `f64`. Activations
//! are stored channel-last (`[y][x][c]`), convolution kernels as
//! `[ky][kx][in][out]`, and dense weights as `[in][out]`; with those
//! layouts the innermost loops run over contiguous output channels and
//! the flatten before fc1 is a plain copy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub mod gradcheck;
pub mod optim;

/// Float type the network runs on.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + core::ops::AddAssign
    + core::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for embedding an `f64` constant.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Kernel sizes of the three convolution layers.
pub const CONV_KERNELS: [usize; 3] = [5, 4, 4];
/// Strides of the three convolution layers.
pub const CONV_STRIDES: [usize; 3] = [1, 2, 2];
/// Standard deviation of the truncated-normal weight initialization.
pub const INIT_STD: f64 = 0.1;

/// Output side of a SAME-padded convolution: `ceil(in / stride)`.
pub fn conv_output_side(in_side: usize, stride: usize) -> usize {
    (in_side + stride - 1) / stride
}

/// Rows/columns implicitly zero-padded before the first input row. SAME
/// padding splits the total evenly, giving the extra row to the end.
pub fn same_pad_begin(in_side: usize, kernel: usize, stride: usize) -> usize {
    let out_side = conv_output_side(in_side, stride);
    let total = ((out_side - 1) * stride + kernel).saturating_sub(in_side);
    total / 2
}

/// Dense row-major array with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    pub dims: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![F::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// A convolution layer's parameters plus its fixed stride.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<F> {
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
    pub stride: usize,
}

impl<F: Scalar> ConvLayer<F> {
    fn zeros(kernel: usize, in_channels: usize, out_channels: usize, stride: usize) -> Self {
        ConvLayer {
            weights: Tensor::zeros(&[kernel, kernel, in_channels, out_channels]),
            bias: Tensor::zeros(&[out_channels]),
            stride,
        }
    }

    pub fn kernel(&self) -> usize {
        self.weights.dims[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dims[3]
    }
}

/// A fully connected layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<F> {
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> DenseLayer<F> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weights: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.dims[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.dims[1]
    }
}

/// Geometry of a model instance. The standard shape is the 28x28 network;
/// the downsized shape shrinks the image and fc1 so a full-parameter
/// finite-difference sweep stays cheap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub image_side: usize,
    pub conv_channels: [usize; 3],
    pub fc1_width: usize,
    pub indicator_width: usize,
    pub output_count: usize,
}

impl ModelShape {
    pub fn standard(indicator_width: usize, output_count: usize) -> Self {
        ModelShape {
            image_side: 28,
            conv_channels: [4, 8, 12],
            fc1_width: 200,
            indicator_width,
            output_count,
        }
    }

    pub fn downsized(indicator_width: usize, output_count: usize) -> Self {
        ModelShape {
            image_side: 8,
            conv_channels: [4, 8, 12],
            fc1_width: 32,
            indicator_width,
            output_count,
        }
    }

    /// Spatial sides through the network: input, then after each conv.
    pub fn conv_sides(&self) -> [usize; 4] {
        let mut sides = [self.image_side; 4];
        for (i, &stride) in CONV_STRIDES.iter().enumerate() {
            sides[i + 1] = conv_output_side(sides[i], stride);
        }
        sides
    }

    /// Length of the flattened final convolution output.
    pub fn flatten_len(&self) -> usize {
        let side = self.conv_sides()[3];
        side * side * self.conv_channels[2]
    }

    /// fc1 input length: flatten plus the indicator vector.
    pub fn fc1_input_len(&self) -> usize {
        self.flatten_len() + self.indicator_width
    }

    pub fn image_len(&self) -> usize {
        self.image_side * self.image_side
    }
}

/// All trainable tensors of one model. Also used for gradients and for
/// the Adam moment accumulators, which share the same structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub shape: ModelShape,
    pub conv1: ConvLayer<F>,
    pub conv2: ConvLayer<F>,
    pub conv3: ConvLayer<F>,
    pub fc1: DenseLayer<F>,
    pub fc2: DenseLayer<F>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn zeros(shape: &ModelShape) -> Self {
        let [c1, c2, c3] = shape.conv_channels;
        ModelParams {
            shape: shape.clone(),
            conv1: ConvLayer::zeros(CONV_KERNELS[0], 1, c1, CONV_STRIDES[0]),
            conv2: ConvLayer::zeros(CONV_KERNELS[1], c1, c2, CONV_STRIDES[1]),
            conv3: ConvLayer::zeros(CONV_KERNELS[2], c2, c3, CONV_STRIDES[2]),
            fc1: DenseLayer::zeros(shape.fc1_input_len(), shape.fc1_width),
            fc2: DenseLayer::zeros(shape.fc1_width, shape.output_count),
        }
    }

    /// Truncated-normal weights (std 0.1, resampled beyond two standard
    /// deviations) and zero biases, drawn in tensor order from a ChaCha8
    /// stream so a seed pins every parameter.
    pub fn init(shape: &ModelShape, seed: u64) -> Self {
        let mut params = Self::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let limit = 2.0 * INIT_STD;
        for (name, tensor) in params.tensors_mut() {
            if !name.ends_with(".w") {
                continue;
            }
            for value in &mut tensor.data {
                *value = F::c(loop {
                    let draw = normal.sample(&mut rng);
                    if draw.abs() <= limit {
                        break draw;
                    }
                });
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    /// The ten named tensors in canonical order (also the checkpoint
    /// serialization order).
    pub fn tensors(&self) -> [(&'static str, &Tensor<F>); 10] {
        [
            ("conv1.w", &self.conv1.weights),
            ("conv1.b", &self.conv1.bias),
            ("conv2.w", &self.conv2.weights),
            ("conv2.b", &self.conv2.bias),
            ("conv3.w", &self.conv3.weights),
            ("conv3.b", &self.conv3.bias),
            ("fc1.w", &self.fc1.weights),
            ("fc1.b", &self.fc1.bias),
            ("fc2.w", &self.fc2.weights),
            ("fc2.b", &self.fc2.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<F>); 10] {
        [
            ("conv1.w", &mut self.conv1.weights),
            ("conv1.b", &mut self.conv1.bias),
            ("conv2.w", &mut self.conv2.weights),
            ("conv2.b", &mut self.conv2.bias),
            ("conv3.w", &mut self.conv3.weights),
            ("conv3.b", &mut self.conv3.bias),
            ("fc1.w", &mut self.fc1.weights),
            ("fc1.b", &mut self.fc1.bias),
            ("fc2.w", &mut self.fc2.weights),
            ("fc2.b", &mut self.fc2.bias),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Resets every tensor to zero (gradient reuse between batches).
    pub fn fill_zero(&mut self) {
        for (_, tensor) in self.tensors_mut() {
            tensor.data.fill(F::zero());
        }
    }

    /// Multiplies every tensor by `factor` (gradient averaging).
    pub fn scale(&mut self, factor: F) {
        for (_, tensor) in self.tensors_mut() {
            for value in &mut tensor.data {
                *value = *value * factor;
            }
        }
    }

    /// Adds `factor * other` into self (ordered gradient reduction).
    pub fn add_scaled(&mut self, other: &Self, factor: F) {
        debug_assert_eq!(self.shape, other.shape);
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.data.iter_mut().zip(&src.data) {
                *d += s * factor;
            }
        }
    }
}

/// Activations recorded during a forward pass, sufficient to backpropagate
/// and to read off the prediction. Buffers are reused across calls.
#[derive(Clone, Debug)]
pub struct ForwardTrace<F> {
    /// Copy of the input image (conv1's input during backprop).
    pub image: Vec<F>,
    /// Post-ReLU convolution outputs.
    pub conv1_out: Vec<F>,
    pub conv2_out: Vec<F>,
    pub conv3_out: Vec<F>,
    /// Flattened conv3 output with the indicator vector appended.
    pub cat: Vec<F>,
    /// Post-ReLU fc1 output.
    pub fc1_out: Vec<F>,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

impl<F: Scalar> ForwardTrace<F> {
    pub fn new(shape: &ModelShape) -> Self {
        let sides = shape.conv_sides();
        let [c1, c2, c3] = shape.conv_channels;
        ForwardTrace {
            image: vec![F::zero(); shape.image_len()],
            conv1_out: vec![F::zero(); sides[1] * sides[1] * c1],
            conv2_out: vec![F::zero(); sides[2] * sides[2] * c2],
            conv3_out: vec![F::zero(); sides[3] * sides[3] * c3],
            cat: vec![F::zero(); shape.fc1_input_len()],
            fc1_out: vec![F::zero(); shape.fc1_width],
            logits: vec![F::zero(); shape.output_count],
            probs: vec![F::zero(); shape.output_count],
        }
    }
}

/// Gradient buffers flowing backwards through the network, reused across
/// calls like the trace.
#[derive(Clone, Debug)]
pub struct BackwardScratch<F> {
    dlogits: Vec<F>,
    dfc1: Vec<F>,
    dcat: Vec<F>,
    dconv3: Vec<F>,
    dconv2: Vec<F>,
    dconv1: Vec<F>,
    dimage: Vec<F>,
}

impl<F: Scalar> BackwardScratch<F> {
    pub fn new(shape: &ModelShape) -> Self {
        let sides = shape.conv_sides();
        let [c1, c2, c3] = shape.conv_channels;
        BackwardScratch {
            dlogits: vec![F::zero(); shape.output_count],
            dfc1: vec![F::zero(); shape.fc1_width],
            dcat: vec![F::zero(); shape.fc1_input_len()],
            dconv3: vec![F::zero(); sides[3] * sides[3] * c3],
            dconv2: vec![F::zero(); sides[2] * sides[2] * c2],
            dconv1: vec![F::zero(); sides[1] * sides[1] * c1],
            dimage: vec![F::zero(); shape.image_len()],
        }
    }
}

fn relu_inplace<F: Scalar>(values: &mut [F]) {
    for v in values {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Zeroes gradient entries whose post-ReLU activation is zero.
fn relu_backward_inplace<F: Scalar>(grads: &mut [F], post: &[F]) {
    for (g, &a) in grads.iter_mut().zip(post) {
        if a <= F::zero() {
            *g = F::zero();
        }
    }
}

/// SAME-padded convolution over a channel-last input. The three layer
/// geometries used by the model dispatch to monomorphized bodies whose
/// channel loops unroll completely; anything else takes the dynamic path.
fn conv_forward<F: Scalar>(input: &[F], in_side: usize, layer: &ConvLayer<F>, out: &mut [F]) {
    debug_assert_eq!(input.len(), in_side * in_side * layer.in_channels());
    match (layer.in_channels(), layer.out_channels()) {
        (1, 4) => conv_forward_fixed::<F, 1, 4>(input, in_side, layer, out),
        (4, 8) => conv_forward_fixed::<F, 4, 8>(input, in_side, layer, out),
        (8, 12) => conv_forward_fixed::<F, 8, 12>(input, in_side, layer, out),
        _ => conv_forward_dyn(input, in_side, layer, out),
    }
}

fn conv_forward_fixed<F: Scalar, const IC: usize, const OC: usize>(
    input: &[F],
    in_side: usize,
    layer: &ConvLayer<F>,
    out: &mut [F],
) {
    let kernel = layer.kernel();
    let stride = layer.stride;
    let out_side = conv_output_side(in_side, stride);
    let pad = same_pad_begin(in_side, kernel, stride);
    debug_assert_eq!(out.len(), out_side * out_side * OC);
    let weights = &layer.weights.data;
    let bias: &[F; OC] = layer.bias.data.as_slice().try_into().expect("bias arity");
    for y in 0..out_side {
        let iy0 = (y * stride) as isize - pad as isize;
        for x in 0..out_side {
            let ix0 = (x * stride) as isize - pad as isize;
            let mut acc: [F; OC] = *bias;
            for ky in 0..kernel {
                let iy = iy0 + ky as isize;
                if iy < 0 || iy >= in_side as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= in_side as isize {
                        continue;
                    }
                    let in_base = (iy as usize * in_side + ix as usize) * IC;
                    let w_base = (ky * kernel + kx) * IC * OC;
                    for i in 0..IC {
                        let v = input[in_base + i];
                        if v == F::zero() {
                            continue; // images and post-ReLU maps are sparse
                        }
                        let row: &[F; OC] =
                            weights[w_base + i * OC..][..OC].try_into().expect("row arity");
                        for (a, &w) in acc.iter_mut().zip(row) {
                            *a += v * w;
                        }
                    }
                }
            }
            let out_base = (y * out_side + x) * OC;
            out[out_base..out_base + OC].copy_from_slice(&acc);
        }
    }
}

fn conv_forward_dyn<F: Scalar>(input: &[F], in_side: usize, layer: &ConvLayer<F>, out: &mut [F]) {
    let kernel = layer.kernel();
    let in_channels = layer.in_channels();
    let out_channels = layer.out_channels();
    let stride = layer.stride;
    let out_side = conv_output_side(in_side, stride);
    let pad = same_pad_begin(in_side, kernel, stride);
    debug_assert_eq!(out.len(), out_side * out_side * out_channels);
    let weights = &layer.weights.data;
    let bias = &layer.bias.data;
    let mut acc = vec![F::zero(); out_channels];
    for y in 0..out_side {
        let iy0 = (y * stride) as isize - pad as isize;
        for x in 0..out_side {
            let ix0 = (x * stride) as isize - pad as isize;
            acc.copy_from_slice(bias);
            for ky in 0..kernel {
                let iy = iy0 + ky as isize;
                if iy < 0 || iy >= in_side as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= in_side as isize {
                        continue;
                    }
                    let in_base = (iy as usize * in_side + ix as usize) * in_channels;
                    let w_base = (ky * kernel + kx) * in_channels * out_channels;
                    for i in 0..in_channels {
                        let v = input[in_base + i];
                        if v == F::zero() {
                            continue;
                        }
                        let row = &weights[w_base + i * out_channels..][..out_channels];
                        for (a, &w) in acc.iter_mut().zip(row) {
                            *a += v * w;
                        }
                    }
                }
            }
            let out_base = (y * out_side + x) * out_channels;
            out[out_base..out_base + out_channels].copy_from_slice(&acc);
        }
    }
}

/// Backward pass of [`conv_forward`]. Weight and bias gradients are
/// accumulated (batch semantics); `din` is overwritten. The first layer
/// passes `compute_din = false` — nothing propagates into the pixels.
fn conv_backward<F: Scalar>(
    input: &[F],
    in_side: usize,
    layer: &ConvLayer<F>,
    dout: &[F],
    dweights: &mut [F],
    dbias: &mut [F],
    din: &mut [F],
    compute_din: bool,
) {
    match (layer.in_channels(), layer.out_channels()) {
        (1, 4) => conv_backward_fixed::<F, 1, 4>(
            input, in_side, layer, dout, dweights, dbias, din, compute_din,
        ),
        (4, 8) => conv_backward_fixed::<F, 4, 8>(
            input, in_side, layer, dout, dweights, dbias, din, compute_din,
        ),
        (8, 12) => conv_backward_fixed::<F, 8, 12>(
            input, in_side, layer, dout, dweights, dbias, din, compute_din,
        ),
        _ => conv_backward_dyn(input, in_side, layer, dout, dweights, dbias, din, compute_din),
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_fixed<F: Scalar, const IC: usize, const OC: usize>(
    input: &[F],
    in_side: usize,
    layer: &ConvLayer<F>,
    dout: &[F],
    dweights: &mut [F],
    dbias: &mut [F],
    din: &mut [F],
    compute_din: bool,
) {
    let kernel = layer.kernel();
    let stride = layer.stride;
    let out_side = conv_output_side(in_side, stride);
    let pad = same_pad_begin(in_side, kernel, stride);
    let weights = &layer.weights.data;
    if compute_din {
        din.fill(F::zero());
    }
    for y in 0..out_side {
        let iy0 = (y * stride) as isize - pad as isize;
        for x in 0..out_side {
            let ix0 = (x * stride) as isize - pad as isize;
            let dout_row: &[F; OC] = dout[(y * out_side + x) * OC..][..OC]
                .try_into()
                .expect("row arity");
            for (db, &g) in dbias.iter_mut().zip(dout_row) {
                *db += g;
            }
            for ky in 0..kernel {
                let iy = iy0 + ky as isize;
                if iy < 0 || iy >= in_side as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= in_side as isize {
                        continue;
                    }
                    let in_base = (iy as usize * in_side + ix as usize) * IC;
                    let w_base = (ky * kernel + kx) * IC * OC;
                    for i in 0..IC {
                        let v = input[in_base + i];
                        let dense = v != F::zero();
                        if !compute_din {
                            if dense {
                                let dw_row: &mut [F; OC] = (&mut dweights
                                    [w_base + i * OC..][..OC])
                                    .try_into()
                                    .expect("row arity");
                                for (dw, &g) in dw_row.iter_mut().zip(dout_row) {
                                    *dw += v * g;
                                }
                            }
                            continue;
                        }
                        let w_row: &[F; OC] =
                            weights[w_base + i * OC..][..OC].try_into().expect("row arity");
                        let mut back = F::zero();
                        if dense {
                            let dw_row: &mut [F; OC] = (&mut dweights[w_base + i * OC..][..OC])
                                .try_into()
                                .expect("row arity");
                            for ((dw, &g), &w) in dw_row.iter_mut().zip(dout_row).zip(w_row) {
                                *dw += v * g;
                                back += w * g;
                            }
                        } else {
                            for (&w, &g) in w_row.iter().zip(dout_row) {
                                back += w * g;
                            }
                        }
                        din[in_base + i] += back;
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_dyn<F: Scalar>(
    input: &[F],
    in_side: usize,
    layer: &ConvLayer<F>,
    dout: &[F],
    dweights: &mut [F],
    dbias: &mut [F],
    din: &mut [F],
    compute_din: bool,
) {
    let kernel = layer.kernel();
    let in_channels = layer.in_channels();
    let out_channels = layer.out_channels();
    let stride = layer.stride;
    let out_side = conv_output_side(in_side, stride);
    let pad = same_pad_begin(in_side, kernel, stride);
    let weights = &layer.weights.data;
    if compute_din {
        din.fill(F::zero());
    }
    for y in 0..out_side {
        let iy0 = (y * stride) as isize - pad as isize;
        for x in 0..out_side {
            let ix0 = (x * stride) as isize - pad as isize;
            let dout_row = &dout[(y * out_side + x) * out_channels..][..out_channels];
            for (db, &g) in dbias.iter_mut().zip(dout_row) {
                *db += g;
            }
            for ky in 0..kernel {
                let iy = iy0 + ky as isize;
                if iy < 0 || iy >= in_side as isize {
                    continue;
                }
                for kx in 0..kernel {
                    let ix = ix0 + kx as isize;
                    if ix < 0 || ix >= in_side as isize {
                        continue;
                    }
                    let in_base = (iy as usize * in_side + ix as usize) * in_channels;
                    let w_base = (ky * kernel + kx) * in_channels * out_channels;
                    for i in 0..in_channels {
                        let v = input[in_base + i];
                        let dense = v != F::zero();
                        if !compute_din {
                            if dense {
                                let dw_row =
                                    &mut dweights[w_base + i * out_channels..][..out_channels];
                                for (dw, &g) in dw_row.iter_mut().zip(dout_row) {
                                    *dw += v * g;
                                }
                            }
                            continue;
                        }
                        let w_row = &weights[w_base + i * out_channels..][..out_channels];
                        let mut back = F::zero();
                        if dense {
                            let dw_row =
                                &mut dweights[w_base + i * out_channels..][..out_channels];
                            for ((dw, &g), &w) in dw_row.iter_mut().zip(dout_row).zip(w_row) {
                                *dw += v * g;
                                back += w * g;
                            }
                        } else {
                            for (&w, &g) in w_row.iter().zip(dout_row) {
                                back += w * g;
                            }
                        }
                        din[in_base + i] += back;
                    }
                }
            }
        }
    }
}

fn dense_forward<F: Scalar>(input: &[F], layer: &DenseLayer<F>, out: &mut [F]) {
    let outputs = layer.outputs();
    debug_assert_eq!(input.len(), layer.inputs());
    debug_assert_eq!(out.len(), outputs);
    out.copy_from_slice(&layer.bias.data);
    for (i, &v) in input.iter().enumerate() {
        if v == F::zero() {
            continue; // post-ReLU inputs are sparse
        }
        let row = &layer.weights.data[i * outputs..][..outputs];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += v * w;
        }
    }
}

/// Backward pass of [`dense_forward`]; gradient semantics mirror
/// [`conv_backward`].
fn dense_backward<F: Scalar>(
    input: &[F],
    layer: &DenseLayer<F>,
    dout: &[F],
    dweights: &mut [F],
    dbias: &mut [F],
    din: &mut [F],
) {
    let outputs = layer.outputs();
    for (db, &g) in dbias.iter_mut().zip(dout) {
        *db += g;
    }
    for (i, &v) in input.iter().enumerate() {
        let w_row = &layer.weights.data[i * outputs..][..outputs];
        let mut back = F::zero();
        if v == F::zero() {
            for (&w, &g) in w_row.iter().zip(dout) {
                back += w * g;
            }
        } else {
            let dw_row = &mut dweights[i * outputs..][..outputs];
            for ((dw, &g), &w) in dw_row.iter_mut().zip(dout).zip(w_row) {
                *dw += v * g;
                back += w * g;
            }
        }
        din[i] = back;
    }
}

fn softmax<F: Scalar>(logits: &[F], probs: &mut [F]) {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    let inv = F::one() / sum;
    for p in probs {
        *p = *p * inv;
    }
}

/// Runs the network, filling `trace` with every intermediate activation.
pub fn forward_into<F: Scalar>(
    params: &ModelParams<F>,
    image: &[F],
    indicator: &[F],
    trace: &mut ForwardTrace<F>,
) {
    let shape = &params.shape;
    let sides = shape.conv_sides();
    assert_eq!(image.len(), shape.image_len());
    assert_eq!(indicator.len(), shape.indicator_width);
    trace.image.copy_from_slice(image);
    conv_forward(&trace.image, sides[0], &params.conv1, &mut trace.conv1_out);
    relu_inplace(&mut trace.conv1_out);
    conv_forward(&trace.conv1_out, sides[1], &params.conv2, &mut trace.conv2_out);
    relu_inplace(&mut trace.conv2_out);
    conv_forward(&trace.conv2_out, sides[2], &params.conv3, &mut trace.conv3_out);
    relu_inplace(&mut trace.conv3_out);
    let flatten = shape.flatten_len();
    trace.cat[..flatten].copy_from_slice(&trace.conv3_out);
    trace.cat[flatten..].copy_from_slice(indicator);
    dense_forward(&trace.cat, &params.fc1, &mut trace.fc1_out);
    relu_inplace(&mut trace.fc1_out);
    dense_forward(&trace.fc1_out, &params.fc2, &mut trace.logits);
    softmax(&trace.logits, &mut trace.probs);
}

/// Convenience wrapper allocating a fresh trace.
pub fn forward<F: Scalar>(params: &ModelParams<F>, image: &[F], indicator: &[F]) -> ForwardTrace<F> {
    let mut trace = ForwardTrace::new(&params.shape);
    forward_into(params, image, indicator, &mut trace);
    trace
}

/// Softmax cross-entropy of the traced logits against `target`, computed
/// through log-sum-exp for stability.
pub fn cross_entropy_loss<F: Scalar>(trace: &ForwardTrace<F>, target: usize) -> F {
    let logits = &trace.logits;
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for &z in logits {
        sum += (z - max).exp();
    }
    sum.ln() - (logits[target] - max)
}

/// Forward pass plus loss; the closure the finite-difference checker
/// probes.
pub fn loss_of<F: Scalar>(
    params: &ModelParams<F>,
    image: &[F],
    indicator: &[F],
    target: usize,
) -> F {
    cross_entropy_loss(&forward(params, image, indicator), target)
}

/// Backpropagates one traced example, accumulating parameter gradients
/// into `grads` (callers zero and average over the batch).
pub fn backward_into<F: Scalar>(
    params: &ModelParams<F>,
    trace: &ForwardTrace<F>,
    target: usize,
    grads: &mut ModelParams<F>,
    scratch: &mut BackwardScratch<F>,
) {
    let shape = &params.shape;
    let sides = shape.conv_sides();
    let flatten = shape.flatten_len();

    scratch.dlogits.copy_from_slice(&trace.probs);
    scratch.dlogits[target] = scratch.dlogits[target] - F::one();

    dense_backward(
        &trace.fc1_out,
        &params.fc2,
        &scratch.dlogits,
        &mut grads.fc2.weights.data,
        &mut grads.fc2.bias.data,
        &mut scratch.dfc1,
    );
    relu_backward_inplace(&mut scratch.dfc1, &trace.fc1_out);
    dense_backward(
        &trace.cat,
        &params.fc1,
        &scratch.dfc1,
        &mut grads.fc1.weights.data,
        &mut grads.fc1.bias.data,
        &mut scratch.dcat,
    );

    scratch.dconv3.copy_from_slice(&scratch.dcat[..flatten]);
    relu_backward_inplace(&mut scratch.dconv3, &trace.conv3_out);
    conv_backward(
        &trace.conv2_out,
        sides[2],
        &params.conv3,
        &scratch.dconv3,
        &mut grads.conv3.weights.data,
        &mut grads.conv3.bias.data,
        &mut scratch.dconv2,
        true,
    );
    relu_backward_inplace(&mut scratch.dconv2, &trace.conv2_out);
    conv_backward(
        &trace.conv1_out,
        sides[1],
        &params.conv2,
        &scratch.dconv2,
        &mut grads.conv2.weights.data,
        &mut grads.conv2.bias.data,
        &mut scratch.dconv1,
        true,
    );
    relu_backward_inplace(&mut scratch.dconv1, &trace.conv1_out);
    conv_backward(
        &trace.image,
        sides[0],
        &params.conv1,
        &scratch.dconv1,
        &mut grads.conv1.weights.data,
        &mut grads.conv1.bias.data,
        &mut scratch.dimage,
        false,
    );
}

/// Index of the largest value, ties broken towards the lowest index.
pub fn argmax<F: PartialOrd>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
