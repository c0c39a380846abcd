//! Fully convolutional autoencoder trained from scratch.
//!
//! The default architecture downsamples twice with stride-2 convolutions,
//! keeps two bottleneck convolutions and upsamples twice with
//! nearest-neighbor interpolation:
//!
//! ```text
//! conv 3→32   conv 32→32 /2   conv 32→64   conv 64→64 /2
//! conv 64→64  conv 64→64
//! up×2  conv 64→32  conv 32→32  up×2  conv 32→16  conv 16→16*  conv 16→3*
//! ```
//!
//! All convolutions are 3×3 with "same" padding. Layers marked `*` use
//! Leaky-ReLU, the rest ReLU. The network has 174,515 trainable parameters.

mod adam;
mod checkpoint;
pub mod layers;

use ndarray::{Array1, Array2, Array3, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use self::adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use self::checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use self::layers::Activation;

use self::layers::{conv_backward, conv_forward, upsample2, upsample2_backward, KERNEL_AREA};
use crate::{Error, ImageTensor, Result, CHANNELS};

pub const DEFAULT_LEAKY_ALPHA: f64 = 0.19;
pub const L1_KERNEL_FACTOR: f64 = 15e-6;
pub const L1_BIAS_FACTOR: f64 = 1.5e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        activation: Activation,
    },
    /// Nearest-neighbor upsampling by a factor of 2.
    Upsample,
}

impl LayerSpec {
    pub fn conv(in_ch: usize, out_ch: usize, stride: usize, activation: Activation) -> Self {
        LayerSpec::Conv { in_ch, out_ch, stride, activation }
    }
}

/// The default encoder/decoder layout.
pub fn default_architecture(leaky_alpha: f64) -> Vec<LayerSpec> {
    use Activation::{LeakyRelu, Relu};
    vec![
        LayerSpec::conv(3, 32, 1, Relu),
        LayerSpec::conv(32, 32, 2, Relu),
        LayerSpec::conv(32, 64, 1, Relu),
        LayerSpec::conv(64, 64, 2, Relu),
        LayerSpec::conv(64, 64, 1, Relu),
        LayerSpec::conv(64, 64, 1, Relu),
        LayerSpec::Upsample,
        LayerSpec::conv(64, 32, 1, Relu),
        LayerSpec::conv(32, 32, 1, Relu),
        LayerSpec::Upsample,
        LayerSpec::conv(32, 16, 1, Relu),
        LayerSpec::conv(16, 16, 1, LeakyRelu(leaky_alpha)),
        LayerSpec::conv(16, 3, 1, LeakyRelu(leaky_alpha)),
    ]
}

/// Weights `(out, in·9)` and biases `(out)` of one convolution. The same
/// shape is used for gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ConvParams {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self { weight: Array2::zeros((out_ch, in_ch * KERNEL_AREA)), bias: Array1::zeros(out_ch) }
    }

    fn zeros_like(&self) -> Self {
        Self { weight: Array2::zeros(self.weight.raw_dim()), bias: Array1::zeros(self.bias.raw_dim()) }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter())
    }
}

/// Gradients of a scalar loss with respect to every convolution, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<ConvParams>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self { layers: params.convs.iter().map(ConvParams::zeros_like).collect() }
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weight *= factor;
            g.bias *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|g| g.values().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().flat_map(|g| g.values()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Network weights plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub(crate) specs: Vec<LayerSpec>,
    pub(crate) convs: Vec<ConvParams>,
    pub optimizer: AdamState,
}

/// Builds the default architecture with Glorot-normal weights.
pub fn build_network(seed: u64) -> NetworkParams {
    NetworkParams::new(default_architecture(DEFAULT_LEAKY_ALPHA), seed).expect("default architecture is valid")
}

impl NetworkParams {
    /// Initializes `specs` with Glorot-normal weights
    /// (`std = sqrt(2 / (fan_in + fan_out))`) and zero biases.
    pub fn new(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut channels = CHANNELS;
        for spec in &specs {
            if let LayerSpec::Conv { in_ch, out_ch, stride, .. } = *spec {
                if in_ch != channels {
                    return Err(Error::InvalidDimensions(format!("convolution expects {in_ch} input channels but receives {channels}")));
                }
                if !(stride == 1 || stride == 2) || out_ch == 0 {
                    return Err(Error::InvalidDimensions(format!("unsupported convolution {in_ch}->{out_ch} stride {stride}")));
                }
                let std = (2.0 / ((in_ch + out_ch) * KERNEL_AREA) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let mut p = ConvParams::zeros(in_ch, out_ch);
                p.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
                convs.push(p);
                channels = out_ch;
            }
        }
        if channels != CHANNELS {
            return Err(Error::InvalidDimensions(format!("network must end with 3 channels, ends with {channels}")));
        }
        let optimizer = AdamState::for_layers(&convs);
        Ok(Self { specs, convs, optimizer })
    }

    /// Assembles parameters from explicit weights; used by checkpoint loading.
    pub(crate) fn from_parts(specs: Vec<LayerSpec>, convs: Vec<ConvParams>, optimizer: AdamState) -> Self {
        Self { specs, convs, optimizer }
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn convs(&self) -> &[ConvParams] {
        &self.convs
    }

    pub fn convs_mut(&mut self) -> &mut [ConvParams] {
        &mut self.convs
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(ConvParams::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.convs.iter().all(|c| c.values().all(|v| v.is_finite()))
    }

    /// Spatial divisor the input dimensions must satisfy.
    pub fn size_divisor(&self) -> usize {
        self.specs
            .iter()
            .map(|s| match s {
                LayerSpec::Conv { stride, .. } => *stride,
                LayerSpec::Upsample => 1,
            })
            .product()
    }

    /// Copy with every weight, bias and optimizer moment rounded to `f32`,
    /// i.e. exactly what a checkpoint stores.
    pub fn quantized(&self) -> Self {
        let round = |p: &ConvParams| ConvParams { weight: p.weight.mapv(|v| v as f32 as f64), bias: p.bias.mapv(|v| v as f32 as f64) };
        Self {
            specs: self.specs.clone(),
            convs: self.convs.iter().map(round).collect(),
            optimizer: AdamState {
                step: self.optimizer.step,
                first: self.optimizer.first.iter().map(round).collect(),
                second: self.optimizer.second.iter().map(round).collect(),
            },
        }
    }
}

/// Intermediate values kept by [`forward`] for [`backward`].
#[derive(Clone, Debug)]
pub struct ActivationCache {
    /// Input of each layer.
    inputs: Vec<Array3<f64>>,
    /// Pre-activation output of each convolution (`None` for upsampling).
    pre_activations: Vec<Option<Array3<f64>>>,
}

pub(crate) fn image_to_chw(img: &ImageTensor) -> Array3<f64> {
    img.data().view().permuted_axes([2, 0, 1]).as_standard_layout().into_owned()
}

pub(crate) fn chw_to_image(t: Array3<f64>) -> Result<ImageTensor> {
    ImageTensor::new(t.permuted_axes([1, 2, 0]).as_standard_layout().into_owned())
}

fn check_input(params: &NetworkParams, img: &ImageTensor) -> Result<()> {
    let d = params.size_divisor();
    let (h, w) = img.dims();
    if h % d != 0 || w % d != 0 {
        return Err(Error::InvalidDimensions(format!("input {h}x{w} must be divisible by {d}")));
    }
    Ok(())
}

fn run(params: &NetworkParams, img: &ImageTensor, mut cache: Option<&mut ActivationCache>) -> Result<ImageTensor> {
    check_input(params, img)?;
    let mut x = image_to_chw(img);
    let mut convs = params.convs.iter();
    for spec in &params.specs {
        if let Some(c) = cache.as_deref_mut() {
            c.inputs.push(x.clone());
        }
        match *spec {
            LayerSpec::Conv { stride, activation, .. } => {
                let p = convs.next().expect("one parameter block per convolution");
                let z = conv_forward(&x, &p.weight, &p.bias, stride);
                x = z.mapv(|v| activation.apply(v));
                if let Some(c) = cache.as_deref_mut() {
                    c.pre_activations.push(Some(z));
                }
            }
            LayerSpec::Upsample => {
                x = upsample2(&x);
                if let Some(c) = cache.as_deref_mut() {
                    c.pre_activations.push(None);
                }
            }
        }
    }
    let out = chw_to_image(x)?;
    img.ensure_same_dims(&out)?;
    Ok(out)
}

/// Runs the network, keeping what [`backward`] needs.
pub fn forward(params: &NetworkParams, img: &ImageTensor) -> Result<(ImageTensor, ActivationCache)> {
    let mut cache = ActivationCache { inputs: Vec::new(), pre_activations: Vec::new() };
    let out = run(params, img, Some(&mut cache))?;
    Ok((out, cache))
}

/// Runs the network without retaining intermediates.
pub fn predict(params: &NetworkParams, img: &ImageTensor) -> Result<ImageTensor> {
    run(params, img, None)
}

/// Reverse-mode gradients of a scalar loss given `out_grad = dL/d(output)`.
pub fn backward(params: &NetworkParams, cache: &ActivationCache, out_grad: &ImageTensor) -> Result<Gradients> {
    if cache.inputs.len() != params.specs.len() {
        return Err(Error::InvalidDimensions("activation cache does not match the network".into()));
    }
    let input = &cache.inputs[0];
    out_grad.ensure_same_dims(&ImageTensor::zeros(input.dim().1, input.dim().2))?;

    let mut grads = Gradients::zeros_like(params);
    let mut conv_idx = params.convs.len();
    let mut dy = image_to_chw(out_grad);
    for (layer, spec) in params.specs.iter().enumerate().rev() {
        match *spec {
            LayerSpec::Conv { stride, activation, .. } => {
                conv_idx -= 1;
                let z = cache.pre_activations[layer].as_ref().expect("convolution cache");
                let mut dz = dy;
                Zip::from(&mut dz).and(z).for_each(|g, &zv| *g *= activation.derivative(zv));
                let p = &params.convs[conv_idx];
                let back = conv_backward(&cache.inputs[layer], &p.weight, &dz, stride);
                grads.layers[conv_idx] = ConvParams { weight: back.d_weight, bias: back.d_bias };
                dy = back.d_input;
            }
            LayerSpec::Upsample => dy = upsample2_backward(&dy),
        }
    }
    Ok(grads)
}

/// L1 penalty `kernel·Σ|w| + bias·Σ|b|` and its subgradient (zero at zero).
pub fn l1_penalty(params: &NetworkParams, kernel_factor: f64, bias_factor: f64) -> (f64, Gradients) {
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut penalty = 0.0;
    let mut layers = Vec::with_capacity(params.convs.len());
    for p in &params.convs {
        penalty += kernel_factor * p.weight.iter().map(|w| w.abs()).sum::<f64>();
        penalty += bias_factor * p.bias.iter().map(|b| b.abs()).sum::<f64>();
        layers.push(ConvParams { weight: p.weight.mapv(|w| kernel_factor * sign(w)), bias: p.bias.mapv(|b| bias_factor * sign(b)) });
    }
    (penalty, Gradients { layers })
}
