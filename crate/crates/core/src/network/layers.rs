//! Layer kernels: 3×3 "same" convolution (stride 1 or 2), nearest-neighbor
//! upsampling and pointwise activations, each with its backward pass.
//!
//! Feature maps are `(channels, height, width)` arrays in standard layout.
//! Convolutions are lowered to a matrix product over an im2col buffer.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};

pub const KERNEL: usize = 3;
pub const KERNEL_AREA: usize = KERNEL * KERNEL;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(alpha) => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z
                }
            }
        }
    }

    /// Derivative at `z`; the kink at zero takes the negative-side slope.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
        }
    }
}

/// Output size and padding of a 3×3 "same" convolution.
///
/// Matches the usual framework convention: the output has `ceil(n / stride)`
/// samples and any odd padding goes to the bottom/right edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn new(in_h: usize, in_w: usize, stride: usize) -> Self {
        let out = |n: usize| n.div_ceil(stride);
        let pad = |n: usize, o: usize| ((o - 1) * stride + KERNEL).saturating_sub(n) / 2;
        let (out_h, out_w) = (out(in_h), out(in_w));
        Self { in_h, in_w, out_h, out_w, stride, pad_top: pad(in_h, out_h), pad_left: pad(in_w, out_w) }
    }

    fn source(&self, out_idx: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        let pos = (out_idx * self.stride + k).checked_sub(pad)?;
        (pos < limit).then_some(pos)
    }
}

/// Gathers 3×3 neighborhoods into a `(channels·9, out_h·out_w)` matrix.
pub fn im2col(x: &Array3<f64>, geo: &ConvGeometry) -> Array2<f64> {
    let (channels, h, w) = x.dim();
    let xs = x.as_slice().expect("standard layout");
    let plane = geo.out_h * geo.out_w;
    let mut cols = Array2::zeros((channels * KERNEL_AREA, plane));
    let dst = cols.as_slice_mut().expect("standard layout");
    for c in 0..channels {
        let src = &xs[c * h * w..(c + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut dst[((c * KERNEL + ky) * KERNEL + kx) * plane..][..plane];
                for oy in 0..geo.out_h {
                    let Some(iy) = geo.source(oy, ky, geo.pad_top, h) else { continue };
                    let src_row = &src[iy * w..(iy + 1) * w];
                    let dst_row = &mut row[oy * geo.out_w..(oy + 1) * geo.out_w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        if let Some(ix) = geo.source(ox, kx, geo.pad_left, w) {
                            *d = src_row[ix];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatters an im2col-shaped gradient back onto the input grid (adjoint of [`im2col`]).
pub fn col2im(cols: &Array2<f64>, channels: usize, geo: &ConvGeometry) -> Array3<f64> {
    let (h, w) = (geo.in_h, geo.in_w);
    let plane = geo.out_h * geo.out_w;
    let mut x = Array3::zeros((channels, h, w));
    let src = cols.as_slice().expect("standard layout");
    let xs = x.as_slice_mut().expect("standard layout");
    for c in 0..channels {
        let dst = &mut xs[c * h * w..(c + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &src[((c * KERNEL + ky) * KERNEL + kx) * plane..][..plane];
                for oy in 0..geo.out_h {
                    let Some(iy) = geo.source(oy, ky, geo.pad_top, h) else { continue };
                    let src_row = &row[oy * geo.out_w..(oy + 1) * geo.out_w];
                    let dst_row = &mut dst[iy * w..(iy + 1) * w];
                    for (ox, &g) in src_row.iter().enumerate() {
                        if let Some(ix) = geo.source(ox, kx, geo.pad_left, w) {
                            dst_row[ix] += g;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Pre-activation output of a convolution with `weight` shaped `(out, in·9)`.
pub fn conv_forward(x: &Array3<f64>, weight: &Array2<f64>, bias: &Array1<f64>, stride: usize) -> Array3<f64> {
    let (_, h, w) = x.dim();
    let geo = ConvGeometry::new(h, w, stride);
    let cols = im2col(x, &geo);
    let mut z = weight.dot(&cols);
    z += &bias.view().insert_axis(Axis(1));
    z.into_shape_with_order((weight.nrows(), geo.out_h, geo.out_w)).expect("conv output shape")
}

pub struct ConvBackward {
    pub d_input: Array3<f64>,
    pub d_weight: Array2<f64>,
    pub d_bias: Array1<f64>,
}

/// Gradients of a convolution given the gradient `dz` of its pre-activation output.
pub fn conv_backward(x: &Array3<f64>, weight: &Array2<f64>, dz: &Array3<f64>, stride: usize) -> ConvBackward {
    let (channels, h, w) = x.dim();
    let geo = ConvGeometry::new(h, w, stride);
    let cols = im2col(x, &geo);
    let dz: ArrayView2<f64> = dz.view().into_shape_with_order((weight.nrows(), geo.out_h * geo.out_w)).expect("conv gradient shape");
    let d_weight = dz.dot(&cols.t());
    let d_bias = dz.sum_axis(Axis(1));
    let d_cols = weight.t().dot(&dz);
    let d_input = col2im(&d_cols.as_standard_layout().into_owned(), channels, &geo);
    ConvBackward { d_input, d_weight, d_bias }
}

/// Nearest-neighbor upsampling by 2 in both directions.
pub fn upsample2(x: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = x.dim();
    Array3::from_shape_fn((c, 2 * h, 2 * w), |(k, y, x_)| x[[k, y / 2, x_ / 2]])
}

/// Adjoint of [`upsample2`]: each input cell collects its 2×2 fan-out.
pub fn upsample2_backward(dy: &Array3<f64>) -> Array3<f64> {
    let (c, h2, w2) = dy.dim();
    let mut dx = Array3::zeros((c, h2 / 2, w2 / 2));
    for ((k, y, x), &g) in dy.indexed_iter() {
        dx[[k, y / 2, x / 2]] += g;
    }
    dx
}
