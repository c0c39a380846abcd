//! Image container, per-channel statistics and raster conversion.
//!
//! An [`ImageTensor`] is an `H×W×3` array of `f64` in channel-last order.
//! Loaded and clamped images live in `[0, 1]`; intermediate results are
//! allowed to leave that interval.

use std::fs;
use std::path::Path;

use ::image::{ImageFormat, Rgb, RgbImage};
use ndarray::{Array3, ArrayView2, Axis, Zip};

use crate::{Error, Result};

/// Number of color channels (R, G, B).
pub const CHANNELS: usize = 3;

/// Guard for divisions by a dynamic range or by a pixel value.
pub const EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    data: Array3<f64>,
}

impl ImageTensor {
    /// Wraps an `(height, width, 3)` array.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (h, w, c) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidDimensions(format!("image must be at least 1x1, got {h}x{w}")));
        }
        if c != CHANNELS {
            return Err(Error::InvalidDimensions(format!("expected 3 channels, got {c}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, [0.0; CHANNELS])
    }

    pub fn filled(height: usize, width: usize, value: [f64; CHANNELS]) -> Self {
        Self::from_fn(height, width, |_, _, k| value[k])
    }

    /// Builds an image from a function of `(row, column, channel)`.
    ///
    /// Panics if `height` or `width` is zero.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self { data: Array3::from_shape_fn((height, width, CHANNELS), |(y, x, k)| f(y, x, k)) }
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, k: usize) -> f64 {
        self.data[[y, x, k]]
    }

    pub fn set(&mut self, y: usize, x: usize, k: usize, value: f64) {
        self.data[[y, x, k]] = value;
    }

    pub fn channel(&self, k: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(2), k)
    }

    pub fn ensure_same_dims(&self, other: &ImageTensor) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch { expected: self.dims(), actual: other.dims() });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageTensor {
        ImageTensor { data: self.data.mapv(f) }
    }

    /// Element-wise combination of two images of equal dimensions.
    pub fn zip_map(&self, other: &ImageTensor, f: impl Fn(f64, f64) -> f64) -> Result<ImageTensor> {
        self.ensure_same_dims(other)?;
        let data = Zip::from(&self.data).and(&other.data).map_collect(|&a, &b| f(a, b));
        Ok(ImageTensor { data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-channel mean over all pixels, summed in row-major order.
    pub fn channel_means(&self) -> [f64; CHANNELS] {
        let mut sums = [0.0; CHANNELS];
        for px in self.data.lanes(Axis(2)) {
            for k in 0..CHANNELS {
                sums[k] += px[k];
            }
        }
        let n = self.pixel_count() as f64;
        sums.map(|s| s / n)
    }

    pub fn from_rgb8(img: &RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        if w == 0 || h == 0 {
            return Err(Error::InvalidDimensions("empty raster".into()));
        }
        Ok(Self::from_fn(h as usize, w as usize, |y, x, k| f64::from(img.get_pixel(x as u32, y as u32)[k]) / 255.0))
    }

    /// Quantizes to 8 bits per channel, clipping to `[0, 1]` and rounding to nearest.
    pub fn to_rgb8(&self) -> RgbImage {
        let (h, w) = self.dims();
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([q(self.get(y, x, 0)), q(self.get(y, x, 1)), q(self.get(y, x, 2))])
        })
    }

    /// Reads a PNG or JPEG file into `[0, 1]` reals.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ::image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
        Self::from_rgb8(&img.to_rgb8())
    }

    /// Writes an 8-bit raster. The format follows the file extension (PNG
    /// when unknown); the file is written to a temporary sibling first and
    /// renamed into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let format = ImageFormat::from_path(path).unwrap_or(ImageFormat::Png);
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("image");
        let tmp = path.with_file_name(format!(".{file_name}.tmp"));
        self.to_rgb8().save_with_format(&tmp, format).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Per-channel order statistics and moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelStats {
    pub min: [f64; CHANNELS],
    pub max: [f64; CHANNELS],
    /// Dynamic range, `max - min`.
    pub bw: [f64; CHANNELS],
    pub mean: [f64; CHANNELS],
    pub median: [f64; CHANNELS],
}

impl ChannelStats {
    pub fn of(img: &ImageTensor) -> Self {
        channel_stats(img)
    }
}

/// Median of a sample; an even count averages the two middle values.
pub(crate) fn median_of(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn channel_stats(img: &ImageTensor) -> ChannelStats {
    let mut stats = ChannelStats {
        min: [0.0; CHANNELS],
        max: [0.0; CHANNELS],
        bw: [0.0; CHANNELS],
        mean: img.channel_means(),
        median: [0.0; CHANNELS],
    };
    for k in 0..CHANNELS {
        let mut values: Vec<f64> = img.channel(k).iter().copied().collect();
        stats.median[k] = median_of(&mut values);
        // sorted by median_of
        stats.min[k] = values[0];
        stats.max[k] = values[values.len() - 1];
        stats.bw[k] = stats.max[k] - stats.min[k];
        // keep the mean inside [min, max] despite rounding in the sum
        stats.mean[k] = stats.mean[k].clamp(stats.min[k], stats.max[k]);
    }
    stats
}

/// Per-channel histogram stretch `(I - min) / bw`; channels with `bw < EPSILON` become zero.
pub fn stretch_histogram(img: &ImageTensor, stats: &ChannelStats) -> ImageTensor {
    let mut out = img.clone();
    for (k, mut lane) in out.data.axis_iter_mut(Axis(2)).enumerate() {
        if stats.bw[k] < EPSILON {
            lane.fill(0.0);
        } else {
            let (min, bw) = (stats.min[k], stats.bw[k]);
            lane.mapv_inplace(|v| (v - min) / bw);
        }
    }
    out
}

/// Clips every value to `[0, 1]`, returning the image and the number of clipped values.
pub fn clamp01(img: &ImageTensor) -> (ImageTensor, usize) {
    let clipped = img.data.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    (img.map(|v| v.clamp(0.0, 1.0)), clipped)
}

/// Bilinear resampling with half-pixel centers. Aspect ratio is not preserved.
pub fn resize_bilinear(img: &ImageTensor, height: usize, width: usize) -> Result<ImageTensor> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions(format!("resize target must be positive, got {height}x{width}")));
    }
    let (src_h, src_w) = img.dims();
    if (src_h, src_w) == (height, width) {
        return Ok(img.clone());
    }
    let ys = sample_positions(src_h, height);
    let xs = sample_positions(src_w, width);
    Ok(ImageTensor::from_fn(height, width, |y, x, k| {
        let (y0, y1, ty) = ys[y];
        let (x0, x1, tx) = xs[x];
        let top = img.get(y0, x0, k) * (1.0 - tx) + img.get(y0, x1, k) * tx;
        let bottom = img.get(y1, x0, k) * (1.0 - tx) + img.get(y1, x1, k) * tx;
        top * (1.0 - ty) + bottom * ty
    }))
}

fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}
