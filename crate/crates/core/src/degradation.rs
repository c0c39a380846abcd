//! Color-space degradation model.
//!
//! An image is described as `I = J·exp(-gd) + (1 - exp(-gb))·Λ`, where the
//! pixel-wise turbidity factors `gd`, `gb` and the context luminosity `Λ`
//! are estimated from the image itself. Applying that model to an image
//! (twice) yields a more strongly degraded version `I*`; the difference
//! `I* - I_c` against the histogram-stretched `I_c` is the degradation that
//! the training pipeline adds to the network output.

use ndarray::{Axis, Zip};

use crate::image::{channel_stats, median_of, stretch_histogram};
use crate::{ChannelStats, ImageTensor, Result, CHANNELS, EPSILON};

/// Per-image degradation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationBundle {
    /// Attenuation of scene radiance, `gd ≥ 0` for images inside `[0, 1]`.
    pub gd: ImageTensor,
    /// Backscatter weight of the ambient light.
    pub gb: ImageTensor,
    /// Context luminosity per channel (the channel median).
    pub lambda: [f64; CHANNELS],
    pub source_stats: ChannelStats,
}

impl DegradationBundle {
    /// Estimates `gd`, `gb` and `Λ` from the image's own statistics.
    pub fn estimate(img: &ImageTensor) -> Self {
        let stats = channel_stats(img);
        Self::with_stats(img, stats)
    }

    /// Same as [`estimate`](Self::estimate) but with precomputed statistics.
    pub fn with_stats(img: &ImageTensor, stats: ChannelStats) -> Self {
        let lambda = stats.median;
        Self { gd: gd_map(img, &stats), gb: gb_map(img, &stats, lambda), lambda, source_stats: stats }
    }
}

/// `(1 - bw) / bw`, or `None` for an informationless channel.
pub(crate) fn range_factor(bw: f64) -> Option<f64> {
    (bw >= EPSILON).then(|| (1.0 - bw) / bw)
}

/// Context luminosity: the per-channel median.
pub fn context_luminosity(img: &ImageTensor) -> [f64; CHANNELS] {
    let mut out = [0.0; CHANNELS];
    for (k, value) in out.iter_mut().enumerate() {
        let mut values: Vec<f64> = img.channel(k).iter().copied().collect();
        *value = median_of(&mut values);
    }
    out
}

/// `gd = (1 - bw)/bw · (max - I)·(I - min)`.
pub fn gd_map(img: &ImageTensor, stats: &ChannelStats) -> ImageTensor {
    let mut out = img.clone();
    for (k, mut lane) in out.data_mut().axis_iter_mut(Axis(2)).enumerate() {
        match range_factor(stats.bw[k]) {
            None => lane.fill(0.0),
            Some(f) => {
                let (min, max) = (stats.min[k], stats.max[k]);
                lane.mapv_inplace(|v| f * (max - v) * (v - min));
            }
        }
    }
    out
}

/// `gb = (1 - bw)/bw · (max - I)·(Λ - min)`.
pub fn gb_map(img: &ImageTensor, stats: &ChannelStats, lambda: [f64; CHANNELS]) -> ImageTensor {
    let mut out = img.clone();
    for (k, mut lane) in out.data_mut().axis_iter_mut(Axis(2)).enumerate() {
        match range_factor(stats.bw[k]) {
            None => lane.fill(0.0),
            Some(f) => {
                let (max, lum) = (stats.max[k], lambda[k] - stats.min[k]);
                lane.mapv_inplace(|v| f * (max - v) * lum);
            }
        }
    }
    out
}

/// Applies the formation model to `scene`: `scene·exp(-gd) + (1 - exp(-gb))·Λ`.
/// The result is not clamped.
pub fn apply_ifm(scene: &ImageTensor, bundle: &DegradationBundle) -> Result<ImageTensor> {
    scene.ensure_same_dims(&bundle.gd)?;
    scene.ensure_same_dims(&bundle.gb)?;
    let mut out = scene.clone();
    for (k, mut lane) in out.data_mut().axis_iter_mut(Axis(2)).enumerate() {
        let lum = bundle.lambda[k];
        Zip::from(&mut lane)
            .and(bundle.gd.channel(k))
            .and(bundle.gb.channel(k))
            .for_each(|v, &gd, &gb| *v = *v * (-gd).exp() + (1.0 - (-gb).exp()) * lum);
    }
    Ok(out)
}

/// Once-degraded image `I_dbn`, using parameters estimated from `img`.
pub fn degrade_once(img: &ImageTensor) -> ImageTensor {
    let bundle = DegradationBundle::estimate(img);
    apply_ifm(img, &bundle).expect("bundle estimated from the same image")
}

/// Twice-degraded image `I*`. The second pass re-estimates the parameters
/// from the unclamped `I_dbn`.
pub fn degrade_twice(img: &ImageTensor) -> ImageTensor {
    degrade_once(&degrade_once(img))
}

/// `Î* = Î + I* - I_c (+ I_at)`, unclamped.
///
/// Evaluated as `(Î + (I* - I_c)) + I_at`: equal `I*` and `I_c` leave `Î`
/// bit-identical, and the attention term is a final separate addition.
pub fn degradation_function(
    net_out: &ImageTensor,
    i_star: &ImageTensor,
    i_c: &ImageTensor,
    i_at: Option<&ImageTensor>,
) -> Result<ImageTensor> {
    net_out.ensure_same_dims(i_star)?;
    net_out.ensure_same_dims(i_c)?;
    let mut out = net_out.clone();
    Zip::from(out.data_mut()).and(i_star.data()).and(i_c.data()).for_each(|o, &s, &c| *o += s - c);
    if let Some(at) = i_at {
        net_out.ensure_same_dims(at)?;
        Zip::from(out.data_mut()).and(at.data()).for_each(|o, &a| *o += a);
    }
    Ok(out)
}

/// The images derived from an input that feed the degradation function.
#[derive(Clone, Debug)]
pub struct DegradationImages {
    pub i_dbn: ImageTensor,
    pub i_star: ImageTensor,
    /// Histogram-stretched input.
    pub i_c: ImageTensor,
}

impl DegradationImages {
    pub fn compute(img: &ImageTensor) -> Self {
        let i_dbn = degrade_once(img);
        let i_star = degrade_once(&i_dbn);
        let i_c = stretch_histogram(img, &channel_stats(img));
        Self { i_dbn, i_star, i_c }
    }
}
