//! Attention for saturated regions.
//!
//! Histogram stretching an image that combines strong channel unbalance
//! with a few very bright pixels produces saturated areas, which the
//! network then learns to reproduce. The detector below flags those pixels
//! in closed form; the resulting map `I_at` is added to the network output
//! as extra degradation.
//!
//! Per channel `k`, with `av` the channel mean, `av_g` the global mean and
//! `mdn` the channel median:
//!
//! ```text
//! thr  = max(av - mdn, 0)
//! gr   = 1 + thr / av
//! I_x  = max(I - max(I)·thr/av, 0)
//! I_a  = gr · |av - av_g| · I_x / I
//! I_at = (I_a - min(I_a)) / (max(I_a) - min(I_a))
//! ```

use ndarray::{Axis, Zip};

use crate::image::{channel_stats, stretch_histogram};
use crate::{ChannelStats, ImageTensor, CHANNELS, EPSILON};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    /// Stretched attention image, values in `[0, 1]`.
    pub i_at: ImageTensor,
    pub thr: [f64; CHANNELS],
    /// Reinforcement factor, `≥ 1`.
    pub gr: [f64; CHANNELS],
    /// Outlier image.
    pub i_x: ImageTensor,
    /// Attention image before stretching.
    pub i_a: ImageTensor,
}

// mean - median below this is summation noise
const THRESHOLD_NOISE: f64 = 1e-12;

fn threshold_from_stats(stats: &ChannelStats) -> [f64; CHANNELS] {
    std::array::from_fn(|k| {
        let d = stats.mean[k] - stats.median[k];
        if d > THRESHOLD_NOISE {
            d
        } else {
            0.0
        }
    })
}

/// Outlier threshold `max(av - mdn, 0)` per channel. Differences at
/// rounding level count as zero.
pub fn outlier_threshold(img: &ImageTensor) -> [f64; CHANNELS] {
    threshold_from_stats(&channel_stats(img))
}

fn reinforcement_from_means(means: &[f64; CHANNELS], thr: &[f64; CHANNELS]) -> [f64; CHANNELS] {
    std::array::from_fn(|k| if thr[k] > 0.0 { 1.0 + thr[k] / means[k].max(EPSILON) } else { 1.0 })
}

/// Reinforcement factor `1 + thr/av` per channel.
pub fn reinforcement_factor(img: &ImageTensor, thr: &[f64; CHANNELS]) -> [f64; CHANNELS] {
    reinforcement_from_means(&img.channel_means(), thr)
}

fn outlier_from_stats(img: &ImageTensor, max: &[f64; CHANNELS], means: &[f64; CHANNELS], thr: &[f64; CHANNELS]) -> ImageTensor {
    let mut out = img.clone();
    for (k, mut lane) in out.data_mut().axis_iter_mut(Axis(2)).enumerate() {
        if thr[k] == 0.0 || means[k] < EPSILON {
            lane.fill(0.0);
            continue;
        }
        let cut = max[k] * thr[k] / means[k];
        lane.mapv_inplace(|v| (v - cut).max(0.0));
    }
    out
}

/// Outlier image `max(I - max(I)·thr/av, 0)`; a channel with `thr = 0` or
/// a vanishing mean is all zeros.
pub fn outlier_image(img: &ImageTensor, thr: &[f64; CHANNELS]) -> ImageTensor {
    let stats = channel_stats(img);
    outlier_from_stats(img, &stats.max, &stats.mean, thr)
}

/// Computes the attention map of `img`.
pub fn attention_map(img: &ImageTensor) -> AttentionMap {
    let stats = channel_stats(img);
    let means = stats.mean;
    let global_mean = means.iter().sum::<f64>() / CHANNELS as f64;
    let thr = threshold_from_stats(&stats);
    let gr = reinforcement_from_means(&means, &thr);
    let i_x = outlier_from_stats(img, &stats.max, &means, &thr);

    let mut i_a = i_x.clone();
    for (k, mut lane) in i_a.data_mut().axis_iter_mut(Axis(2)).enumerate() {
        let gain = gr[k] * (means[k] - global_mean).abs();
        Zip::from(&mut lane).and(img.channel(k)).for_each(|a, &v| *a = gain * *a / v.max(EPSILON));
    }
    let i_at = stretch_histogram(&i_a, &channel_stats(&i_a));
    AttentionMap { i_at, thr, gr, i_x, i_a }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn threshold_examples() {
        // mean 0.5, median 0.4
        let img = ImageTensor::from_fn(1, 3, |_, x, _| [0.3, 0.4, 0.8][x]);
        assert_abs_diff_eq!(outlier_threshold(&img)[0], 0.1, epsilon = 1e-12);
        let sym = ImageTensor::from_fn(1, 3, |_, x, _| [0.2, 0.4, 0.6][x]);
        assert_eq!(outlier_threshold(&sym)[1], 0.0);
        // mean 0.4 < median 0.5
        let skew = ImageTensor::from_fn(1, 3, |_, x, _| [0.1, 0.5, 0.6][x]);
        assert_eq!(outlier_threshold(&skew)[2], 0.0);
    }

    #[test]
    fn reinforcement_examples() {
        let img = ImageTensor::filled(2, 2, [0.5; 3]);
        let gr = reinforcement_factor(&img, &[0.1, 0.0, 0.25]);
        assert_abs_diff_eq!(gr[0], 1.2, epsilon = 1e-12);
        assert_eq!(gr[1], 1.0);
        assert_abs_diff_eq!(gr[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn outlier_examples() {
        // channel max 1.0, mean 0.5; thr 0.1 gives thr/av = 0.2
        let img = ImageTensor::from_fn(1, 4, |_, x, _| [0.9, 0.1, 1.0, 0.0][x]);
        let ix = outlier_image(&img, &[0.1, 0.1, 0.0]);
        assert_abs_diff_eq!(ix.get(0, 0, 0), 0.7, epsilon = 1e-12);
        assert_eq!(ix.get(0, 1, 0), 0.0);
        assert!(ix.channel(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn balanced_image_has_no_attention() {
        let img = ImageTensor::from_fn(8, 8, |y, x, _| if (y, x) == (2, 3) { 0.95 } else { 0.2 + 0.01 * x as f64 });
        let map = attention_map(&img);
        assert!(map.i_at.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_image_has_no_attention() {
        let img = ImageTensor::from_fn(4, 4, |y, x, k| [0.2, 0.4, 0.6][k] + if (y + x) % 2 == 0 { 0.1 } else { -0.1 });
        let map = attention_map(&img);
        assert_eq!(map.thr, [0.0; 3]);
        assert!(map.i_at.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bright_patch_is_localized() {
        let img = ImageTensor::from_fn(64, 64, |y, x, k| if k == 0 && (20..28).contains(&y) && (30..38).contains(&x) { 0.95 } else { 0.3 });
        let map = attention_map(&img);
        let (mut inside, mut outside) = ((0.0, 0), (0.0, 0));
        for ((y, x, _), &v) in map.i_at.data().indexed_iter() {
            if (20..28).contains(&y) && (30..38).contains(&x) {
                inside = (inside.0 + v, inside.1 + 1);
            } else {
                outside = (outside.0 + v, outside.1 + 1);
            }
        }
        let (inside, outside) = (inside.0 / inside.1 as f64, outside.0 / outside.1 as f64);
        assert!(inside > 5.0 * outside, "inside {inside} outside {outside}");
        assert!(map.gr.iter().all(|&g| g >= 1.0));
    }
}
