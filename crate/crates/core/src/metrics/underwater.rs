//! No-reference underwater quality scores.
//!
//! UCIQE (Yang & Sowmya, 2015) combines chroma spread, luminance contrast and
//! mean saturation in CIELAB. UIQM (Panetta, Gao & Agaian, 2016) combines an
//! opponent-color colorfulness term, an edge-based sharpness term and a
//! logAMEE contrast term. The linear weights below are the ones published
//! with each metric.

use ndarray::{s, Array2, ArrayView2};

use super::color::lab_pixels;
use crate::ImageTensor;

pub const UCIQE_WEIGHTS: [f64; 3] = [0.4680, 0.2745, 0.2576];
pub const UIQM_WEIGHTS: [f64; 3] = [0.0282, 0.2953, 3.5753];

/// Fraction of samples trimmed from each end for the UICM statistics.
pub const UICM_TRIM: f64 = 0.1;

/// Block edge length for the EME and logAMEE measures.
pub const UIQM_BLOCK: usize = 8;

/// Percentile used for the UCIQE luminance contrast (top and bottom 1%).
pub const UCIQE_CONTRAST_PERCENTILE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UciqeComponents {
    /// Standard deviation of chroma (CIELAB units / 100).
    pub chroma_std: f64,
    /// Top-1% minus bottom-1% lightness (L / 100).
    pub luminance_contrast: f64,
    /// Mean of `C / sqrt(C² + L²)`.
    pub mean_saturation: f64,
    pub score: f64,
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub fn uciqe_components(img: &ImageTensor) -> UciqeComponents {
    let lab = lab_pixels(img);
    let n = lab.len() as f64;
    let chroma: Vec<f64> = lab.iter().map(|p| p[1].hypot(p[2]) / 100.0).collect();
    let mean_c = chroma.iter().sum::<f64>() / n;
    let chroma_std = (chroma.iter().map(|c| (c - mean_c).powi(2)).sum::<f64>() / n).sqrt();

    let mut lightness: Vec<f64> = lab.iter().map(|p| p[0] / 100.0).collect();
    lightness.sort_unstable_by(f64::total_cmp);
    let luminance_contrast = quantile(&lightness, 1.0 - UCIQE_CONTRAST_PERCENTILE) - quantile(&lightness, UCIQE_CONTRAST_PERCENTILE);

    let mean_saturation = lab
        .iter()
        .map(|p| {
            let c = p[1].hypot(p[2]);
            let norm = c.hypot(p[0]);
            if norm > 0.0 {
                c / norm
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n;

    let score = UCIQE_WEIGHTS[0] * chroma_std + UCIQE_WEIGHTS[1] * luminance_contrast + UCIQE_WEIGHTS[2] * mean_saturation;
    UciqeComponents { chroma_std, luminance_contrast, mean_saturation, score }
}

pub fn uciqe(img: &ImageTensor) -> f64 {
    uciqe_components(img).score
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UiqmComponents {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
    pub score: f64,
}

/// Asymmetric alpha-trimmed mean and the (untrimmed) variance about it.
fn trimmed_stats(mut values: Vec<f64>) -> (f64, f64) {
    let k = values.len();
    values.sort_unstable_by(f64::total_cmp);
    let low = (UICM_TRIM * k as f64).ceil() as usize;
    let high = (UICM_TRIM * k as f64).floor() as usize;
    let kept = &values[low.min(k)..k.saturating_sub(high).max(low.min(k))];
    let mean = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
    (mean, var)
}

fn channel_255(img: &ImageTensor, k: usize) -> Array2<f64> {
    img.channel(k).mapv(|v| v * 255.0)
}

/// Colorfulness from the RG and YB opponent channels.
pub fn uicm(img: &ImageTensor) -> f64 {
    let (r, g, b) = (channel_255(img, 0), channel_255(img, 1), channel_255(img, 2));
    let rg: Vec<f64> = r.iter().zip(g.iter()).map(|(r, g)| r - g).collect();
    let yb: Vec<f64> = r.iter().zip(g.iter()).zip(b.iter()).map(|((r, g), b)| 0.5 * (r + g) - b).collect();
    let (mu_rg, var_rg) = trimmed_stats(rg);
    let (mu_yb, var_yb) = trimmed_stats(yb);
    -0.0268 * mu_rg.hypot(mu_yb) + 0.1586 * (var_rg + var_yb).sqrt()
}

/// Sobel gradient magnitude with replicated borders.
pub(crate) fn sobel_magnitude(x: ArrayView2<f64>) -> Array2<f64> {
    let (h, w) = x.dim();
    let at = |y: isize, xx: isize| x[[y.clamp(0, h as isize - 1) as usize, xx.clamp(0, w as isize - 1) as usize]];
    Array2::from_shape_fn((h, w), |(y, xx)| {
        let (y, xx) = (y as isize, xx as isize);
        let gx =
            (at(y - 1, xx + 1) + 2.0 * at(y, xx + 1) + at(y + 1, xx + 1)) - (at(y - 1, xx - 1) + 2.0 * at(y, xx - 1) + at(y + 1, xx - 1));
        let gy =
            (at(y + 1, xx - 1) + 2.0 * at(y + 1, xx) + at(y + 1, xx + 1)) - (at(y - 1, xx - 1) + 2.0 * at(y - 1, xx) + at(y - 1, xx + 1));
        gx.hypot(gy)
    })
}

/// Block grid `(rows, cols)` of `UIQM_BLOCK`-sized tiles; partial tiles are dropped.
fn blocks(h: usize, w: usize) -> (usize, usize) {
    (h / UIQM_BLOCK, w / UIQM_BLOCK)
}

/// Measure of enhancement: `2/(k1·k2) Σ log(max/min)` over blocks with nonzero extremes.
pub(crate) fn eme(x: &Array2<f64>) -> f64 {
    let (rows, cols) = blocks(x.nrows(), x.ncols());
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for by in 0..rows {
        for bx in 0..cols {
            let block = x.slice(s![by * UIQM_BLOCK..(by + 1) * UIQM_BLOCK, bx * UIQM_BLOCK..(bx + 1) * UIQM_BLOCK]);
            let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = block.iter().copied().fold(f64::INFINITY, f64::min);
            if min > 0.0 && max > 0.0 {
                sum += (max / min).ln();
            }
        }
    }
    2.0 * sum / (rows * cols) as f64
}

/// Sharpness: luma-weighted EME of each channel's edge map (Sobel magnitude × channel).
pub fn uism(img: &ImageTensor) -> f64 {
    const LAMBDA: [f64; 3] = [0.299, 0.587, 0.114];
    (0..3)
        .map(|k| {
            let c = channel_255(img, k);
            let edges = sobel_magnitude(c.view()) * &c;
            LAMBDA[k] * eme(&edges)
        })
        .sum()
}

/// Contrast: logAMEE over blocks spanning all three channels.
pub fn uiconm(img: &ImageTensor) -> f64 {
    let (h, w) = img.dims();
    let (rows, cols) = blocks(h, w);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let data = img.data();
    let mut sum = 0.0;
    for by in 0..rows {
        for bx in 0..cols {
            let block = data.slice(s![by * UIQM_BLOCK..(by + 1) * UIQM_BLOCK, bx * UIQM_BLOCK..(bx + 1) * UIQM_BLOCK, ..]);
            let max = 255.0 * block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = 255.0 * block.iter().copied().fold(f64::INFINITY, f64::min);
            let (top, bottom) = (max - min, max + min);
            if top > 0.0 && bottom > 0.0 {
                let r = top / bottom;
                sum += r * r.ln();
            }
        }
    }
    -sum / (rows * cols) as f64
}

pub fn uiqm_components(img: &ImageTensor) -> UiqmComponents {
    let (uicm, uism, uiconm) = (uicm(img), uism(img), uiconm(img));
    let score = UIQM_WEIGHTS[0] * uicm + UIQM_WEIGHTS[1] * uism + UIQM_WEIGHTS[2] * uiconm;
    UiqmComponents { uicm, uism, uiconm, score }
}

pub fn uiqm(img: &ImageTensor) -> f64 {
    uiqm_components(img).score
}
