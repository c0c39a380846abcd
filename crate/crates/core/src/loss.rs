//! Scene-radiance and image-radiance loss.
//!
//! An image decomposes into a scene component `C_J = I - C_P` and an ambient
//! component `C_P = Λ·(1 - exp(-gb))`. Training compares the input `I` with
//! the degraded network output `Î*` on both the full image and the scene
//! component:
//!
//! ```text
//! L = c1·MSE(C_J, Ĉ_J*) + c2·MSE(I, Î*) + L1(params)
//! ```
//!
//! `Ĉ_J*` uses parameters estimated from `Î*` itself. For the gradient the
//! per-channel order statistics of `Î*` are treated as constants.

use ndarray::Zip;

use crate::degradation::{gb_map, range_factor, DegradationBundle};
use crate::image::channel_stats;
use crate::{ChannelStats, ImageTensor, Result, CHANNELS};

pub const DEFAULT_C1: f64 = 0.65;
pub const DEFAULT_C2: f64 = 0.35;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_sc: f64,
    pub l_im: f64,
    pub l1_penalty: f64,
    pub total: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Combines the loss terms: `total = c1·l_sc + c2·l_im + l1`.
pub fn total_loss(l_sc: f64, l_im: f64, l1: f64, c1: f64, c2: f64) -> LossBreakdown {
    LossBreakdown { l_sc, l_im, l1_penalty: l1, total: c1 * l_sc + c2 * l_im + l1, c1, c2 }
}

impl LossBreakdown {
    /// Mean of several breakdowns, accumulated in slice order.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        let (c1, c2) = (items[0].c1, items[0].c2);
        let l_sc = sum(|b| b.l_sc);
        let l_im = sum(|b| b.l_im);
        let l1 = sum(|b| b.l1_penalty);
        total_loss(l_sc, l_im, l1, c1, c2)
    }
}

fn ambient_from_gb(gb: &ImageTensor, lambda: &[f64; CHANNELS]) -> ImageTensor {
    let mut out = gb.clone();
    for ((_, _, k), v) in out.data_mut().indexed_iter_mut() {
        *v = lambda[k] * (1.0 - (-*v).exp());
    }
    out
}

/// Ambient-light component `C_P = Λ·(1 - exp(-gb))`.
pub fn ambient_component(img: &ImageTensor, bundle: &DegradationBundle) -> Result<ImageTensor> {
    img.ensure_same_dims(&bundle.gb)?;
    Ok(ambient_from_gb(&bundle.gb, &bundle.lambda))
}

/// Scene component `C_J = I - C_P`.
pub fn scene_component(img: &ImageTensor, c_p: &ImageTensor) -> Result<ImageTensor> {
    img.zip_map(c_p, |i, p| i - p)
}

/// Scene component of an image under its own estimated parameters.
pub fn scene_component_of(img: &ImageTensor) -> ImageTensor {
    scene_component_with_stats(img, &channel_stats(img))
}

fn scene_component_with_stats(img: &ImageTensor, stats: &ChannelStats) -> ImageTensor {
    let gb = gb_map(img, stats, stats.median);
    let c_p = ambient_from_gb(&gb, &stats.median);
    scene_component(img, &c_p).expect("same dims")
}

/// Mean squared error over all pixels and channels.
pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mut sum = 0.0;
    Zip::from(a.data()).and(b.data()).for_each(|&x, &y| sum += (x - y) * (x - y));
    Ok(sum / a.data().len() as f64)
}

pub fn scene_loss(c_j: &ImageTensor, c_j_star: &ImageTensor) -> Result<f64> {
    mse(c_j, c_j_star)
}

pub fn image_loss(img: &ImageTensor, degraded_out: &ImageTensor) -> Result<f64> {
    mse(img, degraded_out)
}

/// Per-input reference terms: the image and its scene component.
#[derive(Clone, Debug)]
pub struct LossTarget {
    pub image: ImageTensor,
    pub scene: ImageTensor,
}

impl LossTarget {
    pub fn new(image: ImageTensor) -> Self {
        let scene = scene_component_of(&image);
        Self { image, scene }
    }
}

/// Loss terms for one image and the gradient of `c1·l_sc + c2·l_im` with
/// respect to the degraded output `Î*`.
#[derive(Clone, Debug)]
pub struct LossEvaluation {
    pub l_sc: f64,
    pub l_im: f64,
    pub grad: ImageTensor,
}

/// Weighted radiance loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadianceLoss {
    pub c1: f64,
    pub c2: f64,
}

impl Default for RadianceLoss {
    fn default() -> Self {
        Self { c1: DEFAULT_C1, c2: DEFAULT_C2 }
    }
}

impl RadianceLoss {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self { c1, c2 }
    }

    /// Evaluates the loss with parameters of `Ĉ_J*` estimated from `degraded`.
    pub fn evaluate(&self, target: &LossTarget, degraded: &ImageTensor) -> Result<LossEvaluation> {
        self.evaluate_with_stats(target, degraded, &channel_stats(degraded))
    }

    /// Evaluates the loss with the statistics of `degraded` held fixed at `stats`.
    pub fn evaluate_with_stats(&self, target: &LossTarget, degraded: &ImageTensor, stats: &ChannelStats) -> Result<LossEvaluation> {
        target.image.ensure_same_dims(degraded)?;
        let scene_star = scene_component_with_stats(degraded, stats);
        let l_sc = scene_loss(&target.scene, &scene_star)?;
        let l_im = image_loss(&target.image, degraded)?;

        let n = degraded.data().len() as f64;
        let (w_sc, w_im) = (2.0 * self.c1 / n, 2.0 * self.c2 / n);
        let slope: [f64; CHANNELS] =
            std::array::from_fn(|k| range_factor(stats.bw[k]).map_or(0.0, |f| f * (stats.median[k] - stats.min[k])));
        let mut grad = degraded.clone();
        for ((y, x, k), g) in grad.data_mut().indexed_iter_mut() {
            let v = *g;
            let lambda = stats.median[k];
            let gb = slope[k] * (stats.max[k] - v);
            // d(Ĉ_J*)/d(Î*) = 1 - dC_P/dgb · s = 1 + Λ·exp(-gb)·s
            let d_scene = 1.0 + lambda * (-gb).exp() * slope[k];
            let scene_diff = scene_star.get(y, x, k) - target.scene.get(y, x, k);
            let image_diff = v - target.image.get(y, x, k);
            *g = w_sc * scene_diff * d_scene + w_im * image_diff;
        }
        Ok(LossEvaluation { l_sc, l_im, grad })
    }
}
