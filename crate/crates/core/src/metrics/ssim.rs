//! Structural similarity on Rec.601 luma.
//!
//! Gaussian window of 11×11 samples with σ = 1.5, `K1 = 0.01`, `K2 = 0.03`
//! and a dynamic range of 1. Only windows fully inside the image are used.

use ndarray::{Array2, Zip};

use super::color::luma;
use crate::{Error, ImageTensor, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable "valid" filtering with the same taps along both axes.
fn filter_valid(x: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = x.dim();
    let n = taps.len();
    let rows: Array2<f64> =
        Array2::from_shape_fn((h, w - n + 1), |(y, xo)| taps.iter().enumerate().map(|(i, t)| t * x[[y, xo + i]]).sum::<f64>());
    Array2::from_shape_fn((h - n + 1, w - n + 1), |(yo, xo)| taps.iter().enumerate().map(|(i, t)| t * rows[[yo + i, xo]]).sum())
}

pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidDimensions(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}")));
    }
    Ok(ssim_gray(&luma(a), &luma(b)))
}

pub(crate) fn ssim_gray(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mu_x = filter_valid(x, &taps);
    let mu_y = filter_valid(y, &taps);
    let xx = filter_valid(&(x * x), &taps);
    let yy = filter_valid(&(y * y), &taps);
    let xy = filter_valid(&(x * y), &taps);
    let map = Zip::from(&mu_x).and(&mu_y).and(&xx).and(&yy).and(&xy).map_collect(|&mx, &my, &sxx, &syy, &sxy| {
        let vx = sxx - mx * mx;
        let vy = syy - my * my;
        let cov = sxy - mx * my;
        ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    });
    map.mean().expect("non-empty SSIM map")
}
