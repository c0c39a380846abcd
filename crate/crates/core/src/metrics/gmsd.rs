//! Gradient magnitude similarity deviation.
//!
//! Prewitt gradients (scaled by 1/3) of the Rec.601 luma of both images are
//! compared pixel by pixel with `(2·ga·gb + c) / (ga² + gb² + c)`; the score
//! is the population standard deviation of that similarity map over the
//! interior pixels (one-pixel border excluded).

use ndarray::{Array2, Zip};

use super::color::luma;
use crate::{Error, ImageTensor, Result};

/// Stabilizing constant for intensities in `[0, 1]`.
pub const GMSD_C: f64 = 0.0026;

pub(crate) fn prewitt_magnitude(x: &Array2<f64>) -> Array2<f64> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h - 2, w - 2), |(y, xo)| {
        let (y, xc) = (y + 1, xo + 1);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for d in 0..3 {
            gx += x[[y + d - 1, xc - 1]] - x[[y + d - 1, xc + 1]];
            gy += x[[y - 1, xc + d - 1]] - x[[y + 1, xc + d - 1]];
        }
        (gx * gx + gy * gy).sqrt() / 3.0
    })
}

pub fn gmsd(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (h, w) = a.dims();
    if h < 3 || w < 3 {
        return Err(Error::InvalidDimensions(format!("GMSD needs at least 3x3 pixels, got {h}x{w}")));
    }
    let ga = prewitt_magnitude(&luma(a));
    let gb = prewitt_magnitude(&luma(b));
    let map = Zip::from(&ga).and(&gb).map_collect(|&p, &q| (2.0 * p * q + GMSD_C) / (p * p + q * q + GMSD_C));
    let mean = map.mean().expect("non-empty map");
    let var = map.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / map.len() as f64;
    Ok(var.sqrt())
}
