//! Color conversions used by the metrics: Rec.601 luma and sRGB → CIELAB (D65).

use ndarray::Array2;

use crate::ImageTensor;

/// Rec.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

pub fn luma(img: &ImageTensor) -> Array2<f64> {
    let (h, w) = img.dims();
    Array2::from_shape_fn((h, w), |(y, x)| {
        LUMA_WEIGHTS[0] * img.get(y, x, 0) + LUMA_WEIGHTS[1] * img.get(y, x, 1) + LUMA_WEIGHTS[2] * img.get(y, x, 2)
    })
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

const RGB_TO_XYZ: [[f64; 3]; 3] =
    [[0.412_456_4, 0.357_576_1, 0.180_437_5], [0.212_672_9, 0.715_152_2, 0.072_175_0], [0.019_333_9, 0.119_192_0, 0.950_304_1]];

/// Row sums of the conversion matrix, so that neutral grays get `a = b = 0`.
fn matrix_white() -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row.iter().sum())
}

/// Converts one sRGB triple in `[0, 1]` to CIELAB `(L, a, b)` with `L ∈ [0, 100]`.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let white = matrix_white();
    let [fx, fy, fz]: [f64; 3] = std::array::from_fn(|i| {
        let v = RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2];
        lab_f(v / white[i])
    });
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Lab triples of every pixel in row-major order.
pub fn lab_pixels(img: &ImageTensor) -> Vec<[f64; 3]> {
    let (h, w) = img.dims();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(srgb_to_lab([img.get(y, x, 0), img.get(y, x, 1), img.get(y, x, 2)]));
        }
    }
    out
}

/// CIEDE2000 color difference with unit weighting factors (`kL = kC = kH = 1`).
pub fn delta_e_2000(lab1: [f64; 3], lab2: [f64; 3]) -> f64 {
    use std::f64::consts::PI;
    let deg = PI / 180.0;
    let [l1, a1, b1] = lab1;
    let [l2, a2, b2] = lab2;

    let c1 = a1.hypot(b1);
    let c2 = a2.hypot(b2);
    let c_bar = 0.5 * (c1 + c2);
    let c_bar7 = c_bar.powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + 25f64.powi(7))).sqrt());
    let a1p = (1.0 + g) * a1;
    let a2p = (1.0 + g) * a2;
    let c1p = a1p.hypot(b1);
    let c2p = a2p.hypot(b2);

    let hue = |b: f64, a: f64| {
        if a == 0.0 && b == 0.0 {
            0.0
        } else {
            let h = b.atan2(a) / deg;
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(b1, a1p);
    let h2p = hue(b2, a2p);

    let dl = l2 - l1;
    let dc = c2p - c1p;
    let dh = if c1p * c2p == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh_big = 2.0 * (c1p * c2p).sqrt() * (0.5 * dh * deg).sin();

    let l_bar = 0.5 * (l1 + l2);
    let cp_bar = 0.5 * (c1p + c2p);
    let hp_bar = if c1p * c2p == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * ((hp_bar - 30.0) * deg).cos() + 0.24 * (2.0 * hp_bar * deg).cos() + 0.32 * ((3.0 * hp_bar + 6.0) * deg).cos()
        - 0.20 * ((4.0 * hp_bar - 63.0) * deg).cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let cp_bar7 = cp_bar.powi(7);
    let r_c = 2.0 * (cp_bar7 / (cp_bar7 + 25f64.powi(7))).sqrt();
    let l50 = (l_bar - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * cp_bar;
    let s_h = 1.0 + 0.015 * cp_bar * t;
    let r_t = -(2.0 * d_theta * deg).sin() * r_c;

    let (tl, tc, th) = (dl / s_l, dc / s_c, dh_big / s_h);
    (tl * tl + tc * tc + th * th + r_t * tc * th).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black() {
        let w = srgb_to_lab([1.0; 3]);
        assert!((w[0] - 100.0).abs() < 1e-9 && w[1].abs() < 1e-12 && w[2].abs() < 1e-12, "{w:?}");
        let k = srgb_to_lab([0.0; 3]);
        assert!(k.iter().all(|v| v.abs() < 1e-12), "{k:?}");
    }

    #[test]
    fn grays_are_neutral() {
        for g in [0.01, 0.2, 0.5, 0.93] {
            let lab = srgb_to_lab([g; 3]);
            assert!(lab[1].abs() < 1e-12 && lab[2].abs() < 1e-12, "{lab:?}");
        }
    }

    #[test]
    fn gray_pair_uses_lightness_only() {
        // a = b = 0: ΔE00 = |ΔL| / S_L with L̄ = 52.5
        let l50 = 2.5f64 * 2.5;
        let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
        let d = delta_e_2000([50.0, 0.0, 0.0], [55.0, 0.0, 0.0]);
        assert!((d - 5.0 / s_l).abs() < 1e-12);
    }
}
