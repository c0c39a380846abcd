//! Scalar per-pixel reference implementations shared by the integration tests.
//!
//! Everything here works on a flat `Vec<f64>` in (y, x, channel) order and
//! deliberately avoids the library's helpers.

#![allow(dead_code)]

use aquamend::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Px {
    pub h: usize,
    pub w: usize,
    pub v: Vec<f64>,
}

impl Px {
    pub fn from_tensor(t: &ImageTensor) -> Self {
        let (h, w) = t.dims();
        let mut v = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                for k in 0..3 {
                    v.push(t.get(y, x, k));
                }
            }
        }
        Px { h, w, v }
    }

    pub fn at(&self, y: usize, x: usize, k: usize) -> f64 {
        self.v[(y * self.w + x) * 3 + k]
    }

    pub fn n(&self) -> usize {
        self.h * self.w
    }

    pub fn chan(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.v[i * 3 + k]).collect()
    }

    pub fn map_k(&self, f: impl Fn(f64, usize, usize) -> f64) -> Px {
        let v = self.v.iter().enumerate().map(|(i, &p)| f(p, i % 3, i / 3)).collect();
        Px { h: self.h, w: self.w, v }
    }
}

pub fn max_abs_diff(a: &Px, t: &ImageTensor) -> f64 {
    let b = Px::from_tensor(t);
    assert_eq!((a.h, a.w), (b.h, b.w));
    a.v.iter().zip(&b.v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct St {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
}

pub fn stats(c: &[f64]) -> St {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in c {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
        sum += v;
    }
    let mut s = c.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len();
    let median = if m % 2 == 1 { s[m / 2] } else { (s[m / 2 - 1] + s[m / 2]) / 2.0 };
    St { min, max, median, mean: sum / m as f64 }
}

pub fn all_stats(p: &Px) -> [St; 3] {
    [stats(&p.chan(0)), stats(&p.chan(1)), stats(&p.chan(2))]
}

/// Dynamic range per channel.
pub fn bw(p: &Px) -> [f64; 3] {
    let s = all_stats(p);
    [s[0].max - s[0].min, s[1].max - s[1].min, s[2].max - s[2].min]
}

fn factor(s: &St) -> f64 {
    let bw = s.max - s.min;
    if bw < EPS {
        0.0
    } else {
        (1.0 - bw) / bw
    }
}

pub fn gd(p: &Px) -> Px {
    let s = all_stats(p);
    p.map_k(|v, k, _| factor(&s[k]) * (s[k].max - v) * (v - s[k].min))
}

pub fn gb(p: &Px) -> Px {
    let s = all_stats(p);
    p.map_k(|v, k, _| factor(&s[k]) * (s[k].max - v) * (s[k].median - s[k].min))
}

pub fn lambda(p: &Px) -> [f64; 3] {
    let s = all_stats(p);
    [s[0].median, s[1].median, s[2].median]
}

pub fn degrade_once(p: &Px) -> Px {
    let g_d = gd(p);
    let g_b = gb(p);
    let l = lambda(p);
    p.map_k(|v, k, i| v * (-g_d.v[i * 3 + k]).exp() + (1.0 - (-g_b.v[i * 3 + k]).exp()) * l[k])
}

pub fn degrade_twice(p: &Px) -> Px {
    degrade_once(&degrade_once(p))
}

pub fn stretch(p: &Px) -> Px {
    let s = all_stats(p);
    p.map_k(|v, k, _| {
        let bw = s[k].max - s[k].min;
        if bw < EPS {
            0.0
        } else {
            (v - s[k].min) / bw
        }
    })
}

pub fn ambient(p: &Px) -> Px {
    let g_b = gb(p);
    let l = lambda(p);
    p.map_k(|_, k, i| l[k] * (1.0 - (-g_b.v[i * 3 + k]).exp()))
}

pub fn scene(p: &Px) -> Px {
    let c_p = ambient(p);
    p.map_k(|v, k, i| v - c_p.v[i * 3 + k])
}

pub fn mse(a: &Px, b: &Px) -> f64 {
    let mut s = 0.0;
    for i in 0..a.v.len() {
        s += (a.v[i] - b.v[i]).powi(2);
    }
    s / a.v.len() as f64
}

pub fn degradation_function(out: &Px, star: &Px, c: &Px, at: Option<&Px>) -> Px {
    out.map_k(|v, k, i| {
        let j = i * 3 + k;
        v + star.v[j] - c.v[j] + at.map_or(0.0, |a| a.v[j])
    })
}

/// (l_sc, l_im, c1·l_sc + c2·l_im) for input `img` and degraded output `deg`.
pub fn loss(img: &Px, deg: &Px, c1: f64, c2: f64) -> (f64, f64, f64) {
    let l_sc = mse(&scene(img), &scene(deg));
    let l_im = mse(img, deg);
    (l_sc, l_im, c1 * l_sc + c2 * l_im)
}

pub fn thr(p: &Px) -> [f64; 3] {
    let s = all_stats(p);
    std::array::from_fn(|k| {
        let d = s[k].mean - s[k].median;
        if d >= 0.0 {
            d
        } else {
            0.0
        }
    })
}

pub fn gr(p: &Px) -> [f64; 3] {
    let s = all_stats(p);
    let t = thr(p);
    std::array::from_fn(|k| 1.0 + t[k] / s[k].mean)
}

pub fn outlier(p: &Px) -> Px {
    let s = all_stats(p);
    let t = thr(p);
    p.map_k(|v, k, _| {
        if t[k] == 0.0 || s[k].mean < EPS {
            return 0.0;
        }
        let x = v - s[k].max * t[k] / s[k].mean;
        if x >= 0.0 {
            x
        } else {
            0.0
        }
    })
}

pub fn attention_raw(p: &Px) -> Px {
    let s = all_stats(p);
    let global = (s[0].mean + s[1].mean + s[2].mean) / 3.0;
    let g = gr(p);
    let x = outlier(p);
    p.map_k(|v, k, i| g[k] * (s[k].mean - global).abs() * x.v[i * 3 + k] / v.max(EPS))
}

pub fn attention(p: &Px) -> Px {
    stretch(&attention_raw(p))
}

/// Half uniform noise, half rendered underwater scenes.
pub fn mixed_corpus(seed: u64, count: usize, h: usize, w: usize) -> Vec<ImageTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                let mut img = ImageTensor::zeros(h, w);
                img.data_mut().iter_mut().for_each(|v| *v = rng.random());
                img
            } else {
                aquamend::synthetic::underwater_image(seed.wrapping_add(i as u64), h, w)
            }
        })
        .collect()
}

/// Random image with values in `[0, 1]` and sides in `1..=max_side`.
pub fn arb_image(max_side: usize) -> impl proptest::strategy::Strategy<Value = ImageTensor> {
    use proptest::prelude::*;
    (1..=max_side, 1..=max_side).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0.0f64..=1.0, h * w * 3).prop_map(move |v| ImageTensor::from_fn(h, w, |y, x, k| v[(y * w + x) * 3 + k]))
    })
}

/// Random image quantized to 8-bit levels, so ties and repeated values are common.
pub fn arb_image_u8(max_side: usize) -> impl proptest::strategy::Strategy<Value = ImageTensor> {
    use proptest::prelude::*;
    (1..=max_side, 1..=max_side).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0u8..=255, h * w * 3)
            .prop_map(move |v| ImageTensor::from_fn(h, w, |y, x, k| v[(y * w + x) * 3 + k] as f64 / 255.0))
    })
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageTensor {
    let mut img = ImageTensor::zeros(h, w);
    img.data_mut().iter_mut().for_each(|v| *v = rng.random());
    img
}
