//! Procedural underwater test imagery.
//!
//! A random clean scene (graded background, colored shapes, texture) is
//! rendered through the physical formation model
//! `I = J·exp(-β·d) + B·(1 - exp(-β·d))` with per-channel attenuation `β`,
//! background light `B` and a depth map `d`. Everything is seeded and
//! reproducible.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ImageTensor;

/// Water column parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Water {
    /// Per-channel attenuation per unit depth.
    pub attenuation: [f64; 3],
    /// Background (veiling) light.
    pub backlight: [f64; 3],
}

impl Water {
    /// A random bluish/greenish water type scaled by `turbidity`.
    pub fn random(rng: &mut impl Rng, turbidity: f64) -> Self {
        let green = rng.random_bool(0.4);
        let attenuation = [rng.random_range(0.45..0.75), rng.random_range(0.12..0.25), rng.random_range(0.10..0.22)].map(|b| b * turbidity);
        let backlight = if green {
            [rng.random_range(0.05..0.2), rng.random_range(0.5..0.7), rng.random_range(0.35..0.5)]
        } else {
            [rng.random_range(0.03..0.15), rng.random_range(0.35..0.5), rng.random_range(0.55..0.75)]
        };
        Self { attenuation, backlight }
    }

    /// Milky, nearly neutral water.
    pub fn milky(turbidity: f64) -> Self {
        Self { attenuation: [0.30, 0.27, 0.25].map(|b| b * turbidity), backlight: [0.62, 0.64, 0.60] }
    }
}

/// A clean, well-exposed scene with full-range colors.
pub fn clean_scene(seed: u64, height: usize, width: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.5..0.95));
    let bottom: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.6));
    let mut img = ImageTensor::from_fn(height, width, |y, _, k| {
        let t = y as f64 / (height.max(2) - 1) as f64;
        top[k] * (1.0 - t) + bottom[k] * t
    });

    let shapes = rng.random_range(5..12);
    for _ in 0..shapes {
        let color: [f64; 3] =
            std::array::from_fn(|_| if rng.random_bool(0.5) { rng.random_range(0.0..0.25) } else { rng.random_range(0.6..1.0) });
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let ry = rng.random_range(0.06..0.3) * height as f64;
        let rx = rng.random_range(0.06..0.3) * width as f64;
        let ellipse = rng.random_bool(0.6);
        let freq = rng.random_range(0.2..1.2);
        for y in 0..height {
            for x in 0..width {
                let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                let inside = if ellipse { dy * dy + dx * dx <= 1.0 } else { dy.abs() <= 1.0 && dx.abs() <= 1.0 };
                if inside {
                    let texture = 0.12 * ((x as f64 * freq).sin() * (y as f64 * freq * 0.7).cos());
                    for (k, c) in color.iter().enumerate() {
                        img.set(y, x, k, (c + texture).clamp(0.0, 1.0));
                    }
                }
            }
        }
    }
    for v in img.data_mut().iter_mut() {
        *v = (*v + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
    }
    img
}

/// Depth increasing towards the top of the frame, from `near` to `far`.
pub fn depth_map(height: usize, width: usize, near: f64, far: f64) -> Array2<f64> {
    Array2::from_shape_fn((height, width), |(y, _)| {
        let t = 1.0 - y as f64 / (height.max(2) - 1) as f64;
        near + (far - near) * t
    })
}

/// Renders `scene` through the water column.
pub fn render(scene: &ImageTensor, depth: &Array2<f64>, water: &Water) -> ImageTensor {
    ImageTensor::from_fn(scene.height(), scene.width(), |y, x, k| {
        let t = (-water.attenuation[k] * depth[[y, x]]).exp();
        (scene.get(y, x, k) * t + water.backlight[k] * (1.0 - t)).clamp(0.0, 1.0)
    })
}

/// One random underwater image.
pub fn underwater_image(seed: u64, height: usize, width: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let scene = clean_scene(seed, height, width);
    let turbidity = rng.random_range(0.8..2.2);
    let water = Water::random(&mut rng, turbidity);
    let depth = depth_map(height, width, rng.random_range(0.5..1.5), rng.random_range(2.5..5.0));
    render(&scene, &depth, &water)
}

/// `count` independent underwater images.
pub fn corpus(seed: u64, count: usize, height: usize, width: usize) -> Vec<ImageTensor> {
    (0..count as u64).map(|i| underwater_image(seed.wrapping_mul(1_000_003).wrapping_add(i), height, width)).collect()
}

/// One scene under progressively stronger milky turbidity.
pub fn turbidity_series(seed: u64, count: usize, height: usize, width: usize) -> Vec<ImageTensor> {
    let scene = clean_scene(seed, height, width);
    let depth = depth_map(height, width, 1.0, 1.0);
    (0..count).map(|i| render(&scene, &depth, &Water::milky(0.1 + 0.25 * i as f64))).collect()
}
