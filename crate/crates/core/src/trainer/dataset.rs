use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attention::attention_map;
use crate::degradation::DegradationImages;
use crate::image::resize_bilinear;
use crate::loss::LossTarget;
use crate::{Error, ImageTensor, Result};

pub const DEFAULT_FOLDS: usize = 5;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// PNG/JPEG files directly inside `dir`, sorted lexicographically.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        let is_image =
            path.extension().and_then(|e| e.to_str()).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Seeded shuffle followed by a `ceil(n·fraction)` / remainder split.
/// Both parts are nonempty.
pub fn split_dataset<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() < 2 {
        return Err(Error::EmptyDataset(format!("need at least 2 images to split, got {}", items.len())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = items.len();
    // tolerance keeps e.g. 2200 × 0.9 at 1980
    let train = ((n as f64 * fraction - 1e-9).ceil() as usize).clamp(1, n - 1);
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let holdout = shuffled.split_off(train);
    Ok((shuffled, holdout))
}

/// `k` disjoint validation folds over `0..n` after a seeded shuffle; each
/// entry is `(train indices, validation indices)`.
pub fn kfold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || n < k {
        return Err(Error::Config(format!("cannot make {k} folds from {n} items")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|fold| {
            let (lo, hi) = (fold * n / k, (fold + 1) * n / k);
            let val = order[lo..hi].to_vec();
            let train = order[..lo].iter().chain(&order[hi..]).copied().collect();
            (train, val)
        })
        .collect())
}

/// One training input with its precomputed degradation terms. Everything
/// here depends on the input image only.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub id: String,
    pub target: LossTarget,
    pub i_star: ImageTensor,
    pub i_c: ImageTensor,
    pub i_at: Option<ImageTensor>,
}

impl PreparedSample {
    pub fn new(id: impl Into<String>, image: ImageTensor, attention: bool) -> Self {
        let deg = DegradationImages::compute(&image);
        let i_at = attention.then(|| attention_map(&image).i_at);
        Self { id: id.into(), target: LossTarget::new(image), i_star: deg.i_star, i_c: deg.i_c, i_at }
    }

    pub fn image(&self) -> &ImageTensor {
        &self.target.image
    }
}

/// Loads, resizes to `size×size` and prepares every image, in input order.
pub fn load_samples(paths: &[PathBuf], size: usize, attention: bool) -> Result<Vec<PreparedSample>> {
    paths
        .par_iter()
        .map(|path| {
            let img = resize_bilinear(&ImageTensor::load(path)?, size, size)?;
            Ok(PreparedSample::new(path.display().to_string(), img, attention))
        })
        .collect()
}
