//! Self-supervised training loop and inference.
//!
//! Each step runs the autoencoder on an input `I`, degrades its output with
//! the precomputed `I*`, `I_c` (and optionally `I_at`), and penalizes the
//! degraded output against `I` itself. Since the penalty is computed on a
//! worse-looking output, the network learns to over-correct, which is the
//! enhancement at inference time.

mod config;
mod dataset;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use self::config::TrainConfig;
pub use self::dataset::{kfold_splits, list_images, load_samples, split_dataset, PreparedSample, DEFAULT_FOLDS};

use crate::degradation::degradation_function;
use crate::image::{clamp01, resize_bilinear};
use crate::loss::{total_loss, LossBreakdown, RadianceLoss};
use crate::network::{adam_step, backward, default_architecture, forward, l1_penalty, predict, save_checkpoint, Gradients, NetworkParams};
use crate::{Error, ImageTensor, Result};

pub const CHECKPOINT_FILE: &str = "model.aqmd";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

/// Builds the default architecture with the configured Leaky-ReLU slope.
pub fn build_for_config(cfg: &TrainConfig) -> Result<NetworkParams> {
    NetworkParams::new(default_architecture(cfg.leaky_alpha), cfg.seed)
}

struct SampleResult {
    l_sc: f64,
    l_im: f64,
    grads: Gradients,
}

fn sample_loss_and_grad(params: &NetworkParams, sample: &PreparedSample, loss: &RadianceLoss) -> Result<SampleResult> {
    let (out, cache) = forward(params, sample.image())?;
    let degraded = degradation_function(&out, &sample.i_star, &sample.i_c, sample.i_at.as_ref())?;
    let eval = loss.evaluate(&sample.target, &degraded)?;
    if !(eval.l_sc.is_finite() && eval.l_im.is_finite()) {
        return Err(Error::NonFinite(format!("loss for {}", sample.id)));
    }
    // dÎ*/dÎ is the identity
    let grads = backward(params, &cache, &eval.grad)?;
    Ok(SampleResult { l_sc: eval.l_sc, l_im: eval.l_im, grads })
}

/// Loss of `samples` under the current parameters without updating them.
pub fn evaluate_loss(params: &NetworkParams, samples: &[&PreparedSample], cfg: &TrainConfig) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no samples to evaluate".into()));
    }
    let loss = RadianceLoss::new(cfg.c1, cfg.c2);
    let terms: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let out = predict(params, s.image())?;
            let degraded = degradation_function(&out, &s.i_star, &s.i_c, s.i_at.as_ref())?;
            let eval = loss.evaluate(&s.target, &degraded)?;
            Ok((eval.l_sc, eval.l_im))
        })
        .collect::<Result<_>>()?;
    let n = terms.len() as f64;
    let l_sc = terms.iter().map(|t| t.0).sum::<f64>() / n;
    let l_im = terms.iter().map(|t| t.1).sum::<f64>() / n;
    let (l1, _) = l1_penalty(params, cfg.l1_kernel, cfg.l1_bias);
    Ok(total_loss(l_sc, l_im, l1, cfg.c1, cfg.c2))
}

/// One optimizer step on the batch-mean gradient. Returns the loss at the
/// parameters before the update.
pub fn train_step(params: &mut NetworkParams, batch: &[&PreparedSample], cfg: &TrainConfig) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("empty batch".into()));
    }
    let loss = RadianceLoss::new(cfg.c1, cfg.c2);
    let shared: &NetworkParams = params;
    let results: Vec<SampleResult> = batch.par_iter().map(|s| sample_loss_and_grad(shared, s, &loss)).collect::<Result<_>>()?;

    let n = results.len() as f64;
    let mut grads = Gradients::zeros_like(params);
    let (mut l_sc, mut l_im) = (0.0, 0.0);
    for r in &results {
        grads.accumulate(&r.grads);
        l_sc += r.l_sc;
        l_im += r.l_im;
    }
    grads.scale(1.0 / n);
    let (l1, l1_grads) = l1_penalty(params, cfg.l1_kernel, cfg.l1_bias);
    grads.accumulate(&l1_grads);
    let breakdown = total_loss(l_sc / n, l_im / n, l1, cfg.c1, cfg.c2);
    if !breakdown.total.is_finite() {
        let ids: Vec<&str> = batch.iter().map(|s| s.id.as_str()).collect();
        return Err(Error::NonFinite(format!("batch loss for {}", ids.join(", "))));
    }
    adam_step(params, &grads, cfg.lr)?;
    Ok(breakdown)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean over the epoch's training batches.
    pub train: LossBreakdown,
    pub validation: Option<LossBreakdown>,
    pub seconds: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,l_sc,l_im,l1,total";

    pub fn csv_row(&self) -> String {
        let t = &self.train;
        format!("{},{},{},{},{}", self.epoch, t.l_sc, t.l_im, t.l1_penalty, t.total)
    }
}

/// Training log in CSV form.
pub fn epochs_to_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(EpochRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Owns the parameters and the shuffling RNG across epochs.
pub struct Trainer {
    cfg: TrainConfig,
    params: NetworkParams,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, params: NetworkParams) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
        Ok(Self { cfg, params, rng, epoch: 0 })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn into_params(self) -> NetworkParams {
        self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Reshuffles `train`, runs every batch once and evaluates `validation` afterwards.
    pub fn run_epoch(&mut self, train: &[PreparedSample], validation: &[PreparedSample]) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("no training samples".into()));
        }
        let started = Instant::now();
        let mut order: Vec<&PreparedSample> = train.iter().collect();
        order.shuffle(&mut self.rng);
        let mut batches = Vec::new();
        for batch in order.chunks(self.cfg.batch_size) {
            batches.push(train_step(&mut self.params, batch, &self.cfg)?);
        }
        let validation = if validation.is_empty() {
            None
        } else {
            let refs: Vec<&PreparedSample> = validation.iter().collect();
            Some(evaluate_loss(&self.params, &refs, &self.cfg)?)
        };
        self.epoch += 1;
        Ok(EpochRecord { epoch: self.epoch, train: LossBreakdown::mean(&batches), validation, seconds: started.elapsed().as_secs_f64() })
    }

    /// Runs `cfg.epochs` epochs, calling `on_epoch` after each.
    pub fn fit(
        &mut self,
        train: &[PreparedSample],
        validation: &[PreparedSample],
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<Vec<EpochRecord>> {
        let mut records = Vec::with_capacity(self.cfg.epochs);
        for _ in 0..self.cfg.epochs {
            let record = self.run_epoch(train, validation)?;
            on_epoch(&record);
            records.push(record);
        }
        Ok(records)
    }
}

/// Enhances one image: a single forward pass, clamped to `[0, 1]`.
///
/// Inputs whose sides are not multiples of the network's divisor are
/// resized up to the next multiple and the result is resized back.
pub fn enhance(params: &NetworkParams, img: &ImageTensor) -> Result<ImageTensor> {
    let d = params.size_divisor();
    let (h, w) = img.dims();
    let (ph, pw) = (h.div_ceil(d) * d, w.div_ceil(d) * d);
    let out = if (ph, pw) == (h, w) {
        predict(params, img)?
    } else {
        let resized = resize_bilinear(img, ph, pw)?;
        resize_bilinear(&predict(params, &resized)?, h, w)?
    };
    Ok(clamp01(&out).0)
}

#[derive(Clone, Debug)]
pub struct TrainingSummary {
    pub records: Vec<EpochRecord>,
    pub train_images: Vec<PathBuf>,
    pub holdout_images: Vec<PathBuf>,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

/// End-to-end run: list and split the dataset, train, and write the
/// checkpoint and CSV log into `cfg.checkpoint_dir`.
pub fn run_training(cfg: &TrainConfig) -> Result<TrainingSummary> {
    cfg.validate()?;
    let paths = list_images(&cfg.dataset_dir)?;
    if paths.is_empty() {
        return Err(Error::EmptyDataset(format!("no PNG/JPEG images in {}", cfg.dataset_dir.display())));
    }
    let (train_paths, holdout_paths) = split_dataset(&paths, cfg.split_fraction, cfg.seed)?;
    info!("dataset: {} training, {} held out", train_paths.len(), holdout_paths.len());
    let train = load_samples(&train_paths, cfg.image_size, cfg.attention_enabled)?;
    let holdout = load_samples(&holdout_paths, cfg.image_size, cfg.attention_enabled)?;

    let params = build_for_config(cfg)?;
    info!("network: {} trainable parameters", params.param_count());
    let mut trainer = Trainer::new(cfg.clone(), params)?;
    let records = trainer.fit(&train, &holdout, |r| {
        let val = r.validation.map_or_else(|| "-".to_string(), |v| format!("{:.6}", v.total));
        info!("epoch {:>4}  train {:.6}  validation {}  ({:.1}s)", r.epoch, r.train.total, val, r.seconds);
    })?;

    fs::create_dir_all(&cfg.checkpoint_dir)?;
    let checkpoint = cfg.checkpoint_dir.join(CHECKPOINT_FILE);
    save_checkpoint(trainer.params(), &checkpoint)?;
    let log = cfg.checkpoint_dir.join(TRAIN_LOG_FILE);
    let tmp = cfg.checkpoint_dir.join(format!(".{TRAIN_LOG_FILE}.tmp"));
    fs::write(&tmp, epochs_to_csv(&records))?;
    fs::rename(&tmp, &log)?;
    Ok(TrainingSummary { records, train_images: train_paths, holdout_images: holdout_paths, checkpoint, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};
    use crate::synthetic;

    fn toy_params(seed: u64) -> NetworkParams {
        NetworkParams::new(
            vec![LayerSpec::conv(3, 8, 2, Activation::Relu), LayerSpec::Upsample, LayerSpec::conv(8, 3, 1, Activation::LeakyRelu(0.19))],
            seed,
        )
        .unwrap()
    }

    fn samples(n: usize, attention: bool) -> Vec<PreparedSample> {
        synthetic::corpus(5, n, 16, 16)
            .into_iter()
            .enumerate()
            .map(|(i, img)| PreparedSample::new(format!("s{i}"), img, attention))
            .collect()
    }

    #[test]
    fn first_loss_is_finite_and_positive() {
        let cfg = TrainConfig { image_size: 16, ..Default::default() };
        let data = samples(3, true);
        let mut p = toy_params(1);
        let refs: Vec<&PreparedSample> = data.iter().collect();
        let b = train_step(&mut p, &refs, &cfg).unwrap();
        assert!(b.total.is_finite() && b.total > 0.0);
        assert_eq!(p.optimizer.step, 1);
    }

    #[test]
    fn perfect_fit_to_stretched_image_leaves_degradation_loss() {
        // With Î = I_c and no attention, Î* = I*; c1 = 0 leaves MSE(I, I*) + l1.
        let data = samples(1, false);
        let s = &data[0];
        let degraded = degradation_function(&s.i_c, &s.i_star, &s.i_c, None).unwrap();
        let eval = RadianceLoss::new(0.0, 1.0).evaluate(&s.target, &degraded).unwrap();
        let direct = crate::loss::mse(s.image(), &s.i_star).unwrap();
        assert!((eval.l_im - direct).abs() < 1e-15);
        let l1 = 0.125;
        let b = total_loss(eval.l_sc, eval.l_im, l1, 0.0, 1.0);
        assert!((b.total - (direct + l1)).abs() < 1e-15);
    }

    #[test]
    fn attention_disabled_matches_plain_degradation() {
        let with = samples(2, true);
        let without = samples(2, false);
        assert!(without.iter().all(|s| s.i_at.is_none()));
        let cfg = TrainConfig { attention_enabled: false, ..Default::default() };
        let p = toy_params(3);
        let refs: Vec<&PreparedSample> = without.iter().collect();
        let b = evaluate_loss(&p, &refs, &cfg).unwrap();
        // manual evaluation of Î* = Î + I* - I_c
        let loss = RadianceLoss::new(cfg.c1, cfg.c2);
        let mut l_im = 0.0;
        for s in &with {
            let out = predict(&p, s.image()).unwrap();
            let mut manual = out.clone();
            for ((y, x, k), v) in manual.data_mut().indexed_iter_mut() {
                *v = out.get(y, x, k) + (s.i_star.get(y, x, k) - s.i_c.get(y, x, k));
            }
            l_im += loss.evaluate(&s.target, &manual).unwrap().l_im;
        }
        assert_eq!(b.l_im, l_im / 2.0);
    }

    #[test]
    fn cached_terms_are_reproducible() {
        let a = samples(2, true);
        let b = samples(2, true);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.i_star, y.i_star);
            assert_eq!(x.i_c, y.i_c);
            assert_eq!(x.i_at, y.i_at);
        }
    }

    #[test]
    fn enhance_keeps_shape_and_changes_image() {
        let p = crate::network::build_network(0);
        let img = synthetic::underwater_image(1, 20, 22);
        let out = enhance(&p, &img).unwrap();
        assert_eq!(out.dims(), (20, 22));
        assert_ne!(out, img);
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn short_training_is_deterministic() {
        let cfg = TrainConfig { image_size: 16, batch_size: 2, epochs: 2, seed: 9, ..Default::default() };
        let data = samples(5, true);
        let run = || {
            let mut t = Trainer::new(cfg.clone(), toy_params(cfg.seed)).unwrap();
            t.fit(&data[..4], &data[4..], |_| {}).unwrap().into_iter().map(|r| r.train.total).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_log_format() {
        let r = EpochRecord { epoch: 1, train: total_loss(0.5, 0.25, 0.125, 0.65, 0.35), validation: None, seconds: 1.0 };
        let csv = epochs_to_csv(&[r]);
        assert_eq!(csv, "epoch,l_sc,l_im,l1,total\n1,0.5,0.25,0.125,0.5375\n");
    }
}
