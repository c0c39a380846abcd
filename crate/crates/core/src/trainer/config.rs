use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::loss::{DEFAULT_C1, DEFAULT_C2};
use crate::network::{DEFAULT_LEAKY_ALPHA, L1_BIAS_FACTOR, L1_KERNEL_FACTOR};
use crate::{Error, Result};

/// Training hyperparameters.
///
/// The text form is one `key = value` pair per line; `#` starts a comment
/// and keys are the field names below.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub image_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub c1: f64,
    pub c2: f64,
    pub attention_enabled: bool,
    pub l1_kernel: f64,
    pub l1_bias: f64,
    pub leaky_alpha: f64,
    pub split_fraction: f64,
    pub seed: u64,
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            batch_size: 6,
            epochs: 200,
            lr: 0.0008,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            attention_enabled: true,
            l1_kernel: L1_KERNEL_FACTOR,
            l1_bias: L1_BIAS_FACTOR,
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
            split_fraction: 0.9,
            seed: 0,
            dataset_dir: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

impl TrainConfig {
    /// Parses the key-value text form on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "image_size" => cfg.image_size = parse(key, value)?,
                "batch_size" => cfg.batch_size = parse(key, value)?,
                "epochs" => cfg.epochs = parse(key, value)?,
                "lr" => cfg.lr = parse(key, value)?,
                "c1" => cfg.c1 = parse(key, value)?,
                "c2" => cfg.c2 = parse(key, value)?,
                "attention_enabled" => cfg.attention_enabled = parse_bool(key, value)?,
                "l1_kernel" => cfg.l1_kernel = parse(key, value)?,
                "l1_bias" => cfg.l1_bias = parse(key, value)?,
                "leaky_alpha" => cfg.leaky_alpha = parse(key, value)?,
                "split_fraction" => cfg.split_fraction = parse(key, value)?,
                "seed" => cfg.seed = parse(key, value)?,
                "dataset_dir" => cfg.dataset_dir = PathBuf::from(value),
                "checkpoint_dir" => cfg.checkpoint_dir = PathBuf::from(value),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative directories resolve against the file's location.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            if cfg.dataset_dir.is_relative() {
                cfg.dataset_dir = base.join(&cfg.dataset_dir);
            }
            if cfg.checkpoint_dir.is_relative() {
                cfg.checkpoint_dir = base.join(&cfg.checkpoint_dir);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return fail(format!("split_fraction must be in (0, 1), got {}", self.split_fraction));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.image_size == 0 || !self.image_size.is_multiple_of(4) {
            return fail(format!("image_size must be a positive multiple of 4, got {}", self.image_size));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("l1_kernel", self.l1_kernel), ("l1_bias", self.l1_bias)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.leaky_alpha.is_finite() && self.leaky_alpha >= 0.0) {
            return fail(format!("leaky_alpha must be non-negative, got {}", self.leaky_alpha));
        }
        Ok(())
    }

    /// Text form accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "image_size = {}", self.image_size);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "c1 = {}", self.c1);
        let _ = writeln!(s, "c2 = {}", self.c2);
        let _ = writeln!(s, "attention_enabled = {}", self.attention_enabled);
        let _ = writeln!(s, "l1_kernel = {}", self.l1_kernel);
        let _ = writeln!(s, "l1_bias = {}", self.l1_bias);
        let _ = writeln!(s, "leaky_alpha = {}", self.leaky_alpha);
        let _ = writeln!(s, "split_fraction = {}", self.split_fraction);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "dataset_dir = {}", self.dataset_dir.display());
        let _ = writeln!(s, "checkpoint_dir = {}", self.checkpoint_dir.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_protocol() {
        let c = TrainConfig::default();
        assert_eq!((c.image_size, c.batch_size, c.epochs), (256, 6, 200));
        assert_eq!((c.lr, c.c1, c.c2, c.leaky_alpha, c.split_fraction), (0.0008, 0.65, 0.35, 0.19, 0.9));
        assert_eq!((c.l1_kernel, c.l1_bias), (15e-6, 1.5e-6));
    }

    #[test]
    fn parses_with_comments() {
        let cfg = TrainConfig::parse("# desk run\nimage_size = 64\nepochs=50 # short\nattention_enabled = false\n\nseed = 7\n").unwrap();
        assert_eq!(cfg.image_size, 64);
        assert_eq!(cfg.epochs, 50);
        assert!(!cfg.attention_enabled);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.batch_size, 6);
    }

    #[test]
    fn text_round_trip() {
        let cfg = TrainConfig { epochs: 3, lr: 1e-3, ..Default::default() };
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrainConfig::parse("nonsense = 1").is_err());
        assert!(TrainConfig::parse("image_size = 30").is_err());
        assert!(TrainConfig::parse("split_fraction = 1.0").is_err());
        assert!(TrainConfig::parse("batch_size = 0").is_err());
        assert!(TrainConfig::parse("epochs").is_err());
        assert!(TrainConfig::parse("lr = abc").is_err());
    }
}
