//! Self-supervised underwater image enhancement.
//!
//! The toolkit estimates the degradation content of a single underwater
//! image in RGB space, synthetically intensifies it on the output of a small
//! convolutional autoencoder during training, and evaluates results with
//! common full-reference and underwater no-reference quality metrics.
//!
//! Module map:
//!
//! - [`image`]: the [`ImageTensor`] container, channel statistics, stretching, resizing, raster I/O.
//! - [`degradation`]: degradation parameters (`gd`, `gb`, context luminosity) and the degradation function.
//! - [`attention`]: closed-form detector for outlier pixels under channel unbalance.
//! - [`loss`]: scene-radiance and image-radiance loss terms with their gradient.
//! - [`network`]: the convolutional autoencoder, backpropagation, Adam and checkpoints.
//! - [`trainer`]: configuration, dataset handling, the training loop and inference.
//! - [`metrics`]: MSE, PSNR, SSIM, GMSD, CIEDE2000, UCIQE and UIQM.
//! - [`synthetic`]: procedurally rendered underwater scenes for tests and demos.

pub mod attention;
pub mod degradation;
mod error;
pub mod image;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod synthetic;
pub mod trainer;

pub use crate::error::{Error, Result};
pub use crate::image::{ChannelStats, ImageTensor, CHANNELS, EPSILON};
