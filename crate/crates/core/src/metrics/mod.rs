//! Image quality metrics.
//!
//! Full-reference: MSE, PSNR, SSIM, GMSD and CIEDE2000. No-reference
//! underwater scores: UCIQE and UIQM. All take images in `[0, 1]`.

pub mod color;
mod gmsd;
mod ssim;
mod underwater;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use self::gmsd::{gmsd, GMSD_C};
pub use self::ssim::{gaussian_taps, ssim, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use self::underwater::{
    uciqe, uciqe_components, uicm, uiconm, uiqm, uiqm_components, uism, UciqeComponents, UiqmComponents, UCIQE_WEIGHTS, UIQM_BLOCK,
    UIQM_WEIGHTS,
};

use crate::{ImageTensor, Result};

/// PSNR reported for (near-)identical images.
pub const PSNR_CAP_DB: f64 = 100.0;
const PSNR_MSE_FLOOR: f64 = 1e-10;

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    crate::loss::mse(a, b)
}

/// PSNR for a given MSE and unit peak value.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < PSNR_MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Mean CIEDE2000 difference over pixels.
pub fn ciede2000(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let la = color::lab_pixels(a);
    let lb = color::lab_pixels(b);
    let sum: f64 = la.iter().zip(&lb).map(|(p, q)| color::delta_e_2000(*p, *q)).sum();
    Ok(sum / la.len() as f64)
}

/// Column order of the evaluation CSV.
pub const METRIC_NAMES: [&str; 7] = ["mse", "psnr", "ssim", "gmsd", "ciede2000", "uciqe", "uiqm"];

/// Scores of one image; full-reference entries are `None` without a reference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricValues {
    pub mse: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub gmsd: Option<f64>,
    pub ciede2000: Option<f64>,
    pub uciqe: Option<f64>,
    pub uiqm: Option<f64>,
}

impl MetricValues {
    pub fn compute(img: &ImageTensor, reference: Option<&ImageTensor>) -> Result<Self> {
        let mut v = MetricValues { uciqe: Some(uciqe(img)), uiqm: Some(uiqm(img)), ..Default::default() };
        if let Some(r) = reference {
            let m = mse(img, r)?;
            v.mse = Some(m);
            v.psnr = Some(psnr_from_mse(m));
            v.ssim = Some(ssim(img, r)?);
            v.gmsd = Some(gmsd(img, r)?);
            v.ciede2000 = Some(ciede2000(img, r)?);
        }
        Ok(v)
    }

    pub fn as_array(&self) -> [Option<f64>; 7] {
        [self.mse, self.psnr, self.ssim, self.gmsd, self.ciede2000, self.uciqe, self.uiqm]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub reference: Option<String>,
    pub values: MetricValues,
}

/// Per-image scores with aggregate means.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    /// Arithmetic mean of each metric over the images that have it.
    pub fn aggregate(&self) -> BTreeMap<&'static str, f64> {
        let mut out = BTreeMap::new();
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let present: Vec<f64> = self.rows.iter().filter_map(|r| r.values.as_array()[i]).collect();
            if !present.is_empty() {
                out.insert(*name, present.iter().sum::<f64>() / present.len() as f64);
            }
        }
        out
    }

    /// CSV with header `image,reference,mse,...,uiqm`; absent values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("image,reference");
        for name in METRIC_NAMES {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.image);
            s.push(',');
            s.push_str(row.reference.as_deref().unwrap_or(""));
            for v in row.values.as_array() {
                s.push(',');
                if let Some(v) = v {
                    write!(s, "{v}").expect("write to string");
                }
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        let img = ImageTensor::filled(4, 4, [0.2; 3]);
        assert_eq!(mse(&img, &img).unwrap(), 0.0);
        assert_eq!(psnr(&img, &img).unwrap(), 100.0);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-9);
        let brighter = img.map(|v| v + 0.1);
        assert!((psnr(&img, &brighter).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn identical_images_have_zero_delta_e() {
        let img = ImageTensor::from_fn(5, 5, |y, x, k| ((y + 2 * x + 3 * k) % 5) as f64 / 4.0);
        assert_eq!(ciede2000(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn csv_leaves_missing_values_empty() {
        let img = ImageTensor::from_fn(16, 16, |y, x, k| ((y * 3 + x * 5 + k) % 11) as f64 / 10.0);
        let report = MetricReport {
            rows: vec![MetricRow { image: "a.png".into(), reference: None, values: MetricValues::compute(&img, None).unwrap() }],
        };
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "image,reference,mse,psnr,ssim,gmsd,ciede2000,uciqe,uiqm");
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 9);
        assert!(fields[1..7].iter().all(|f| f.is_empty()));
        assert!(fields[7].parse::<f64>().is_ok() && fields[8].parse::<f64>().is_ok());
        assert_eq!(report.aggregate().len(), 2);
    }
}
