//! Oracle masking interventions: keep one region of the image and replace
//! the complement with a neutral fill, using the ground-truth mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_rgb::ImageRgb;
use crate::label_map::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Keep foreground appearance, fill background.
    OracleFg,
    /// Keep background context, fill foreground.
    OracleBg,
}

impl std::fmt::Display for MaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskMode::OracleFg => "oracle-fg",
            MaskMode::OracleBg => "oracle-bg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillValue {
    /// Channel-wise mean of the whole original image, rounded half-up.
    PerImageMean,
    Constant([u8; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskFillSpec {
    pub mode: MaskMode,
    pub fill: FillValue,
}

/// Channel-wise mean over all pixels, rounded half-up to 8-bit.
pub fn per_image_mean(img: &ImageRgb) -> [u8; 3] {
    let n = (img.height() * img.width()) as u64;
    let mut sums = [0u64; 3];
    for chunk in img.data().chunks_exact(3) {
        for c in 0..3 {
            sums[c] += chunk[c] as u64;
        }
    }
    let mut out = [0u8; 3];
    for c in 0..3 {
        // round half up: floor(sum/n + 1/2) = (2*sum + n) / (2*n)
        out[c] = ((2 * sums[c] + n) / (2 * n)) as u8;
    }
    out
}

pub fn apply_oracle_mask(img: &ImageRgb, gt: &LabelMap, spec: &MaskFillSpec) -> Result<ImageRgb> {
    if !img.matches_label_map(gt) {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", img.height(), img.width()),
            right: format!("{}x{}", gt.height(), gt.width()),
        });
    }
    let fill = match spec.fill {
        FillValue::PerImageMean => per_image_mean(img),
        FillValue::Constant(rgb) => rgb,
    };
    let mut out = img.clone();
    for r in 0..gt.height() {
        for c in 0..gt.width() {
            let fg = gt.is_foreground(r, c);
            let overwrite = match spec.mode {
                MaskMode::OracleFg => !fg,
                MaskMode::OracleBg => fg,
            };
            if overwrite {
                out.set_pixel(r, c, fill);
            }
        }
    }
    Ok(out)
}

/// Elementwise hi - lo over two flattened metric tables; null propagates.
pub fn delta_report(
    hi: &[(String, Option<f64>)],
    lo: &[(String, Option<f64>)],
) -> Result<Vec<(String, Option<f64>)>> {
    if hi.len() != lo.len() {
        return Err(Error::MetricSetMismatch(format!(
            "{} metrics vs {}",
            hi.len(),
            lo.len()
        )));
    }
    let mut out = Vec::with_capacity(hi.len());
    for ((name_hi, a), (name_lo, b)) in hi.iter().zip(lo) {
        if name_hi != name_lo {
            return Err(Error::MetricSetMismatch(format!(
                "metric {name_hi:?} vs {name_lo:?}"
            )));
        }
        let delta = match (a, b) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        };
        out.push((name_hi.clone(), delta));
    }
    Ok(out)
}
