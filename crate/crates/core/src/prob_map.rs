//! Per-pixel class probabilities and the argmax decision rule.

use std::path::Path;

use crate::error::{Error, Result};
use crate::label_map::LabelMap;
use crate::tensor::{read_tensor, write_tensor, Tensor};

/// Maximum deviation of a pixel's channel sum from 1.
pub const SUM_EPSILON: f64 = 1e-4;

/// H x W x 3 probabilities, pixel-major then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ProbMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid("prob map dimensions must be >= 1".into()));
        }
        if data.len() != height * width * 3 {
            return Err(Error::Invalid(format!(
                "data length {} does not match {}x{}x3",
                data.len(),
                height,
                width
            )));
        }
        for (px, chunk) in data.chunks_exact(3).enumerate() {
            let row = px / width;
            let col = px % width;
            let mut sum = 0.0f64;
            for &v in chunk {
                if !v.is_finite() {
                    return Err(Error::NonFinite { index: px * 3 });
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Invalid(format!(
                        "probability {v} outside [0,1] at pixel ({row},{col})"
                    )));
                }
                sum += v as f64;
            }
            if (sum - 1.0).abs() > SUM_EPSILON {
                return Err(Error::ProbabilitySum { sum, row, col });
            }
        }
        Ok(ProbMap {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Probability triple (p0, p1, p2) at a pixel.
    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let base = (row * self.width + col) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Reads an SDTF f32 tensor with dims [H, W, 3].
pub fn read_prob_map(path: &Path) -> Result<ProbMap> {
    match read_tensor(path)? {
        Tensor::F32 { dims, data } if dims.len() == 3 && dims[2] == 3 => {
            ProbMap::new(dims[0] as usize, dims[1] as usize, data)
        }
        t => Err(Error::format(
            path,
            format!(
                "expected f32 tensor with dims [H,W,3], got {:?} dims {:?}",
                t.dtype(),
                t.dims()
            ),
        )),
    }
}

pub fn write_prob_map(map: &ProbMap, path: &Path) -> Result<()> {
    let tensor = Tensor::F32 {
        dims: vec![map.height() as u32, map.width() as u32, 3],
        data: map.data().to_vec(),
    };
    write_tensor(path, &tensor)
}

/// Per-pixel argmax; ties break toward the lowest class index.
pub fn argmax_labels(p: &ProbMap) -> LabelMap {
    let data = p
        .pixels()
        .map(|triple| argmax3(triple))
        .collect();
    LabelMap::new(p.height(), p.width(), data).expect("argmax yields valid class ids")
}

pub fn argmax3(p: [f32; 3]) -> u8 {
    let mut best = 0u8;
    for k in 1..3 {
        if p[k as usize] > p[best as usize] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn accepts_unit_sum() {
        let p = ProbMap::new(1, 1, vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.pixel(0, 0), [0.2, 0.3, 0.5]);
    }

    #[test]
    fn rejects_sum_violation() {
        let err = ProbMap::new(1, 1, vec![0.5, 0.5, 0.5]).unwrap_err();
        assert!(err.to_string().contains("probability sum 1.5"));
    }

    #[test]
    fn accepts_one_hot_background() {
        let p = ProbMap::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(argmax_labels(&p).get(0, 0), 0);
    }

    #[test]
    fn argmax_tie_rules() {
        assert_eq!(argmax3([0.1, 0.6, 0.3]), 1);
        assert_eq!(argmax3([0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax3([0.0, 0.5, 0.5]), 1);
    }

    #[test]
    fn sdtf_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.sdtf");
        let p = ProbMap::new(2, 1, vec![0.2, 0.3, 0.5, 1.0, 0.0, 0.0]).unwrap();
        write_prob_map(&p, &path).unwrap();
        assert_eq!(read_prob_map(&path).unwrap(), p);
    }

    #[test]
    fn rejects_wrong_dims() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.sdtf");
        let tensor = Tensor::F32 {
            dims: vec![2, 2],
            data: vec![0.0; 4],
        };
        write_tensor(&path, &tensor).unwrap();
        assert!(read_prob_map(&path).is_err());
    }
}
