//! Encoder feature maps, stored channel-major as [C, H', W'].

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{read_tensor, write_tensor, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Invalid(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Reads an SDTF f32 tensor with dims [C, H', W'].
pub fn read_feature_map(path: &Path) -> Result<FeatureMap> {
    match read_tensor(path)? {
        Tensor::F32 { dims, data } if dims.len() == 3 => FeatureMap::new(
            dims[0] as usize,
            dims[1] as usize,
            dims[2] as usize,
            data,
        ),
        t => Err(Error::format(
            path,
            format!(
                "expected f32 tensor with dims [C,H,W], got {:?} dims {:?}",
                t.dtype(),
                t.dims()
            ),
        )),
    }
}

pub fn write_feature_map(map: &FeatureMap, path: &Path) -> Result<()> {
    let tensor = Tensor::F32 {
        dims: vec![
            map.channels() as u32,
            map.height() as u32,
            map.width() as u32,
        ],
        data: map.data().to_vec(),
    };
    write_tensor(path, &tensor)
}
