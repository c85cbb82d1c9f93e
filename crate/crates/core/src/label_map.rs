//! Label maps over the three-class space {0 = background, 1, 2 = foreground identities}.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{read_tensor, write_tensor, Tensor};

pub const BACKGROUND: u8 = 0;
pub const NUM_CLASSES: usize = 3;

/// H x W map of class ids, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid("label map dimensions must be >= 1".into()));
        }
        if data.len() != height * width {
            return Err(Error::Invalid(format!(
                "data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if v as usize >= NUM_CLASSES {
                return Err(Error::InvalidClassId {
                    value: v,
                    row: i / width,
                    col: i % width,
                });
            }
        }
        Ok(LabelMap {
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn is_foreground(&self, row: usize, col: usize) -> bool {
        self.get(row, col) != BACKGROUND
    }

    pub fn same_dims(&self, other: &LabelMap) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Reads an 8-bit grayscale PNG or an SDTF u8 tensor with ndim = 2.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    if is_png(path)? {
        read_label_map_png(path)
    } else {
        read_label_map_sdtf(path)
    }
}

fn is_png(path: &Path) -> Result<bool> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.starts_with(&[0x89, b'P', b'N', b'G']))
}

fn read_label_map_png(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    LabelMap::new(h as usize, w as usize, gray.into_raw())
}

fn read_label_map_sdtf(path: &Path) -> Result<LabelMap> {
    match read_tensor(path)? {
        Tensor::U8 { dims, data } if dims.len() == 2 => {
            LabelMap::new(dims[0] as usize, dims[1] as usize, data)
        }
        t => Err(Error::format(
            path,
            format!(
                "expected u8 tensor with ndim=2, got {:?} dims {:?}",
                t.dtype(),
                t.dims()
            ),
        )),
    }
}

pub fn write_label_map_png(map: &LabelMap, path: &Path) -> Result<()> {
    let img = image::GrayImage::from_raw(
        map.width() as u32,
        map.height() as u32,
        map.data().to_vec(),
    )
    .expect("dimensions match by construction");
    img.save(path).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_label_map_sdtf(map: &LabelMap, path: &Path) -> Result<()> {
    let tensor = Tensor::U8 {
        dims: vec![map.height() as u32, map.width() as u32],
        data: map.data().to_vec(),
    };
    write_tensor(path, &tensor)
}
