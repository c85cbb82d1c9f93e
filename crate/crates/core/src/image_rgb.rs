//! RGB image carrier for masking interventions and overlays.

use std::path::Path;

use crate::error::{Error, Result};
use crate::label_map::LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    height: usize,
    width: usize,
    data: Vec<u8>, // row-major, 3 bytes per pixel
}

impl ImageRgb {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::Invalid(format!(
                "data length {} does not match {}x{}x3",
                data.len(),
                height,
                width
            )));
        }
        Ok(ImageRgb {
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

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let base = (row * self.width + col) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let base = (row * self.width + col) * 3;
        self.data[base..base + 3].copy_from_slice(&rgb);
    }

    pub fn matches_label_map(&self, map: &LabelMap) -> bool {
        self.height == map.height() && self.width == map.width()
    }
}

pub fn read_image_rgb(path: &Path) -> Result<ImageRgb> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRgb::new(h as usize, w as usize, rgb.into_raw())
}

pub fn write_image_rgb(img: &ImageRgb, path: &Path) -> Result<()> {
    let out = image::RgbImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().to_vec(),
    )
    .expect("dimensions match by construction");
    out.save(path).map_err(|e| Error::format(path, e.to_string()))
}
