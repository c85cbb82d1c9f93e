//! SDTF: a minimal binary tensor container.
//!
//! Layout (little-endian):
//! - magic `SDTF`
//! - u8 version = 1
//! - u8 dtype (1 = u8, 2 = f32)
//! - u8 ndim (1..=4)
//! - u8 pad = 0
//! - ndim x u32 dims
//! - row-major payload, no compression

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SDTF";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8 = 1,
    F32 = 2,
}

impl Dtype {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Dtype::U8),
            2 => Some(Dtype::F32),
            _ => None,
        }
    }
}

/// Raw decoded tensor; typed containers are built on top of this.
#[derive(Debug, Clone)]
pub enum Tensor {
    U8 { dims: Vec<u32>, data: Vec<u8> },
    F32 { dims: Vec<u32>, data: Vec<f32> },
}

impl Tensor {
    pub fn dims(&self) -> &[u32] {
        match self {
            Tensor::U8 { dims, .. } => dims,
            Tensor::F32 { dims, .. } => dims,
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Tensor::U8 { .. } => Dtype::U8,
            Tensor::F32 { .. } => Dtype::F32,
        }
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut header = [0u8; 8];
    r.read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;
    if &header[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected SDTF"));
    }
    if header[4] != VERSION {
        return Err(Error::format(path, format!("unsupported version {}", header[4])));
    }
    let dtype = Dtype::from_byte(header[5])
        .ok_or_else(|| Error::format(path, format!("unknown dtype {}", header[5])))?;
    let ndim = header[6] as usize;
    if !(1..=4).contains(&ndim) {
        return Err(Error::format(path, format!("ndim {ndim} outside 1..=4")));
    }
    if header[7] != 0 {
        return Err(Error::format(path, "nonzero pad byte"));
    }

    let mut dims = Vec::with_capacity(ndim);
    let mut buf4 = [0u8; 4];
    for _ in 0..ndim {
        r.read_exact(&mut buf4).map_err(|e| Error::io(path, e))?;
        dims.push(u32::from_le_bytes(buf4));
    }
    let numel: usize = dims.iter().map(|&d| d as usize).product();

    match dtype {
        Dtype::U8 => {
            let mut data = vec![0u8; numel];
            r.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
            expect_eof(&mut r, path)?;
            Ok(Tensor::U8 { dims, data })
        }
        Dtype::F32 => {
            let mut bytes = vec![0u8; numel * 4];
            r.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
            expect_eof(&mut r, path)?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Tensor::F32 { dims, data })
        }
    }
}

fn expect_eof<R: Read>(r: &mut R, path: &Path) -> Result<()> {
    let mut one = [0u8; 1];
    match r.read(&mut one) {
        Ok(0) => Ok(()),
        Ok(_) => Err(Error::format(path, "trailing bytes after payload")),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let dims = tensor.dims();
    let numel: usize = dims.iter().map(|&d| d as usize).product();
    let payload_len = match tensor {
        Tensor::U8 { data, .. } => data.len(),
        Tensor::F32 { data, .. } => data.len(),
    };
    if payload_len != numel {
        return Err(Error::Invalid(format!(
            "payload length {payload_len} does not match dims product {numel}"
        )));
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
    w.write_all(&[VERSION, tensor.dtype() as u8, dims.len() as u8, 0])
        .map_err(|e| Error::io(path, e))?;
    for &d in dims {
        w.write_all(&d.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    match tensor {
        Tensor::U8 { data, .. } => w.write_all(data).map_err(|e| Error::io(path, e))?,
        Tensor::F32 { data, .. } => {
            for &v in data {
                w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
