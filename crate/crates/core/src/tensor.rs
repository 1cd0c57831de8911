//! Dense row-major `f32` tensors, trainable parameters, and the `EGMT`
//! on-disk tensor container shared by checkpoints and dataset files.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes of the tensor container.
pub const EGMT_MAGIC: &[u8; 4] = b"EGMT";
/// Current container format version.
pub const EGMT_VERSION: u16 = 1;

/// A dense tensor: a shape plus a flat row-major buffer of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// All-zero tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// Constant-filled tensor.
    pub fn full(shape: &[usize], value: f32) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor from a flat buffer, checking the element count.
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::dimension(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Fills every element with zero.
    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// True when every element is finite (no NaN, no infinity).
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Inner product with another tensor of the same element count,
    /// accumulated in f64.
    pub fn dot(&self, other: &Tensor) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    }

    /// Serialized byte representation in the `EGMT` container format.
    pub fn to_egmt_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 2 + 1 + 8 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(EGMT_MAGIC);
        out.extend_from_slice(&EGMT_VERSION.to_le_bytes());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Writes the tensor in `EGMT` framing to `w`.
    pub fn write_egmt<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.to_egmt_bytes())?;
        Ok(())
    }

    /// Reads one `EGMT`-framed tensor from `r`.
    pub fn read_egmt<R: Read>(r: &mut R) -> Result<Tensor> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != EGMT_MAGIC {
            return Err(Error::corrupt("bad EGMT magic"));
        }
        let mut ver = [0u8; 2];
        read_exact(r, &mut ver)?;
        let version = u16::from_le_bytes(ver);
        if version != EGMT_VERSION {
            return Err(Error::corrupt(format!(
                "unsupported EGMT version {version} (expected {EGMT_VERSION})"
            )));
        }
        let mut rank = [0u8; 1];
        read_exact(r, &mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut dim = [0u8; 8];
            read_exact(r, &mut dim)?;
            shape.push(u64::from_le_bytes(dim) as usize);
        }
        let count: usize = shape.iter().product();
        let mut payload = vec![0u8; count * 4];
        read_exact(r, &mut payload)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::from_vec(&shape, data)
    }

    /// Saves the tensor to a standalone `.egmt` file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_egmt(&mut f)
    }

    /// Loads a tensor from a standalone `.egmt` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let t = Tensor::read_egmt(&mut f)?;
        // Trailing garbage means the file was not written by us.
        let mut probe = [0u8; 1];
        if f.read(&mut probe)? != 0 {
            return Err(Error::corrupt("trailing bytes after EGMT payload"));
        }
        Ok(t)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::corrupt("truncated EGMT stream"))
}

/// A trainable tensor: the value plus an accumulated gradient of equal shape.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter { value, grad }
    }

    /// Resets the accumulated gradient to zero.
    pub fn zero_grad(&mut self) {
        self.grad.fill_zero();
    }
}
