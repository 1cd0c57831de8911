//! 2x2 stride-2 max pooling that stores argmax indices, and the matching
//! unpooling that scatters values back through those indices.
//!
//! Output dims use floor division, but no samples are dropped: when a spatial
//! dim is odd the last window is widened to absorb the trailing row/column
//! (and a 1-wide dim is covered by a single clipped window).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Result of a max-pool pass: pooled values, the flat index of each winning
/// element in the pre-pool tensor, and the original shape for restoration.
#[derive(Debug, Clone)]
pub struct PoolRecord {
    pub output: Tensor,
    pub argmax_indices: Vec<u32>,
    pub input_shape: Vec<usize>,
}

fn pooled_dim(d: usize) -> usize {
    (d / 2).max(1)
}

/// Window `i` of `out` windows over a dim of size `d`.
fn window_range(i: usize, d: usize, out: usize) -> (usize, usize) {
    let start = 2 * i;
    let end = if i + 1 == out { d } else { 2 * i + 2 };
    (start, end)
}

/// Max pooling with a 2x2 window and stride 2 over the last two dims of a
/// `... x H x W` tensor. Ties go to the lowest flat index.
pub fn maxpool2d(input: &Tensor) -> Result<PoolRecord> {
    let shape = input.shape();
    if shape.len() < 3 {
        return Err(Error::dimension(format!(
            "maxpool2d expects at least C x H x W, got {shape:?}"
        )));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if h == 0 || w == 0 {
        return Err(Error::dimension(
            "maxpool2d window does not fit an empty spatial dim",
        ));
    }
    let maps: usize = shape[..shape.len() - 2].iter().product();
    let (oh, ow) = (pooled_dim(h), pooled_dim(w));

    let mut out_shape = shape[..shape.len() - 2].to_vec();
    out_shape.push(oh);
    out_shape.push(ow);
    let mut output = Tensor::zeros(&out_shape);
    let mut indices = vec![0u32; maps * oh * ow];

    let x = input.data();
    let out = output.data_mut();
    for m in 0..maps {
        let base = m * h * w;
        for oi in 0..oh {
            let (r0, r1) = window_range(oi, h, oh);
            for oj in 0..ow {
                let (c0, c1) = window_range(oj, w, ow);
                let mut best_idx = base + r0 * w + c0;
                let mut best = x[best_idx];
                for r in r0..r1 {
                    for c in c0..c1 {
                        let idx = base + r * w + c;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (m * oh + oi) * ow + oj;
                out[o] = best;
                indices[o] = best_idx as u32;
            }
        }
    }
    Ok(PoolRecord {
        output,
        argmax_indices: indices,
        input_shape: shape.to_vec(),
    })
}

/// Places `input` values at the argmax positions recorded by [`maxpool2d`];
/// every other position of the restored tensor is zero.
pub fn maxunpool2d(input: &Tensor, record: &PoolRecord) -> Result<Tensor> {
    if input.shape() != record.output.shape() {
        return Err(Error::dimension(format!(
            "maxunpool2d input shape {:?} does not match pooled shape {:?}",
            input.shape(),
            record.output.shape()
        )));
    }
    let total: usize = record.input_shape.iter().product();
    let mut out = Tensor::zeros(&record.input_shape);
    let od = out.data_mut();
    for (&idx, &v) in record.argmax_indices.iter().zip(input.data()) {
        let idx = idx as usize;
        if idx >= total {
            return Err(Error::corrupt(format!(
                "pool index {idx} out of bounds for restored size {total}"
            )));
        }
        od[idx] = v;
    }
    Ok(out)
}
