//! Fully connected (affine) layer.

use rand::Rng;

use super::gemm::sgemm;
use super::init::kaiming_uniform;
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// `y = x W + b` for `x: N x D`, `W: D x L`, `b: L`.
pub fn fully_connected(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d, l) = check_shapes(input.shape(), weights.shape(), bias.len())?;
    let mut y = Tensor::zeros(&[n, l]);
    sgemm(
        n,
        d,
        l,
        1.0,
        input.data(),
        false,
        weights.data(),
        false,
        0.0,
        y.data_mut(),
    );
    for row in y.data_mut().chunks_mut(l) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(y)
}

/// Gradients of [`fully_connected`] w.r.t. input, weights, and bias.
pub fn fully_connected_grads(
    input: &Tensor,
    weights: &Tensor,
    d_output: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, d, l) = check_shapes(input.shape(), weights.shape(), weights.shape()[1])?;
    if d_output.shape() != [n, l] {
        return Err(Error::dimension("fully_connected gradient shape mismatch"));
    }
    let mut dx = Tensor::zeros(&[n, d]);
    sgemm(
        n,
        l,
        d,
        1.0,
        d_output.data(),
        false,
        weights.data(),
        true,
        0.0,
        dx.data_mut(),
    );
    let mut dw = Tensor::zeros(&[d, l]);
    sgemm(
        d,
        n,
        l,
        1.0,
        input.data(),
        true,
        d_output.data(),
        false,
        0.0,
        dw.data_mut(),
    );
    let mut db = Tensor::zeros(&[l]);
    for row in d_output.data().chunks(l) {
        for (b, v) in db.data_mut().iter_mut().zip(row) {
            *b += v;
        }
    }
    Ok((dx, dw, db))
}

fn check_shapes(input: &[usize], weights: &[usize], bias_len: usize) -> Result<(usize, usize, usize)> {
    if input.len() != 2 || weights.len() != 2 {
        return Err(Error::dimension(
            "fully_connected expects N x D input and D x L weights",
        ));
    }
    let (n, d) = (input[0], input[1]);
    let (wd, l) = (weights[0], weights[1]);
    if d != wd {
        return Err(Error::dimension(format!(
            "inner dims disagree: input D={d}, weights D={wd}"
        )));
    }
    if bias_len != l {
        return Err(Error::dimension(format!(
            "bias has {bias_len} entries for {l} outputs"
        )));
    }
    Ok((n, d, l))
}

/// Fully connected layer owning its parameters.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weights: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let w = Tensor::from_vec(&[d_in, d_out], kaiming_uniform(d_in, d_in * d_out, rng))
            .expect("shape matches");
        Linear {
            weights: Parameter::new(w),
            bias: Parameter::new(Tensor::zeros(&[d_out])),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        fully_connected(x, &self.weights.value, &self.bias.value)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let (dx, dw, db) = fully_connected_grads(x, &self.weights.value, dy)?;
        self.weights
            .grad
            .data_mut()
            .iter_mut()
            .zip(dw.data())
            .for_each(|(a, b)| *a += b);
        self.bias
            .grad
            .data_mut()
            .iter_mut()
            .zip(db.data())
            .for_each(|(a, b)| *a += b);
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, -1.0, -2.0, -3.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let b = Tensor::zeros(&[3]);
        let y = fully_connected(&x, &w, &b).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn hand_arithmetic_case() {
        // [1, 2] x [[1], [1]] + [1] = [4]
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let y = fully_connected(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let x = Tensor::zeros(&[3, 4]);
        let w = Tensor::full(&[4, 2], 0.7);
        let b = Tensor::from_vec(&[2], vec![0.25, -1.5]).unwrap();
        let y = fully_connected(&x, &w, &b).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, &[0.25, -1.5]);
        }
    }

    #[test]
    fn inner_dim_mismatch_is_dimension_error() {
        let x = Tensor::zeros(&[2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        let b = Tensor::zeros(&[2]);
        assert!(matches!(
            fully_connected(&x, &w, &b),
            Err(Error::Dimension(_))
        ));
    }
}
