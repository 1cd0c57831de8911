//! Batch normalization over `N x C x H x W` tensors with per-feature-map
//! statistics.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// Forward mode shared by batchnorm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel statistics captured during a forward pass, needed by backward.
#[derive(Debug, Clone)]
pub struct BnCtx {
    mean: Vec<f32>,
    inv_std: Vec<f32>,
    mode: Mode,
}

/// Batch normalization layer: learned per-channel scale and shift plus
/// running statistics used in eval mode.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f32,
    pub momentum: f32,
}

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(Tensor::full(&[channels], 1.0)),
            beta: Parameter::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    fn check_input(&self, shape: &[usize]) -> Result<(usize, usize, usize)> {
        if shape.len() != 4 {
            return Err(Error::dimension("batchnorm expects N x C x H x W input"));
        }
        let (n, c) = (shape[0], shape[1]);
        if c != self.gamma.value.len() {
            return Err(Error::dimension(format!(
                "batchnorm has {} channels, input has {c}",
                self.gamma.value.len()
            )));
        }
        Ok((n, c, shape[2] * shape[3]))
    }

    /// Normalizes per channel. Train mode uses batch statistics and updates
    /// the running statistics; eval mode uses the running statistics.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, BnCtx)> {
        let (n, c, plane) = self.check_input(x.shape())?;
        if mode == Mode::Train && n < 2 {
            return Err(Error::degenerate(
                "batchnorm train mode needs a batch of at least 2",
            ));
        }
        let m = n * plane;
        let xd = x.data();

        let (mean, inv_std) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0f32; c];
                let mut var = vec![0.0f32; c];
                for ch in 0..c {
                    let mut acc = 0.0f64;
                    for s in 0..n {
                        let base = (s * c + ch) * plane;
                        for v in &xd[base..base + plane] {
                            acc += *v as f64;
                        }
                    }
                    let mu = acc / m as f64;
                    let mut acc2 = 0.0f64;
                    for s in 0..n {
                        let base = (s * c + ch) * plane;
                        for v in &xd[base..base + plane] {
                            let d = *v as f64 - mu;
                            acc2 += d * d;
                        }
                    }
                    mean[ch] = mu as f32;
                    var[ch] = (acc2 / m as f64) as f32;
                }
                // Running stats track the unbiased variance.
                let unbias = m as f32 / (m as f32 - 1.0).max(1.0);
                for ch in 0..c {
                    self.running_mean.data_mut()[ch] =
                        (1.0 - self.momentum) * self.running_mean.data()[ch]
                            + self.momentum * mean[ch];
                    self.running_var.data_mut()[ch] =
                        (1.0 - self.momentum) * self.running_var.data()[ch]
                            + self.momentum * var[ch] * unbias;
                }
                let inv_std: Vec<f32> =
                    var.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
                (mean, inv_std)
            }
            Mode::Eval => {
                let mean = self.running_mean.data().to_vec();
                let inv_std = self
                    .running_var
                    .data()
                    .iter()
                    .map(|&v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                (mean, inv_std)
            }
        };

        let mut y = Tensor::zeros(x.shape());
        let yd = y.data_mut();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * plane;
                let (mu, istd, g, b) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
                for i in base..base + plane {
                    yd[i] = (xd[i] - mu) * istd * g + b;
                }
            }
        }
        Ok((y, BnCtx { mean, inv_std, mode }))
    }

    /// Accumulates gamma/beta gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, ctx: &BnCtx) -> Result<Tensor> {
        let (n, c, plane) = self.check_input(x.shape())?;
        if dy.shape() != x.shape() {
            return Err(Error::dimension("batchnorm backward: shape mismatch"));
        }
        let m = (n * plane) as f64;
        let (xd, dyd) = (x.data(), dy.data());
        let gamma = self.gamma.value.data();

        let mut dx = Tensor::zeros(x.shape());
        let dxd = dx.data_mut();
        for ch in 0..c {
            let (mu, istd) = (ctx.mean[ch] as f64, ctx.inv_std[ch] as f64);
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for s in 0..n {
                let base = (s * c + ch) * plane;
                for i in base..base + plane {
                    let xhat = (xd[i] as f64 - mu) * istd;
                    sum_dy += dyd[i] as f64;
                    sum_dy_xhat += dyd[i] as f64 * xhat;
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_dy_xhat as f32;
            self.beta.grad.data_mut()[ch] += sum_dy as f32;

            let g = gamma[ch] as f64;
            match ctx.mode {
                Mode::Train => {
                    for s in 0..n {
                        let base = (s * c + ch) * plane;
                        for i in base..base + plane {
                            let xhat = (xd[i] as f64 - mu) * istd;
                            let d = g * istd
                                * (dyd[i] as f64 - sum_dy / m - xhat * sum_dy_xhat / m);
                            dxd[i] = d as f32;
                        }
                    }
                }
                Mode::Eval => {
                    for s in 0..n {
                        let base = (s * c + ch) * plane;
                        for i in base..base + plane {
                            dxd[i] = (dyd[i] as f64 * g * istd) as f32;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}
