//! 2D convolution and transposed convolution with hand-written gradients.
//!
//! Both directions are expressed as im2col/col2im plus one GEMM, which keeps
//! the arithmetic in a single hot kernel. The transposed convolution is the
//! exact adjoint of [`conv2d`]: `<conv2d(a, k), b> == <a, conv_transpose2d(b, k)>`.

use rand::Rng;

use super::gemm::{for_each_chunk, sgemm};
use super::init::kaiming_uniform;
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// Samples per partial-gradient chunk. Fixed so that the reduction order (and
/// therefore the bit pattern of accumulated weight gradients) does not depend
/// on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn col_rows(&self) -> usize {
        self.c_in * self.k * self.k
    }
    fn out_len(&self) -> usize {
        self.c_out * self.oh * self.ow
    }
    fn in_len(&self) -> usize {
        self.c_in * self.h * self.w
    }
}

fn validate_conv(
    input_shape: &[usize],
    kernel_shape: &[usize],
    bias_len: usize,
    stride: usize,
    pad: usize,
) -> Result<ConvGeom> {
    if input_shape.len() != 3 {
        return Err(Error::dimension(format!(
            "conv2d expects a C x H x W input, got shape {input_shape:?}"
        )));
    }
    if kernel_shape.len() != 4 || kernel_shape[2] != kernel_shape[3] {
        return Err(Error::dimension(format!(
            "conv2d expects square C_out x C_in x k x k kernels, got {kernel_shape:?}"
        )));
    }
    let (c_in, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let (c_out, kc_in, k) = (kernel_shape[0], kernel_shape[1], kernel_shape[2]);
    if kc_in != c_in {
        return Err(Error::dimension(format!(
            "input has {c_in} channels but kernels expect {kc_in}"
        )));
    }
    if bias_len != c_out {
        return Err(Error::dimension(format!(
            "bias has {bias_len} entries for {c_out} output channels"
        )));
    }
    if k % 2 == 0 {
        return Err(Error::config(format!("kernel size {k} must be odd")));
    }
    if stride == 0 {
        return Err(Error::config("stride must be at least 1"));
    }
    let oh = (h + 2 * pad).checked_sub(k).map(|v| v / stride + 1);
    let ow = (w + 2 * pad).checked_sub(k).map(|v| v / stride + 1);
    match (oh, ow) {
        (Some(oh), Some(ow)) if oh >= 1 && ow >= 1 => Ok(ConvGeom {
            c_in,
            h,
            w,
            c_out,
            k,
            stride,
            pad,
            oh,
            ow,
        }),
        _ => Err(Error::config(format!(
            "non-positive output dims for input {h}x{w}, kernel {k}, stride {stride}, padding {pad}"
        ))),
    }
}

/// Expands `x` ([c_in, h, w]) into the column matrix [c_in*k*k, oh*ow].
/// `cols` must be zeroed; out-of-bounds (padding) cells are left at zero.
fn im2col(x: &[f32], g: &ConvGeom, cols: &mut [f32]) {
    let span = g.oh * g.ow;
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for di in 0..g.k {
            for dj in 0..g.k {
                let row = (ci * g.k + di) * g.k + dj;
                let out = &mut cols[row * span..(row + 1) * span];
                for oi in 0..g.oh {
                    let ii = (oi * g.stride + di) as isize - g.pad as isize;
                    if ii < 0 || ii >= g.h as isize {
                        continue;
                    }
                    let src_row = &plane[ii as usize * g.w..(ii as usize + 1) * g.w];
                    let dst_row = &mut out[oi * g.ow..(oi + 1) * g.ow];
                    for oj in 0..g.ow {
                        let jj = (oj * g.stride + dj) as isize - g.pad as isize;
                        if jj >= 0 && jj < g.w as isize {
                            dst_row[oj] = src_row[jj as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds the column matrix back into `x_grad`.
fn col2im_add(cols: &[f32], g: &ConvGeom, x_grad: &mut [f32]) {
    let span = g.oh * g.ow;
    for ci in 0..g.c_in {
        let plane = &mut x_grad[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for di in 0..g.k {
            for dj in 0..g.k {
                let row = (ci * g.k + di) * g.k + dj;
                let src = &cols[row * span..(row + 1) * span];
                for oi in 0..g.oh {
                    let ii = (oi * g.stride + di) as isize - g.pad as isize;
                    if ii < 0 || ii >= g.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[ii as usize * g.w..(ii as usize + 1) * g.w];
                    let src_row = &src[oi * g.ow..(oi + 1) * g.ow];
                    for oj in 0..g.ow {
                        let jj = (oj * g.stride + dj) as isize - g.pad as isize;
                        if jj >= 0 && jj < g.w as isize {
                            dst_row[jj as usize] += src_row[oj];
                        }
                    }
                }
            }
        }
    }
}

/// y[co] = sum_ci K[co,ci] * cols(x) + b[co]
fn conv_forward_into(x: &[f32], kmat: &[f32], bias: Option<&[f32]>, g: &ConvGeom, y: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut cols = vec![0.0f32; g.col_rows() * span];
    im2col(x, g, &mut cols);
    sgemm(
        g.c_out,
        g.col_rows(),
        span,
        1.0,
        kmat,
        false,
        &cols,
        false,
        0.0,
        y,
    );
    if let Some(b) = bias {
        for (co, row) in y.chunks_mut(span).enumerate() {
            let bv = b[co];
            row.iter_mut().for_each(|v| *v += bv);
        }
    }
}

/// dx = col2im(K^T * dy); `dx` must be zeroed on entry.
fn conv_dx_into(kmat: &[f32], dy: &[f32], g: &ConvGeom, dx: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut dcols = vec![0.0f32; g.col_rows() * span];
    sgemm(
        g.col_rows(),
        g.c_out,
        span,
        1.0,
        kmat,
        true,
        dy,
        false,
        0.0,
        &mut dcols,
    );
    col2im_add(&dcols, g, dx);
}

/// dk += dy * cols(x)^T ; db += row sums of dy. Accumulates (beta = 1).
fn conv_dk_into(x: &[f32], dy: &[f32], g: &ConvGeom, dk: &mut [f32], db: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut cols = vec![0.0f32; g.col_rows() * span];
    im2col(x, g, &mut cols);
    sgemm(
        g.c_out,
        span,
        g.col_rows(),
        1.0,
        dy,
        false,
        &cols,
        true,
        1.0,
        dk,
    );
    for (co, row) in dy.chunks(span).enumerate() {
        db[co] += row.iter().sum::<f32>();
    }
}

/// Cross-correlation of a `C_in x H x W` input with `C_out x C_in x k x k`
/// kernels plus a per-channel bias.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = validate_conv(input.shape(), kernels.shape(), bias.len(), stride, padding)?;
    let mut y = Tensor::zeros(&[g.c_out, g.oh, g.ow]);
    conv_forward_into(
        input.data(),
        kernels.data(),
        Some(bias.data()),
        &g,
        y.data_mut(),
    );
    Ok(y)
}

/// Gradients of [`conv2d`] w.r.t. input, kernels, and bias given the upstream
/// gradient `d_output`.
pub fn conv2d_grads(
    input: &Tensor,
    kernels: &Tensor,
    d_output: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = validate_conv(
        input.shape(),
        kernels.shape(),
        kernels.shape()[0],
        stride,
        padding,
    )?;
    if d_output.shape() != [g.c_out, g.oh, g.ow] {
        return Err(Error::dimension(format!(
            "conv2d gradient shape {:?} does not match output {:?}",
            d_output.shape(),
            [g.c_out, g.oh, g.ow]
        )));
    }
    let mut dx = Tensor::zeros(input.shape());
    let mut dk = Tensor::zeros(kernels.shape());
    let mut db = Tensor::zeros(&[g.c_out]);
    conv_dx_into(kernels.data(), d_output.data(), &g, dx.data_mut());
    conv_dk_into(
        input.data(),
        d_output.data(),
        &g,
        dk.data_mut(),
        db.data_mut(),
    );
    Ok((dx, dk, db))
}

fn validate_convt(
    input_shape: &[usize],
    kernel_shape: &[usize],
    bias_len: usize,
    stride: usize,
    pad: usize,
    output_hw: Option<(usize, usize)>,
) -> Result<ConvGeom> {
    if input_shape.len() != 3 {
        return Err(Error::dimension(format!(
            "conv_transpose2d expects a C x H x W input, got shape {input_shape:?}"
        )));
    }
    if kernel_shape.len() != 4 || kernel_shape[2] != kernel_shape[3] {
        return Err(Error::dimension(format!(
            "conv_transpose2d expects square C_in x C_out x k x k kernels, got {kernel_shape:?}"
        )));
    }
    let (c_t_in, h_t, w_t) = (input_shape[0], input_shape[1], input_shape[2]);
    let (kc_in, c_t_out, k) = (kernel_shape[0], kernel_shape[1], kernel_shape[2]);
    if kc_in != c_t_in {
        return Err(Error::dimension(format!(
            "input has {c_t_in} channels but transposed kernels expect {kc_in}"
        )));
    }
    if bias_len != c_t_out {
        return Err(Error::dimension(format!(
            "bias has {bias_len} entries for {c_t_out} output channels"
        )));
    }
    if k % 2 == 0 {
        return Err(Error::config(format!("kernel size {k} must be odd")));
    }
    if stride == 0 {
        return Err(Error::config("stride must be at least 1"));
    }
    if h_t == 0 || w_t == 0 {
        return Err(Error::dimension("conv_transpose2d input dims must be positive"));
    }
    // Default output size inverts the conv formula with zero remainder.
    let default_dim = |d: usize| ((d - 1) * stride + k).checked_sub(2 * pad);
    let (oh, ow) = match output_hw {
        Some(hw) => hw,
        None => match (default_dim(h_t), default_dim(w_t)) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => {
                return Err(Error::config(
                    "conv_transpose2d padding exceeds the producible output size",
                ))
            }
        },
    };
    if oh == 0 || ow == 0 {
        return Err(Error::config(
            "conv_transpose2d output dims must be positive",
        ));
    }
    // The forward conv over the requested output shape must reproduce the
    // input shape, otherwise the geometry is inconsistent.
    let g = ConvGeom {
        c_in: c_t_out,
        h: oh,
        w: ow,
        c_out: c_t_in,
        k,
        stride,
        pad,
        oh: h_t,
        ow: w_t,
    };
    let eh = (oh + 2 * pad).checked_sub(k).map(|v| v / stride + 1);
    let ew = (ow + 2 * pad).checked_sub(k).map(|v| v / stride + 1);
    if eh != Some(h_t) || ew != Some(w_t) {
        return Err(Error::dimension(format!(
            "conv_transpose2d cannot map {c_t_in}x{h_t}x{w_t} onto {oh}x{ow} \
             with kernel {k}, stride {stride}, padding {pad}"
        )));
    }
    Ok(g)
}

/// Transposed convolution: the adjoint of [`conv2d`] with the same kernel.
///
/// Kernels are laid out `C_in x C_out x k x k`. When `output_hw` is given it
/// must be a spatial shape that the mirrored forward convolution maps back to
/// the input shape.
pub fn conv_transpose2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    output_hw: Option<(usize, usize)>,
) -> Result<Tensor> {
    let g = validate_convt(
        input.shape(),
        kernels.shape(),
        bias.len(),
        stride,
        padding,
        output_hw,
    )?;
    let mut y = Tensor::zeros(&[g.c_in, g.h, g.w]);
    convt_forward_into(
        input.data(),
        kernels.data(),
        Some(bias.data()),
        &g,
        y.data_mut(),
    );
    Ok(y)
}

/// y = col2im(K^T-matmul over input) + bias. `y` must be zeroed on entry.
/// Here `g` describes the *mirror* convolution (y -> x).
fn convt_forward_into(x: &[f32], kmat: &[f32], bias: Option<&[f32]>, g: &ConvGeom, y: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut cols = vec![0.0f32; g.col_rows() * span];
    // kernels stored [c_t_in = g.c_out, c_t_out*k*k = col_rows] after reshape
    sgemm(
        g.col_rows(),
        g.c_out,
        span,
        1.0,
        kmat,
        true,
        x,
        false,
        0.0,
        &mut cols,
    );
    col2im_add(&cols, g, y);
    if let Some(b) = bias {
        let plane = g.h * g.w;
        for (co, row) in y.chunks_mut(plane).enumerate() {
            let bv = b[co];
            row.iter_mut().for_each(|v| *v += bv);
        }
    }
}

/// dx of the transposed convolution = forward conv of dy with the kernel.
fn convt_dx_into(kmat: &[f32], dy: &[f32], g: &ConvGeom, dx: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut cols = vec![0.0f32; g.col_rows() * span];
    im2col(dy, g, &mut cols);
    sgemm(
        g.c_out,
        g.col_rows(),
        span,
        1.0,
        kmat,
        false,
        &cols,
        false,
        0.0,
        dx,
    );
}

/// dk += x * cols(dy)^T ; db += per-channel sums of dy. Accumulates.
fn convt_dk_into(x: &[f32], dy: &[f32], g: &ConvGeom, dk: &mut [f32], db: &mut [f32]) {
    let span = g.oh * g.ow;
    let mut cols = vec![0.0f32; g.col_rows() * span];
    im2col(dy, g, &mut cols);
    sgemm(
        g.c_out,
        span,
        g.col_rows(),
        1.0,
        x,
        false,
        &cols,
        true,
        1.0,
        dk,
    );
    let plane = g.h * g.w;
    for (co, row) in dy.chunks(plane).enumerate() {
        db[co] += row.iter().sum::<f32>();
    }
}

/// Gradients of [`conv_transpose2d`] w.r.t. input, kernels, and bias.
pub fn conv_transpose2d_grads(
    input: &Tensor,
    kernels: &Tensor,
    d_output: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    if d_output.shape().len() != 3 {
        return Err(Error::dimension("conv_transpose2d gradient must be 3D"));
    }
    let g = validate_convt(
        input.shape(),
        kernels.shape(),
        kernels.shape()[1],
        stride,
        padding,
        Some((d_output.shape()[1], d_output.shape()[2])),
    )?;
    if d_output.shape()[0] != g.c_in {
        return Err(Error::dimension(format!(
            "conv_transpose2d gradient has {} channels, expected {}",
            d_output.shape()[0],
            g.c_in
        )));
    }
    let mut dx = Tensor::zeros(input.shape());
    let mut dk = Tensor::zeros(kernels.shape());
    let mut db = Tensor::zeros(&[g.c_in]);
    convt_dx_into(kernels.data(), d_output.data(), &g, dx.data_mut());
    convt_dk_into(
        input.data(),
        d_output.data(),
        &g,
        dk.data_mut(),
        db.data_mut(),
    );
    Ok((dx, dk, db))
}

/// Convolution layer over batched `N x C x H x W` tensors.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub kernels: Parameter,
    pub bias: Parameter,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::config(format!("kernel size {kernel} must be odd")));
        }
        let fan_in = c_in * kernel * kernel;
        let kernels = Tensor::from_vec(
            &[c_out, c_in, kernel, kernel],
            kaiming_uniform(fan_in, c_out * c_in * kernel * kernel, rng),
        )?;
        Ok(Conv2d {
            kernels: Parameter::new(kernels),
            bias: Parameter::new(Tensor::zeros(&[c_out])),
            stride,
            padding,
        })
    }

    fn geom(&self, x_shape: &[usize]) -> Result<ConvGeom> {
        if x_shape.len() != 4 {
            return Err(Error::dimension("batched conv input must be N x C x H x W"));
        }
        validate_conv(
            &x_shape[1..],
            self.kernels.value.shape(),
            self.bias.value.len(),
            self.stride,
            self.padding,
        )
    }

    pub fn forward_batch(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geom(x.shape())?;
        let n = x.shape()[0];
        let mut y = Tensor::zeros(&[n, g.c_out, g.oh, g.ow]);
        let (in_len, out_len) = (g.in_len(), g.out_len());
        let (kmat, bias) = (self.kernels.value.data(), self.bias.value.data());
        let xd = x.data();
        for_each_chunk(y.data_mut(), out_len, |i, y_slice| {
            conv_forward_into(&xd[i * in_len..(i + 1) * in_len], kmat, Some(bias), &g, y_slice);
        });
        Ok(y)
    }

    /// Accumulates kernel/bias gradients and returns the input gradient.
    pub fn backward_batch(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let g = self.geom(x.shape())?;
        let n = x.shape()[0];
        if dy.shape() != [n, g.c_out, g.oh, g.ow] {
            return Err(Error::dimension("conv backward: gradient shape mismatch"));
        }
        let (in_len, out_len) = (g.in_len(), g.out_len());
        let kmat = self.kernels.value.data();
        let (xd, dyd) = (x.data(), dy.data());

        let mut dx = Tensor::zeros(x.shape());
        for_each_chunk(dx.data_mut(), in_len, |i, dx_slice| {
            conv_dx_into(kmat, &dyd[i * out_len..(i + 1) * out_len], &g, dx_slice);
        });

        let dk_len = self.kernels.value.len();
        let db_len = self.bias.value.len();
        let part_len = dk_len + db_len;
        let n_chunks = n.div_ceil(GRAD_CHUNK);
        let mut partials = vec![0.0f32; n_chunks * part_len];
        for_each_chunk(&mut partials, part_len, |c, part| {
            let (dk, db) = part.split_at_mut(dk_len);
            for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n) {
                conv_dk_into(
                    &xd[i * in_len..(i + 1) * in_len],
                    &dyd[i * out_len..(i + 1) * out_len],
                    &g,
                    dk,
                    db,
                );
            }
        });
        // Reduce partials in chunk order: deterministic for any thread count.
        for part in partials.chunks(part_len) {
            let (dk, db) = part.split_at(dk_len);
            self.kernels
                .grad
                .data_mut()
                .iter_mut()
                .zip(dk)
                .for_each(|(a, b)| *a += b);
            self.bias
                .grad
                .data_mut()
                .iter_mut()
                .zip(db)
                .for_each(|(a, b)| *a += b);
        }
        Ok(dx)
    }
}

/// Transposed-convolution layer over batched `N x C x H x W` tensors.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub kernels: Parameter,
    pub bias: Parameter,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::config(format!("kernel size {kernel} must be odd")));
        }
        let fan_in = c_in * kernel * kernel;
        let kernels = Tensor::from_vec(
            &[c_in, c_out, kernel, kernel],
            kaiming_uniform(fan_in, c_in * c_out * kernel * kernel, rng),
        )?;
        Ok(ConvTranspose2d {
            kernels: Parameter::new(kernels),
            bias: Parameter::new(Tensor::zeros(&[c_out])),
            stride,
            padding,
        })
    }

    fn geom(&self, x_shape: &[usize], out_hw: (usize, usize)) -> Result<ConvGeom> {
        if x_shape.len() != 4 {
            return Err(Error::dimension(
                "batched conv_transpose input must be N x C x H x W",
            ));
        }
        validate_convt(
            &x_shape[1..],
            self.kernels.value.shape(),
            self.bias.value.len(),
            self.stride,
            self.padding,
            Some(out_hw),
        )
    }

    pub fn forward_batch(&self, x: &Tensor, out_hw: (usize, usize)) -> Result<Tensor> {
        let g = self.geom(x.shape(), out_hw)?;
        let n = x.shape()[0];
        let mut y = Tensor::zeros(&[n, g.c_in, g.h, g.w]);
        let in_len = g.out_len(); // mirror: convT input is the conv output side
        let out_len = g.in_len();
        let (kmat, bias) = (self.kernels.value.data(), self.bias.value.data());
        let xd = x.data();
        for_each_chunk(y.data_mut(), out_len, |i, y_slice| {
            convt_forward_into(&xd[i * in_len..(i + 1) * in_len], kmat, Some(bias), &g, y_slice);
        });
        Ok(y)
    }

    /// Accumulates kernel/bias gradients and returns the input gradient.
    pub fn backward_batch(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        if dy.shape().len() != 4 {
            return Err(Error::dimension("conv_transpose backward: 4D gradient"));
        }
        let g = self.geom(x.shape(), (dy.shape()[2], dy.shape()[3]))?;
        let n = x.shape()[0];
        if dy.shape() != [n, g.c_in, g.h, g.w] {
            return Err(Error::dimension(
                "conv_transpose backward: gradient shape mismatch",
            ));
        }
        let in_len = g.out_len();
        let out_len = g.in_len();
        let kmat = self.kernels.value.data();
        let (xd, dyd) = (x.data(), dy.data());

        let mut dx = Tensor::zeros(x.shape());
        for_each_chunk(dx.data_mut(), in_len, |i, dx_slice| {
            convt_dx_into(kmat, &dyd[i * out_len..(i + 1) * out_len], &g, dx_slice);
        });

        let dk_len = self.kernels.value.len();
        let db_len = self.bias.value.len();
        let part_len = dk_len + db_len;
        let n_chunks = n.div_ceil(GRAD_CHUNK);
        let mut partials = vec![0.0f32; n_chunks * part_len];
        for_each_chunk(&mut partials, part_len, |c, part| {
            let (dk, db) = part.split_at_mut(dk_len);
            for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n) {
                convt_dk_into(
                    &xd[i * in_len..(i + 1) * in_len],
                    &dyd[i * out_len..(i + 1) * out_len],
                    &g,
                    dk,
                    db,
                );
            }
        });
        for part in partials.chunks(part_len) {
            let (dk, db) = part.split_at(dk_len);
            self.kernels
                .grad
                .data_mut()
                .iter_mut()
                .zip(dk)
                .for_each(|(a, b)| *a += b);
            self.bias
                .grad
                .data_mut()
                .iter_mut()
                .zip(db)
                .for_each(|(a, b)| *a += b);
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct-summation reference convolution (independent of the GEMM path).
    fn naive_conv2d(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (c_out, kk) = (k.shape()[0], k.shape()[2]);
        let oh = (h + 2 * pad - kk) / stride + 1;
        let ow = (w + 2 * pad - kk) / stride + 1;
        let mut y = Tensor::zeros(&[c_out, oh, ow]);
        for co in 0..c_out {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut acc = b.data()[co] as f64;
                    for ci in 0..c_in {
                        for di in 0..kk {
                            for dj in 0..kk {
                                let ii = (oi * stride + di) as isize - pad as isize;
                                let jj = (oj * stride + dj) as isize - pad as isize;
                                if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                                    let xv = x.data()[(ci * h + ii as usize) * w + jj as usize];
                                    let kv = k.data()[((co * c_in + ci) * kk + di) * kk + dj];
                                    acc += xv as f64 * kv as f64;
                                }
                            }
                        }
                    }
                    y.data_mut()[(co * oh + oi) * ow + oj] = acc as f32;
                }
            }
        }
        y
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor::from_vec(&[1, 2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, -6.0]).unwrap();
        let k = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y, x);
        let yt = conv_transpose2d(&x, &k, &b, 1, 0, None).unwrap();
        assert_eq!(yt, x);
    }

    #[test]
    fn all_ones_window_sums_to_nine() {
        let x = Tensor::full(&[1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
        // direct-summation oracle agrees
        let oracle = naive_conv2d(&x, &k, &b, 1, 0);
        assert_eq!(oracle.data(), y.data());
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let x = Tensor::zeros(&[2, 4, 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = random_tensor(&[3, 2, 3, 3], &mut rng);
        let b = Tensor::from_vec(&[3], vec![0.5, -1.25, 2.0]).unwrap();
        let y = conv2d(&x, &k, &b, 1, 1).unwrap();
        for (co, plane) in y.data().chunks(4 * 5).enumerate() {
            assert!(plane.iter().all(|&v| v == b.data()[co]));
        }
        let yt = conv_transpose2d(
            &Tensor::zeros(&[3, 4, 5]),
            &random_tensor(&[3, 2, 3, 3], &mut rng),
            &Tensor::from_vec(&[2], vec![1.0, -3.0]).unwrap(),
            1,
            1,
            None,
        )
        .unwrap();
        for (co, plane) in yt.data().chunks(4 * 5).enumerate() {
            assert!(plane.iter().all(|&v| v == [1.0, -3.0][co]));
        }
    }

    #[test]
    fn gemm_path_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(c_in, h, w, c_out, k, stride, pad) in &[
            (1usize, 5usize, 6usize, 2usize, 3usize, 1usize, 1usize),
            (2, 7, 4, 3, 3, 2, 1),
            (3, 4, 4, 1, 3, 1, 0),
        ] {
            let x = random_tensor(&[c_in, h, w], &mut rng);
            let ks = random_tensor(&[c_out, c_in, k, k], &mut rng);
            let b = random_tensor(&[c_out], &mut rng);
            let fast = conv2d(&x, &ks, &b, stride, pad).unwrap();
            let slow = naive_conv2d(&x, &ks, &b, stride, pad);
            for (a, o) in fast.data().iter().zip(slow.data()) {
                assert!((a - o).abs() < 1e-4, "{a} vs {o}");
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(c_in, h, w, c_out, k, stride, pad) in &[
            (2usize, 6usize, 5usize, 3usize, 3usize, 1usize, 1usize),
            (1, 8, 8, 2, 3, 2, 1),
            (3, 5, 5, 2, 3, 1, 0),
        ] {
            let a = random_tensor(&[c_in, h, w], &mut rng);
            let kernels = random_tensor(&[c_out, c_in, k, k], &mut rng);
            let zero_out = Tensor::zeros(&[c_out]);
            let zero_in = Tensor::zeros(&[c_in]);
            let conv_a = conv2d(&a, &kernels, &zero_out, stride, pad).unwrap();
            let b = random_tensor(conv_a.shape(), &mut rng);
            let convt_b = conv_transpose2d(&b, &kernels, &zero_in, stride, pad, Some((h, w))).unwrap();
            let lhs = conv_a.dot(&b);
            let rhs = a.dot(&convt_b);
            let denom = lhs.abs().max(rhs.abs()).max(1e-8);
            assert!(
                ((lhs - rhs) / denom).abs() < 1e-4,
                "adjoint mismatch: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(
            conv2d(&x, &k, &b, 1, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn non_positive_output_is_config_error() {
        let x = Tensor::zeros(&[1, 2, 2]);
        let k = Tensor::zeros(&[1, 1, 5, 5]);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(conv2d(&x, &k, &b, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn batched_forward_matches_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = Conv2d::new(2, 4, 3, 1, 1, &mut rng).unwrap();
        let x = random_tensor(&[3, 2, 5, 6], &mut rng);
        let y = layer.forward_batch(&x).unwrap();
        for i in 0..3 {
            let xi = Tensor::from_vec(&[2, 5, 6], x.data()[i * 60..(i + 1) * 60].to_vec()).unwrap();
            let yi = conv2d(&xi, &layer.kernels.value, &layer.bias.value, 1, 1).unwrap();
            assert_eq!(&y.data()[i * 120..(i + 1) * 120], yi.data());
        }
    }
}
