//! Dense row-major `f32` tensors and the kernels the model is built from.
//!
//! Kernels are pure functions. None of them broadcast beyond what their
//! signature states, and all of them run in a fixed summation order so that
//! identical inputs give identical bytes.

mod gemm;

pub(crate) use gemm::PackedB;

use crate::error::{Error, Result};

/// Dense n-dimensional array of `f32` values in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// `n × n` identity matrix.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::new(shape.to_vec(), self.data)
    }

    /// Size of the last axis (1 for a scalar).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, alpha: f32) -> Tensor {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise sum of two tensors of identical shape.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "add_assign",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Largest absolute elementwise difference; `None` when shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> Option<f32> {
        if self.shape != other.shape {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f32::max),
        )
    }

    /// Reorder a `[H, W, C]` tensor to `[C, H, W]`.
    pub fn hwc_to_chw(&self) -> Result<Tensor> {
        let [h, w, c] = dims3(self, "hwc_to_chw")?;
        let mut out = vec![0.0; self.len()];
        for y in 0..h {
            for x in 0..w {
                let src = &self.data[(y * w + x) * c..(y * w + x + 1) * c];
                for (ch, &v) in src.iter().enumerate() {
                    out[(ch * h + y) * w + x] = v;
                }
            }
        }
        Tensor::new(vec![c, h, w], out)
    }

    /// Reorder a `[C, H, W]` tensor to `[H, W, C]`.
    pub fn chw_to_hwc(&self) -> Result<Tensor> {
        let [c, h, w] = dims3(self, "chw_to_hwc")?;
        let mut out = vec![0.0; self.len()];
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    out[(y * w + x) * c + ch] = self.data[(ch * h + y) * w + x];
                }
            }
        }
        Tensor::new(vec![h, w, c], out)
    }
}

pub(crate) fn dims3(t: &Tensor, op: &'static str) -> Result<[usize; 3]> {
    match *t.shape() {
        [a, b, c] => Ok([a, b, c]),
        ref s => Err(Error::shape(op, format!("expected rank 3, got {s:?}"))),
    }
}

/// Matrix product `[m, k] × [k, n] → [m, n]`, summed sequentially over `k`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = match (a.shape(), b.shape()) {
        (&[m, k], &[k2, n]) if k == k2 => (m, k, n),
        (sa, sb) => {
            return Err(Error::shape(
                "matmul",
                format!("cannot multiply {sa:?} by {sb:?}"),
            ))
        }
    };
    let packed = PackedB::pack(b.data(), k, n);
    let mut out = vec![0.0; m * n];
    gemm::gemm(a.data(), m, &packed, &mut out);
    Tensor::new(vec![m, n], out)
}

/// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
pub fn matmul_transposed(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = match (a.shape(), b.shape()) {
        (&[m, k], &[n, k2]) if k == k2 => (m, k, n),
        (sa, sb) => {
            return Err(Error::shape(
                "matmul_transposed",
                format!("cannot multiply {sa:?} by transpose of {sb:?}"),
            ))
        }
    };
    let packed = PackedB::pack_transposed(b.data(), n, k);
    let mut out = vec![0.0; m * n];
    gemm::gemm(a.data(), m, &packed, &mut out);
    Tensor::new(vec![m, n], out)
}

/// In-place numerically stable softmax over consecutive rows of `cols` values.
///
/// Entries equal to `-inf` come out as exactly 0. A row made only of `-inf`
/// becomes uniform.
pub fn softmax_rows_inplace(data: &mut [f32], cols: usize) {
    if cols == 0 {
        return;
    }
    for row in data.chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if max == f32::NEG_INFINITY {
            row.fill(1.0 / cols as f32);
            continue;
        }
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
}

/// Softmax applied independently to each row of an `[r, c]` tensor.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::shape(
            "softmax_rows",
            format!("expected rank 2, got {:?}", x.shape()),
        ));
    }
    let mut out = x.clone();
    let cols = x.shape()[1];
    softmax_rows_inplace(out.data_mut(), cols);
    Ok(out)
}

/// Layer normalization over the last axis, followed by `gamma ⊙ x + beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
    let c = x.last_dim();
    if x.rank() == 0 || gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(
            "layer_norm",
            format!(
                "input {:?}, gamma {:?}, beta {:?}",
                x.shape(),
                gamma.shape(),
                beta.shape()
            ),
        ));
    }
    let mut out = x.clone();
    let (g, b) = (gamma.data(), beta.data());
    for row in out.data_mut().chunks_exact_mut(c) {
        let mean = row.iter().sum::<f32>() / c as f32;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / c as f32;
        let inv = 1.0 / (var + eps).sqrt();
        for (i, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * g[i] + b[i];
        }
    }
    Ok(out)
}

const GELU_SQRT_2_OVER_PI: f32 = 0.797_884_6;
const GELU_CUBIC: f32 = 0.044_715;

/// Tanh-approximated GELU: `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
pub fn gelu_scalar(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Affine map on the last axis: `x[.., in] · w[in, out] + b[out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let packed = pack_linear(w, "linear")?;
    linear_packed(x, &packed, b)
}

pub(crate) fn pack_linear(w: &Tensor, op: &'static str) -> Result<PackedB> {
    match *w.shape() {
        [k, n] => Ok(PackedB::pack(w.data(), k, n)),
        ref s => Err(Error::shape(op, format!("weight must be rank 2, got {s:?}"))),
    }
}

pub(crate) fn linear_packed(x: &Tensor, w: &PackedB, b: Option<&Tensor>) -> Result<Tensor> {
    let n = w.n();
    let k = x.last_dim();
    if x.rank() == 0 || !x.len().is_multiple_of(k.max(1)) || w.k() != k {
        return Err(Error::shape(
            "linear",
            format!("input {:?} against weight [{}, {n}]", x.shape(), w.k()),
        ));
    }
    if let Some(b) = b {
        if b.shape() != [n] {
            return Err(Error::shape(
                "linear",
                format!("bias {:?}, expected [{n}]", b.shape()),
            ));
        }
    }
    let m = if k == 0 { 0 } else { x.len() / k };
    let mut out = vec![0.0; m * n];
    gemm::gemm(x.data(), m, w, &mut out);
    if let Some(b) = b {
        for row in out.chunks_exact_mut(n) {
            for (o, bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = n;
    Tensor::new(shape, out)
}

/// Output size of a convolution axis, if integral and positive.
fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if stride == 0 || padded < k || !(padded - k).is_multiple_of(stride) {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// 2D cross-correlation with zero padding.
///
/// `x: [C_in, H, W]`, `w: [C_out, C_in, kh, kw]`, `b: [C_out]`. Each output
/// is `b + Σ_{ci, ky, kx} w·x` summed in `(ci, ky, kx)` order.
pub fn conv2d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let [cin, h, wd] = dims3(x, "conv2d")?;
    let (cout, kh, kw) = match *w.shape() {
        [co, ci, kh, kw] if ci == cin && kh % 2 == 1 && kw % 2 == 1 => (co, kh, kw),
        ref s => {
            return Err(Error::shape(
                "conv2d",
                format!("weight {s:?} incompatible with input {:?} (odd kernel required)", x.shape()),
            ))
        }
    };
    if b.shape() != [cout] {
        return Err(Error::shape("conv2d", format!("bias {:?}", b.shape())));
    }
    let (oh, ow) = match (conv_out(h, kh, stride, pad), conv_out(wd, kw, stride, pad)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::shape(
                "conv2d",
                format!("non-integral output for {h}x{wd}, kernel {kh}x{kw}, stride {stride}, pad {pad}"),
            ))
        }
    };
    let k = cin * kh * kw;
    // w is [cout, k] row-major, i.e. the transpose of the [k, cout] rhs.
    let packed = PackedB::pack_transposed(w.data(), cout, k);
    let npix = oh * ow;
    let mut out = vec![0.0f32; cout * npix];
    const CHUNK: usize = 256;
    let mut patches = vec![0.0f32; CHUNK * k];
    let mut prod = vec![0.0f32; CHUNK * cout];
    let xd = x.data();
    let mut p0 = 0;
    while p0 < npix {
        let rows = CHUNK.min(npix - p0);
        for r in 0..rows {
            let p = p0 + r;
            let (oy, ox) = (p / ow, p % ow);
            let dst = &mut patches[r * k..(r + 1) * k];
            let mut idx = 0;
            for ci in 0..cin {
                let plane = &xd[ci * h * wd..(ci + 1) * h * wd];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        dst[idx] = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                            plane[iy as usize * wd + ix as usize]
                        } else {
                            0.0
                        };
                        idx += 1;
                    }
                }
            }
        }
        gemm::gemm(&patches[..rows * k], rows, &packed, &mut prod[..rows * cout]);
        for r in 0..rows {
            for co in 0..cout {
                out[co * npix + p0 + r] = prod[r * cout + co] + b.data()[co];
            }
        }
        p0 += rows;
    }
    Tensor::new(vec![cout, oh, ow], out)
}

/// Nearest-neighbour 2× upsampling of `[C, H, W]`.
pub fn upsample_nearest2x(x: &Tensor) -> Result<Tensor> {
    let [c, h, w] = dims3(x, "upsample_nearest2x")?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * oh * ow];
    let xd = x.data();
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                out[(ch * oh + y) * ow + xx] = xd[(ch * h + y / 2) * w + xx / 2];
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// 2×2 max pooling with stride 2. Odd trailing rows/columns pool over the
/// cells that exist (equivalent to `-inf` padding on the far edge).
pub fn maxpool2(x: &Tensor) -> Result<Tensor> {
    let [c, h, w] = dims3(x, "maxpool2")?;
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = vec![f32::NEG_INFINITY; c * oh * ow];
    let xd = x.data();
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let o = &mut out[(ch * oh + y / 2) * ow + xx / 2];
                *o = o.max(xd[(ch * h + y) * w + xx]);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}
