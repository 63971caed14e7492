//! Dense tensor types, shape arithmetic, flattening conventions and the
//! classical convolution oracle used as ground truth everywhere else.
//!
//! Flattening is fixed once for the whole crate: inputs flatten row-major as
//! `(i, j, k) -> i*W*C + j*C + k`, outputs as `(ie, jf, dm) -> dm*E*F + ie*F + jf`
//! so that each filter's E x F feature map is contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full description of one convolution configuration, with derived output
/// dimensions computed at construction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvShape {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub r: usize,
    pub s: usize,
    pub m: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub e: usize,
    pub f: usize,
}

/// Output spatial dimensions for one axis: `floor((len + 2*pad - kernel)/stride) + 1`.
fn out_dim(len: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if kernel > padded {
        return Err(Error::shape(format!(
            "kernel extent {kernel} exceeds padded input extent {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Derive output height/width from input and kernel extents.
/// With stride 1 and no padding this is (H - R + 1, W - S + 1).
pub fn derive_output_shape(
    h: usize,
    w: usize,
    r: usize,
    s: usize,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize)> {
    if h < 1 || w < 1 || r < 1 || s < 1 {
        return Err(Error::shape("all spatial extents must be >= 1"));
    }
    if stride < 1 {
        return Err(Error::shape("stride must be >= 1"));
    }
    Ok((out_dim(h, r, stride, pad)?, out_dim(w, s, stride, pad)?))
}

impl ConvShape {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        h: usize,
        w: usize,
        c: usize,
        r: usize,
        s: usize,
        m: usize,
        stride_h: usize,
        stride_w: usize,
        pad_h: usize,
        pad_w: usize,
    ) -> Result<Self> {
        if [n, h, w, c, r, s, m].iter().any(|&d| d < 1) {
            return Err(Error::shape("all of N, H, W, C, R, S, M must be >= 1"));
        }
        if stride_h < 1 || stride_w < 1 {
            return Err(Error::shape("strides must be >= 1"));
        }
        let e = out_dim(h, r, stride_h, pad_h)?;
        let f = out_dim(w, s, stride_w, pad_w)?;
        Ok(ConvShape {
            n,
            h,
            w,
            c,
            r,
            s,
            m,
            stride_h,
            stride_w,
            pad_h,
            pad_w,
            e,
            f,
        })
    }

    /// Stride-1, zero-padding shape of the baseline configuration.
    #[allow(clippy::too_many_arguments)]
    pub fn unit_stride(
        n: usize,
        h: usize,
        w: usize,
        c: usize,
        r: usize,
        s: usize,
        m: usize,
    ) -> Result<Self> {
        ConvShape::new(n, h, w, c, r, s, m, 1, 1, 0, 0)
    }

    pub fn hwc(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn efm(&self) -> usize {
        self.e * self.f * self.m
    }

    /// Input column index for flattened pixel (i, j, k).
    pub fn input_index(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.w * self.c + j * self.c + k
    }

    /// Output row index for flattened entry (ie, jf, dm); dM-major so each
    /// filter's feature map occupies a contiguous block.
    pub fn output_index(&self, ie: usize, jf: usize, dm: usize) -> usize {
        dm * self.e * self.f + ie * self.f + jf
    }

    /// Inverse of [`ConvShape::output_index`].
    pub fn output_coords(&self, p: usize) -> (usize, usize, usize) {
        let ef = self.e * self.f;
        let dm = p / ef;
        let rem = p % ef;
        (rem / self.f, rem % self.f, dm)
    }
}

/// Row-major 4-D tensor with its shape; the serialized form of every tensor
/// file the CLI reads and writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::shape(format!(
                "tensor data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                len
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse("tensor contains non-finite values"));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        let len = shape.iter().product();
        Tensor4 {
            shape,
            data: vec![0.0; len],
        }
    }

    #[inline]
    pub fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.shape[1] + b) * self.shape[2] + c) * self.shape[3] + d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[self.idx(a, b, c, d)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let i = self.idx(a, b, c, d);
        self.data[i] = v;
    }
}

/// A batch of input images, shape (N, H, W, C).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputBatch(pub Tensor4);

impl InputBatch {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        Ok(InputBatch(Tensor4::new(shape, data)?))
    }

    pub fn n(&self) -> usize {
        self.0.shape[0]
    }
    pub fn h(&self) -> usize {
        self.0.shape[1]
    }
    pub fn w(&self) -> usize {
        self.0.shape[2]
    }
    pub fn c(&self) -> usize {
        self.0.shape[3]
    }

    #[inline]
    pub fn get(&self, n: usize, i: usize, j: usize, k: usize) -> f64 {
        self.0.get(n, i, j, k)
    }

    /// Pixel lookup with zero-padding semantics: out-of-range (i, j) reads 0.
    #[inline]
    pub fn get_padded(&self, n: usize, i: isize, j: isize, k: usize) -> f64 {
        if i < 0 || j < 0 || i as usize >= self.h() || j as usize >= self.w() {
            0.0
        } else {
            self.0.get(n, i as usize, j as usize, k)
        }
    }
}

/// A bank of filters, shape (R, S, C, M).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBank(pub Tensor4);

impl KernelBank {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        Ok(KernelBank(Tensor4::new(shape, data)?))
    }

    pub fn r(&self) -> usize {
        self.0.shape[0]
    }
    pub fn s(&self) -> usize {
        self.0.shape[1]
    }
    pub fn c(&self) -> usize {
        self.0.shape[2]
    }
    pub fn m(&self) -> usize {
        self.0.shape[3]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, d: usize) -> f64 {
        self.0.get(i, j, k, d)
    }
}

/// Convolution outputs, shape (N, E, F, M).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputBatch(pub Tensor4);

impl OutputBatch {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        Ok(OutputBatch(Tensor4::new(shape, data)?))
    }

    pub fn zeros(n: usize, e: usize, f: usize, m: usize) -> Self {
        OutputBatch(Tensor4::zeros([n, e, f, m]))
    }

    pub fn n(&self) -> usize {
        self.0.shape[0]
    }
    pub fn e(&self) -> usize {
        self.0.shape[1]
    }
    pub fn f(&self) -> usize {
        self.0.shape[2]
    }
    pub fn m(&self) -> usize {
        self.0.shape[3]
    }

    #[inline]
    pub fn get(&self, n: usize, ie: usize, jf: usize, dm: usize) -> f64 {
        self.0.get(n, ie, jf, dm)
    }

    #[inline]
    pub fn set(&mut self, n: usize, ie: usize, jf: usize, dm: usize, v: f64) {
        self.0.set(n, ie, jf, dm, v);
    }
}

/// Simple dense row-major matrix; holds flattened inputs (HWC x N) and flat
/// outputs (EFM x N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

fn check_dims(x: &InputBatch, k: &KernelBank, shape: &ConvShape) -> Result<()> {
    if x.n() != shape.n || x.h() != shape.h || x.w() != shape.w || x.c() != shape.c {
        return Err(Error::shape(format!(
            "input shape {:?} inconsistent with configuration (N={}, H={}, W={}, C={})",
            x.0.shape, shape.n, shape.h, shape.w, shape.c
        )));
    }
    if k.r() != shape.r || k.s() != shape.s || k.c() != shape.c || k.m() != shape.m {
        return Err(Error::shape(format!(
            "kernel shape {:?} inconsistent with configuration (R={}, S={}, C={}, M={})",
            k.0.shape, shape.r, shape.s, shape.c, shape.m
        )));
    }
    Ok(())
}

/// Classical triple-loop convolution, the ground-truth oracle for every
/// quantum estimate in the crate. Out-of-bounds input reads are zeros.
pub fn conv_reference(x: &InputBatch, k: &KernelBank, shape: &ConvShape) -> Result<OutputBatch> {
    check_dims(x, k, shape)?;
    let mut y = OutputBatch::zeros(shape.n, shape.e, shape.f, shape.m);
    for n in 0..shape.n {
        for ie in 0..shape.e {
            for jf in 0..shape.f {
                for dm in 0..shape.m {
                    let mut acc = 0.0;
                    for i in 0..shape.r {
                        for j in 0..shape.s {
                            for kc in 0..shape.c {
                                let ii = (ie * shape.stride_h + i) as isize - shape.pad_h as isize;
                                let jj = (jf * shape.stride_w + j) as isize - shape.pad_w as isize;
                                acc += x.get_padded(n, ii, jj, kc) * k.get(i, j, kc, dm);
                            }
                        }
                    }
                    y.set(n, ie, jf, dm, acc);
                }
            }
        }
    }
    Ok(y)
}

/// Flatten a batch into an HWC x N matrix, column q holding image q in the
/// canonical row-major order.
pub fn flatten_input(x: &InputBatch) -> DenseMatrix {
    let (n, h, w, c) = (x.n(), x.h(), x.w(), x.c());
    let mut m = DenseMatrix::zeros(h * w * c, n);
    for q in 0..n {
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    m.set(i * w * c + j * c + k, q, x.get(q, i, j, k));
                }
            }
        }
    }
    m
}

/// Inverse of [`flatten_input`].
pub fn unflatten_input(m: &DenseMatrix, h: usize, w: usize, c: usize) -> Result<InputBatch> {
    if m.rows != h * w * c {
        return Err(Error::shape(format!(
            "matrix has {} rows, expected H*W*C = {}",
            m.rows,
            h * w * c
        )));
    }
    let n = m.cols;
    let mut t = Tensor4::zeros([n, h, w, c]);
    for q in 0..n {
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    t.set(q, i, j, k, m.get(i * w * c + j * c + k, q));
                }
            }
        }
    }
    Ok(InputBatch(t))
}

/// Flatten outputs into an EFM x N matrix using the dM-major row order.
pub fn flatten_output(y: &OutputBatch, shape: &ConvShape) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(shape.efm(), y.n());
    for q in 0..y.n() {
        for ie in 0..shape.e {
            for jf in 0..shape.f {
                for dm in 0..shape.m {
                    m.set(shape.output_index(ie, jf, dm), q, y.get(q, ie, jf, dm));
                }
            }
        }
    }
    m
}
