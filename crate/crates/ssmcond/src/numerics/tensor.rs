//! Rank-2 time-major tensor and the dense kernels built on it.
//!
//! `SeqTensor` is the universal carrier for every sequence in the engine:
//! rows are time steps, columns are features, storage is row-major f64.
//! Kernels come in two flavors: spec-level operations returning `Result`
//! with explicit dimension errors (`linear_apply`, `depthwise_conv1d`,
//! `layer_norm`), and infallible internal kernels that panic on shape bugs.

use crate::error::{Error, Result};
use crate::numerics::audit;

/// Padding mode for depthwise 1-D convolution over the time axis.
///
/// `Causal` pads k-1 zeros on the left only (streaming-compatible);
/// `Same` pads symmetrically by replicating edge frames, so constant
/// inputs stay constant through the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Causal,
    Same,
}

/// Rank-2 real tensor, time-major (rows = time steps, cols = features).
#[derive(Debug, PartialEq)]
pub struct SeqTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Clone for SeqTensor {
    fn clone(&self) -> Self {
        SeqTensor::from_vec(self.rows, self.cols, self.data.clone())
    }
}

impl Drop for SeqTensor {
    fn drop(&mut self) {
        audit::unregister(self.data.len());
    }
}

impl SeqTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} != {}x{}",
            data.len(),
            rows,
            cols
        );
        audit::register(data.len());
        SeqTensor { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            for c in 0..cols {
                data.push(f(t, c));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    /// Single row as a 1xc tensor.
    pub fn row_tensor(row: &[f64]) -> Self {
        Self::from_vec(1, row.len(), row.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, t: usize, c: usize, v: f64) {
        self.data[t * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &SeqTensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Errors if any element is NaN or infinite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{what} at ({}, {})",
                    i / self.cols.max(1),
                    i % self.cols.max(1)
                )));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

// ---------------------------------------------------------------------------
// Spec-level operations (validated, Result-returning)
// ---------------------------------------------------------------------------

/// y[t] = x[t] . W + bias, with bias an optional 1xb row.
pub fn linear_apply(x: &SeqTensor, w: &SeqTensor, bias: Option<&SeqTensor>) -> Result<SeqTensor> {
    if x.cols() != w.rows() {
        return Err(Error::Shape {
            op: "linear_apply",
            detail: format!(
                "x is {}x{}, W is {}x{}: inner dims {} != {}",
                x.rows(),
                x.cols(),
                w.rows(),
                w.cols(),
                x.cols(),
                w.rows()
            ),
        });
    }
    if let Some(b) = bias {
        if b.rows() != 1 || b.cols() != w.cols() {
            return Err(Error::Shape {
                op: "linear_apply",
                detail: format!(
                    "bias is {}x{}, expected 1x{}",
                    b.rows(),
                    b.cols(),
                    w.cols()
                ),
            });
        }
    }
    Ok(matmul_bias(x, w, bias))
}

/// Channel-wise 1-D convolution over time. `kernel` is c x k.
pub fn depthwise_conv1d(x: &SeqTensor, kernel: &SeqTensor, padding: Padding) -> Result<SeqTensor> {
    let k = kernel.cols();
    if k == 0 {
        return Err(Error::InvalidArg {
            op: "depthwise_conv1d",
            detail: "kernel size 0".into(),
        });
    }
    if kernel.rows() != x.cols() {
        return Err(Error::Shape {
            op: "depthwise_conv1d",
            detail: format!(
                "kernel has {} channels, input has {}",
                kernel.rows(),
                x.cols()
            ),
        });
    }
    if padding == Padding::Same && k % 2 == 0 {
        return Err(Error::InvalidArg {
            op: "depthwise_conv1d",
            detail: format!("same padding requires odd kernel, got {k}"),
        });
    }
    Ok(conv1d_kernel(x, kernel, padding))
}

/// Per-row normalization to mean 0, variance 1 (up to eps).
pub fn layer_norm(x: &SeqTensor, eps: f64) -> SeqTensor {
    layer_norm_kernel(x, eps).0
}

// ---------------------------------------------------------------------------
// Internal kernels (shape bugs panic; used by ctx/tape after validation)
// ---------------------------------------------------------------------------

pub(crate) fn matmul_bias(x: &SeqTensor, w: &SeqTensor, bias: Option<&SeqTensor>) -> SeqTensor {
    assert_eq!(x.cols(), w.rows(), "matmul inner dims");
    let (t, a, b) = (x.rows(), x.cols(), w.cols());
    let mut out = vec![0.0; t * b];
    for i in 0..t {
        let xrow = x.row(i);
        let orow = &mut out[i * b..(i + 1) * b];
        if let Some(bv) = bias {
            orow.copy_from_slice(bv.row(0));
        }
        for kk in 0..a {
            let xv = xrow[kk];
            if xv == 0.0 {
                continue;
            }
            let wrow = w.row(kk);
            for j in 0..b {
                orow[j] += xv * wrow[j];
            }
        }
    }
    SeqTensor::from_vec(t, b, out)
}

pub(crate) fn matmul(a: &SeqTensor, b: &SeqTensor) -> SeqTensor {
    matmul_bias(a, b, None)
}

pub(crate) fn transpose(x: &SeqTensor) -> SeqTensor {
    let (r, c) = (x.rows(), x.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = x.get(i, j);
        }
    }
    SeqTensor::from_vec(c, r, out)
}

/// Index into the (conceptually padded) input for one conv tap.
/// Returns None where causal zero-padding applies.
#[inline]
fn conv_src_index(t: usize, tap: usize, k: usize, rows: usize, padding: Padding) -> Option<usize> {
    match padding {
        Padding::Causal => {
            // taps cover x[t-(k-1) .. t]
            let off = (k - 1) - tap;
            if t >= off {
                Some(t - off)
            } else {
                None
            }
        }
        Padding::Same => {
            // symmetric window, edge frames replicated
            let half = (k - 1) / 2;
            let p = t as isize + tap as isize - half as isize;
            Some(p.clamp(0, rows as isize - 1) as usize)
        }
    }
}

pub(crate) fn conv1d_kernel(x: &SeqTensor, kernel: &SeqTensor, padding: Padding) -> SeqTensor {
    let (t_len, c) = (x.rows(), x.cols());
    let k = kernel.cols();
    let mut out = vec![0.0; t_len * c];
    if t_len == 0 {
        return SeqTensor::from_vec(0, c, out);
    }
    for t in 0..t_len {
        let orow = &mut out[t * c..(t + 1) * c];
        for tap in 0..k {
            if let Some(src) = conv_src_index(t, tap, k, t_len, padding) {
                let xrow = x.row(src);
                for ch in 0..c {
                    orow[ch] += kernel.get(ch, tap) * xrow[ch];
                }
            }
        }
    }
    SeqTensor::from_vec(t_len, c, out)
}

/// Causal conv where `tail` ((k-1) x c) supplies the frames preceding x.
/// Used by the streaming path; `tail` of zeros matches offline causal padding.
pub(crate) fn conv1d_causal_with_tail(
    x: &SeqTensor,
    kernel: &SeqTensor,
    tail: &SeqTensor,
) -> SeqTensor {
    let (t_len, c) = (x.rows(), x.cols());
    let k = kernel.cols();
    assert_eq!(tail.rows(), k - 1, "conv tail rows");
    assert_eq!(tail.cols(), c, "conv tail cols");
    let mut out = vec![0.0; t_len * c];
    for t in 0..t_len {
        let orow = &mut out[t * c..(t + 1) * c];
        for tap in 0..k {
            let off = (k - 1) - tap;
            let row: &[f64] = if t >= off {
                x.row(t - off)
            } else {
                // reach into the carried tail: frame index -(off - t) from the end
                let back = off - t;
                tail.row(k - 1 - back)
            };
            for ch in 0..c {
                orow[ch] += kernel.get(ch, tap) * row[ch];
            }
        }
    }
    SeqTensor::from_vec(t_len, c, out)
}

/// Gradient of the depthwise conv wrt input and kernel.
pub(crate) fn conv1d_backward(
    x: &SeqTensor,
    kernel: &SeqTensor,
    padding: Padding,
    gy: &SeqTensor,
) -> (SeqTensor, SeqTensor) {
    let (t_len, c) = (x.rows(), x.cols());
    let k = kernel.cols();
    let mut gx = vec![0.0; t_len * c];
    let mut gk = vec![0.0; c * k];
    for t in 0..t_len {
        let grow = gy.row(t);
        for tap in 0..k {
            if let Some(src) = conv_src_index(t, tap, k, t_len, padding) {
                let xrow = x.row(src);
                for ch in 0..c {
                    gx[src * c + ch] += kernel.get(ch, tap) * grow[ch];
                    gk[ch * k + tap] += xrow[ch] * grow[ch];
                }
            }
        }
    }
    (
        SeqTensor::from_vec(t_len, c, gx),
        SeqTensor::from_vec(c, k, gk),
    )
}

/// Returns (normalized output, per-row 1/std) for reuse in the backward pass.
pub(crate) fn layer_norm_kernel(x: &SeqTensor, eps: f64) -> (SeqTensor, Vec<f64>) {
    let (r, c) = (x.rows(), x.cols());
    let mut out = vec![0.0; r * c];
    let mut inv_std = vec![0.0; r];
    for t in 0..r {
        let row = x.row(t);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[t] = is;
        for j in 0..c {
            out[t * c + j] = (row[j] - mean) * is;
        }
    }
    (SeqTensor::from_vec(r, c, out), inv_std)
}

pub(crate) fn ew_binary(a: &SeqTensor, b: &SeqTensor, f: impl Fn(f64, f64) -> f64) -> SeqTensor {
    assert!(a.same_shape(b), "elementwise shape mismatch");
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    SeqTensor::from_vec(a.rows(), a.cols(), data)
}

pub(crate) fn ew_map(x: &SeqTensor, f: impl Fn(f64) -> f64) -> SeqTensor {
    SeqTensor::from_vec(x.rows(), x.cols(), x.data().iter().map(|&v| f(v)).collect())
}

pub(crate) fn reverse_rows(x: &SeqTensor) -> SeqTensor {
    let (r, c) = (x.rows(), x.cols());
    let mut data = Vec::with_capacity(r * c);
    for t in (0..r).rev() {
        data.extend_from_slice(x.row(t));
    }
    SeqTensor::from_vec(r, c, data)
}

pub(crate) fn concat_cols(a: &SeqTensor, b: &SeqTensor) -> SeqTensor {
    assert_eq!(a.rows(), b.rows(), "concat_cols row mismatch");
    let (r, ca, cb) = (a.rows(), a.cols(), b.cols());
    let mut data = Vec::with_capacity(r * (ca + cb));
    for t in 0..r {
        data.extend_from_slice(a.row(t));
        data.extend_from_slice(b.row(t));
    }
    SeqTensor::from_vec(r, ca + cb, data)
}

pub(crate) fn slice_cols(x: &SeqTensor, lo: usize, hi: usize) -> SeqTensor {
    assert!(lo <= hi && hi <= x.cols(), "slice_cols out of range");
    let r = x.rows();
    let mut data = Vec::with_capacity(r * (hi - lo));
    for t in 0..r {
        data.extend_from_slice(&x.row(t)[lo..hi]);
    }
    SeqTensor::from_vec(r, hi - lo, data)
}

pub(crate) fn slice_rows(x: &SeqTensor, lo: usize, hi: usize) -> SeqTensor {
    assert!(lo <= hi && hi <= x.rows(), "slice_rows out of range");
    SeqTensor::from_vec(
        hi - lo,
        x.cols(),
        x.data()[lo * x.cols()..hi * x.cols()].to_vec(),
    )
}

/// Adds a 1xc row to every row of x.
pub(crate) fn row_add(x: &SeqTensor, row: &SeqTensor) -> SeqTensor {
    assert_eq!(row.rows(), 1);
    assert_eq!(row.cols(), x.cols(), "row_add width mismatch");
    let r = row.row(0);
    let mut out = x.clone();
    for t in 0..out.rows() {
        for (v, rv) in out.row_mut(t).iter_mut().zip(r) {
            *v += rv;
        }
    }
    out
}

/// Multiplies every row of x elementwise by a 1xc row.
pub(crate) fn row_mul(x: &SeqTensor, row: &SeqTensor) -> SeqTensor {
    assert_eq!(row.rows(), 1);
    assert_eq!(row.cols(), x.cols(), "row_mul width mismatch");
    let r = row.row(0);
    let mut out = x.clone();
    for t in 0..out.rows() {
        for (v, rv) in out.row_mut(t).iter_mut().zip(r) {
            *v *= rv;
        }
    }
    out
}

/// Repeats a 1xc row n times.
pub(crate) fn broadcast_row(row: &SeqTensor, n: usize) -> SeqTensor {
    assert_eq!(row.rows(), 1);
    let mut data = Vec::with_capacity(n * row.cols());
    for _ in 0..n {
        data.extend_from_slice(row.row(0));
    }
    SeqTensor::from_vec(n, row.cols(), data)
}

pub(crate) fn softmax_rows(x: &SeqTensor) -> SeqTensor {
    let (r, c) = (x.rows(), x.cols());
    let mut out = vec![0.0; r * c];
    for t in 0..r {
        let row = x.row(t);
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for j in 0..c {
            let e = (row[j] - m).exp();
            out[t * c + j] = e;
            sum += e;
        }
        for j in 0..c {
            out[t * c + j] /= sum;
        }
    }
    SeqTensor::from_vec(r, c, out)
}

/// Mean over rows, returning a 1xc tensor.
pub(crate) fn mean_rows(x: &SeqTensor) -> SeqTensor {
    let (r, c) = (x.rows(), x.cols());
    assert!(r > 0, "mean_rows on empty tensor");
    let mut out = vec![0.0; c];
    for t in 0..r {
        for (o, v) in out.iter_mut().zip(x.row(t)) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o /= r as f64;
    }
    SeqTensor::from_vec(1, c, out)
}

pub(crate) fn sum_all(x: &SeqTensor) -> f64 {
    x.data().iter().sum()
}

/// Gathers table rows by id: out[t] = table[ids[t]].
pub(crate) fn gather_rows(table: &SeqTensor, ids: &[usize]) -> SeqTensor {
    let c = table.cols();
    let mut data = Vec::with_capacity(ids.len() * c);
    for &id in ids {
        data.extend_from_slice(table.row(id));
    }
    SeqTensor::from_vec(ids.len(), c, data)
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn silu(v: f64) -> f64 {
    v * sigmoid(v)
}

pub(crate) fn softplus(v: f64) -> f64 {
    // log(1 + e^v), stable for large |v|
    if v > 30.0 {
        v
    } else if v < -30.0 {
        v.exp()
    } else {
        v.exp().ln_1p()
    }
}
