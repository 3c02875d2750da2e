//! Compute context abstraction.
//!
//! Model stages are written once against `Ctx` and run in two modes:
//! `EvalCtx` executes kernels directly (inference, streaming, benchmarks),
//! `TapeCtx` records onto a `GradTape` (training, gradient checks). Shape
//! errors here are programming bugs and panic; the validated spec-level
//! entry points live in the owning modules.

use crate::numerics::tape::{GradTape, Var};
use crate::numerics::tensor::{self, Padding, SeqTensor};
use std::rc::Rc;

pub trait Ctx {
    type H: Clone;

    /// Lifts a concrete tensor (parameter or input) into the context.
    fn lift(&mut self, t: &SeqTensor) -> Self::H;
    fn val<'a>(&'a self, h: &'a Self::H) -> &'a SeqTensor;

    fn linear(&mut self, x: &Self::H, w: &Self::H, b: Option<&Self::H>) -> Self::H;
    fn matmul(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn transpose(&mut self, x: &Self::H) -> Self::H;
    fn add(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn sub(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn mul(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn scale(&mut self, x: &Self::H, k: f64) -> Self::H;
    fn row_add(&mut self, x: &Self::H, row: &Self::H) -> Self::H;
    fn row_mul(&mut self, x: &Self::H, row: &Self::H) -> Self::H;
    fn broadcast_row(&mut self, row: &Self::H, n: usize) -> Self::H;
    fn sigmoid(&mut self, x: &Self::H) -> Self::H;
    fn tanh(&mut self, x: &Self::H) -> Self::H;
    fn silu(&mut self, x: &Self::H) -> Self::H;
    fn softplus(&mut self, x: &Self::H) -> Self::H;
    fn relu(&mut self, x: &Self::H) -> Self::H;
    fn neg_exp(&mut self, x: &Self::H) -> Self::H;
    fn layer_norm(&mut self, x: &Self::H, eps: f64) -> Self::H;
    fn conv1d(&mut self, x: &Self::H, kernel: &Self::H, padding: Padding) -> Self::H;
    fn scan(
        &mut self,
        u: &Self::H,
        delta: &Self::H,
        a: &Self::H,
        b_seq: &Self::H,
        c_seq: &Self::H,
    ) -> Self::H;
    fn reverse_rows(&mut self, x: &Self::H) -> Self::H;
    fn concat_cols(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn slice_cols(&mut self, x: &Self::H, lo: usize, hi: usize) -> Self::H;
    fn slice_rows(&mut self, x: &Self::H, lo: usize, hi: usize) -> Self::H;
    fn softmax_rows(&mut self, x: &Self::H) -> Self::H;
    fn mean_rows(&mut self, x: &Self::H) -> Self::H;
    fn sum_all(&mut self, x: &Self::H) -> Self::H;
    fn l1_loss(&mut self, a: &Self::H, b: &Self::H) -> Self::H;
    fn gather(&mut self, table: &Self::H, ids: &[usize]) -> Self::H;
    fn reshape(&mut self, x: &Self::H, rows: usize, cols: usize) -> Self::H;
    fn row_normalize(&mut self, x: &Self::H) -> Self::H;
}

/// Direct evaluation; handles are shared tensors.
#[derive(Default)]
pub struct EvalCtx;

impl EvalCtx {
    pub fn new() -> Self {
        EvalCtx
    }
}

impl Ctx for EvalCtx {
    type H = Rc<SeqTensor>;

    fn lift(&mut self, t: &SeqTensor) -> Self::H {
        Rc::new(t.clone())
    }
    fn val<'a>(&'a self, h: &'a Self::H) -> &'a SeqTensor {
        h
    }
    fn linear(&mut self, x: &Self::H, w: &Self::H, b: Option<&Self::H>) -> Self::H {
        Rc::new(tensor::matmul_bias(x, w, b.map(|b| b.as_ref())))
    }
    fn matmul(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        Rc::new(tensor::matmul(a, b))
    }
    fn transpose(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::transpose(x))
    }
    fn add(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        Rc::new(tensor::ew_binary(a, b, |x, y| x + y))
    }
    fn sub(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        Rc::new(tensor::ew_binary(a, b, |x, y| x - y))
    }
    fn mul(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        Rc::new(tensor::ew_binary(a, b, |x, y| x * y))
    }
    fn scale(&mut self, x: &Self::H, k: f64) -> Self::H {
        Rc::new(tensor::ew_map(x, |v| v * k))
    }
    fn row_add(&mut self, x: &Self::H, row: &Self::H) -> Self::H {
        Rc::new(tensor::row_add(x, row))
    }
    fn row_mul(&mut self, x: &Self::H, row: &Self::H) -> Self::H {
        Rc::new(tensor::row_mul(x, row))
    }
    fn broadcast_row(&mut self, row: &Self::H, n: usize) -> Self::H {
        Rc::new(tensor::broadcast_row(row, n))
    }
    fn sigmoid(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, tensor::sigmoid))
    }
    fn tanh(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, f64::tanh))
    }
    fn silu(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, tensor::silu))
    }
    fn softplus(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, tensor::softplus))
    }
    fn relu(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, |v| v.max(0.0)))
    }
    fn neg_exp(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::ew_map(x, |v| -v.exp()))
    }
    fn layer_norm(&mut self, x: &Self::H, eps: f64) -> Self::H {
        Rc::new(tensor::layer_norm_kernel(x, eps).0)
    }
    fn conv1d(&mut self, x: &Self::H, kernel: &Self::H, padding: Padding) -> Self::H {
        Rc::new(tensor::conv1d_kernel(x, kernel, padding))
    }
    fn scan(
        &mut self,
        u: &Self::H,
        delta: &Self::H,
        a: &Self::H,
        b_seq: &Self::H,
        c_seq: &Self::H,
    ) -> Self::H {
        let out = crate::numerics::scan_core::scan_forward(
            u, delta, a, b_seq, c_seq, None, None, false,
        )
        .expect("unbounded scan cannot fail");
        Rc::new(out.y)
    }
    fn reverse_rows(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::reverse_rows(x))
    }
    fn concat_cols(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        Rc::new(tensor::concat_cols(a, b))
    }
    fn slice_cols(&mut self, x: &Self::H, lo: usize, hi: usize) -> Self::H {
        Rc::new(tensor::slice_cols(x, lo, hi))
    }
    fn slice_rows(&mut self, x: &Self::H, lo: usize, hi: usize) -> Self::H {
        Rc::new(tensor::slice_rows(x, lo, hi))
    }
    fn softmax_rows(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::softmax_rows(x))
    }
    fn mean_rows(&mut self, x: &Self::H) -> Self::H {
        Rc::new(tensor::mean_rows(x))
    }
    fn sum_all(&mut self, x: &Self::H) -> Self::H {
        Rc::new(SeqTensor::from_vec(1, 1, vec![tensor::sum_all(x)]))
    }
    fn l1_loss(&mut self, a: &Self::H, b: &Self::H) -> Self::H {
        assert!(a.same_shape(b), "l1_loss shape mismatch");
        let n = a.len().max(1) as f64;
        let s: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        Rc::new(SeqTensor::from_vec(1, 1, vec![s / n]))
    }
    fn gather(&mut self, table: &Self::H, ids: &[usize]) -> Self::H {
        Rc::new(tensor::gather_rows(table, ids))
    }
    fn reshape(&mut self, x: &Self::H, rows: usize, cols: usize) -> Self::H {
        assert_eq!(x.len(), rows * cols);
        Rc::new(SeqTensor::from_vec(rows, cols, x.data().to_vec()))
    }
    fn row_normalize(&mut self, x: &Self::H) -> Self::H {
        let (r, c) = (x.rows(), x.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let s: f64 = x.row(i).iter().sum();
            for j in 0..c {
                out[i * c + j] = x.get(i, j) / s;
            }
        }
        Rc::new(SeqTensor::from_vec(r, c, out))
    }
}

/// Recording context over a gradient tape.
pub struct TapeCtx<'t> {
    pub tape: &'t mut GradTape,
}

impl<'t> TapeCtx<'t> {
    pub fn new(tape: &'t mut GradTape) -> Self {
        TapeCtx { tape }
    }
}

impl Ctx for TapeCtx<'_> {
    type H = Var;

    fn lift(&mut self, t: &SeqTensor) -> Var {
        self.tape.leaf(t.clone())
    }
    fn val<'a>(&'a self, h: &'a Var) -> &'a SeqTensor {
        self.tape.value(*h)
    }
    fn linear(&mut self, x: &Var, w: &Var, b: Option<&Var>) -> Var {
        self.tape.linear(*x, *w, b.copied())
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.matmul(*a, *b)
    }
    fn transpose(&mut self, x: &Var) -> Var {
        self.tape.transpose(*x)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.add(*a, *b)
    }
    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.sub(*a, *b)
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.mul(*a, *b)
    }
    fn scale(&mut self, x: &Var, k: f64) -> Var {
        self.tape.scale(*x, k)
    }
    fn row_add(&mut self, x: &Var, row: &Var) -> Var {
        self.tape.row_add(*x, *row)
    }
    fn row_mul(&mut self, x: &Var, row: &Var) -> Var {
        self.tape.row_mul(*x, *row)
    }
    fn broadcast_row(&mut self, row: &Var, n: usize) -> Var {
        self.tape.broadcast_row(*row, n)
    }
    fn sigmoid(&mut self, x: &Var) -> Var {
        self.tape.sigmoid(*x)
    }
    fn tanh(&mut self, x: &Var) -> Var {
        self.tape.tanh(*x)
    }
    fn silu(&mut self, x: &Var) -> Var {
        self.tape.silu(*x)
    }
    fn softplus(&mut self, x: &Var) -> Var {
        self.tape.softplus(*x)
    }
    fn relu(&mut self, x: &Var) -> Var {
        self.tape.relu(*x)
    }
    fn neg_exp(&mut self, x: &Var) -> Var {
        self.tape.neg_exp(*x)
    }
    fn layer_norm(&mut self, x: &Var, eps: f64) -> Var {
        self.tape.layer_norm(*x, eps)
    }
    fn conv1d(&mut self, x: &Var, kernel: &Var, padding: Padding) -> Var {
        self.tape.conv1d(*x, *kernel, padding)
    }
    fn scan(&mut self, u: &Var, delta: &Var, a: &Var, b_seq: &Var, c_seq: &Var) -> Var {
        self.tape.scan(*u, *delta, *a, *b_seq, *c_seq)
    }
    fn reverse_rows(&mut self, x: &Var) -> Var {
        self.tape.reverse_rows(*x)
    }
    fn concat_cols(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.concat_cols(*a, *b)
    }
    fn slice_cols(&mut self, x: &Var, lo: usize, hi: usize) -> Var {
        self.tape.slice_cols(*x, lo, hi)
    }
    fn slice_rows(&mut self, x: &Var, lo: usize, hi: usize) -> Var {
        self.tape.slice_rows(*x, lo, hi)
    }
    fn softmax_rows(&mut self, x: &Var) -> Var {
        self.tape.softmax_rows(*x)
    }
    fn mean_rows(&mut self, x: &Var) -> Var {
        self.tape.mean_rows(*x)
    }
    fn sum_all(&mut self, x: &Var) -> Var {
        self.tape.sum_all(*x)
    }
    fn l1_loss(&mut self, a: &Var, b: &Var) -> Var {
        self.tape.l1_loss(*a, *b)
    }
    fn gather(&mut self, table: &Var, ids: &[usize]) -> Var {
        self.tape.gather(*table, ids)
    }
    fn reshape(&mut self, x: &Var, rows: usize, cols: usize) -> Var {
        self.tape.reshape(*x, rows, cols)
    }
    fn row_normalize(&mut self, x: &Var) -> Var {
        self.tape.row_normalize(*x)
    }
}
