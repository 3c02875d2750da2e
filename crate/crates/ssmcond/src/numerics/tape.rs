//! Minimal reverse-mode gradient tape over whole tensors.
//!
//! Each recorded node holds the op kind, input node indices, and the forward
//! value. The arena order is a topological order by construction, so the
//! backward pass is a single reverse sweep. Adjoints of nodes the loss never
//! touched stay exactly zero.

use crate::error::{Error, Result};
use crate::numerics::scan_core;
use crate::numerics::tensor::{self, Padding, SeqTensor};

/// Handle to a recorded tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    Transpose {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        k: f64,
    },
    RowAdd {
        x: Var,
        row: Var,
    },
    RowMul {
        x: Var,
        row: Var,
    },
    BroadcastRow {
        row: Var,
    },
    Sigmoid {
        x: Var,
    },
    Tanh {
        x: Var,
    },
    Silu {
        x: Var,
    },
    Softplus {
        x: Var,
    },
    Relu {
        x: Var,
    },
    NegExp {
        x: Var,
    },
    LayerNorm {
        x: Var,
        inv_std: Vec<f64>,
    },
    Conv {
        x: Var,
        kernel: Var,
        padding: Padding,
    },
    Scan {
        u: Var,
        delta: Var,
        a: Var,
        b_seq: Var,
        c_seq: Var,
        states: Vec<f64>,
    },
    ReverseRows {
        x: Var,
    },
    ConcatCols {
        a: Var,
        b: Var,
    },
    SliceCols {
        x: Var,
        lo: usize,
        hi: usize,
    },
    SliceRows {
        x: Var,
        lo: usize,
        hi: usize,
    },
    SoftmaxRows {
        x: Var,
    },
    MeanRows {
        x: Var,
    },
    SumAll {
        x: Var,
    },
    L1Loss {
        a: Var,
        b: Var,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    Reshape {
        x: Var,
    },
    RowNormalize {
        x: Var,
        /// Per-row sums of the input.
        sums: Vec<f64>,
    },
}

struct Node {
    value: SeqTensor,
    op: Op,
}

#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
    adjoints: Vec<Option<SeqTensor>>,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: SeqTensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &SeqTensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "scalar() on non-scalar node");
        t.data()[0]
    }

    pub fn leaf(&mut self, t: SeqTensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let v = tensor::matmul_bias(
            self.value(x),
            self.value(w),
            b.map(|bv| self.value(bv)),
        );
        self.push(v, Op::Linear { x, w, b })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul { a, b })
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let v = tensor::transpose(self.value(x));
        self.push(v, Op::Transpose { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::ew_binary(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::ew_binary(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::ew_binary(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let v = tensor::ew_map(self.value(x), |v| v * k);
        self.push(v, Op::Scale { x, k })
    }

    pub fn row_add(&mut self, x: Var, row: Var) -> Var {
        let v = tensor::row_add(self.value(x), self.value(row));
        self.push(v, Op::RowAdd { x, row })
    }

    pub fn row_mul(&mut self, x: Var, row: Var) -> Var {
        let v = tensor::row_mul(self.value(x), self.value(row));
        self.push(v, Op::RowMul { x, row })
    }

    pub fn broadcast_row(&mut self, row: Var, n: usize) -> Var {
        let v = tensor::broadcast_row(self.value(row), n);
        self.push(v, Op::BroadcastRow { row })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), tensor::sigmoid);
        self.push(v, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), f64::tanh);
        self.push(v, Op::Tanh { x })
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), tensor::silu);
        self.push(v, Op::Silu { x })
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), tensor::softplus);
        self.push(v, Op::Softplus { x })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), |v| v.max(0.0));
        self.push(v, Op::Relu { x })
    }

    /// y = -exp(x); used to derive the strictly negative state matrix.
    pub fn neg_exp(&mut self, x: Var) -> Var {
        let v = tensor::ew_map(self.value(x), |v| -v.exp());
        self.push(v, Op::NegExp { x })
    }

    pub fn layer_norm(&mut self, x: Var, eps: f64) -> Var {
        let (v, inv_std) = tensor::layer_norm_kernel(self.value(x), eps);
        self.push(v, Op::LayerNorm { x, inv_std })
    }

    pub fn conv1d(&mut self, x: Var, kernel: Var, padding: Padding) -> Var {
        let v = tensor::conv1d_kernel(self.value(x), self.value(kernel), padding);
        self.push(v, Op::Conv { x, kernel, padding })
    }

    /// Selective-scan recurrence with zero initial state.
    pub fn scan(&mut self, u: Var, delta: Var, a: Var, b_seq: Var, c_seq: Var) -> Var {
        let out = scan_core::scan_forward(
            self.value(u),
            self.value(delta),
            self.value(a),
            self.value(b_seq),
            self.value(c_seq),
            None,
            None,
            true,
        )
        .expect("unbounded scan cannot fail");
        self.push(
            out.y,
            Op::Scan {
                u,
                delta,
                a,
                b_seq,
                c_seq,
                states: out.states.unwrap(),
            },
        )
    }

    pub fn reverse_rows(&mut self, x: Var) -> Var {
        let v = tensor::reverse_rows(self.value(x));
        self.push(v, Op::ReverseRows { x })
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = tensor::concat_cols(self.value(a), self.value(b));
        self.push(v, Op::ConcatCols { a, b })
    }

    pub fn slice_cols(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let v = tensor::slice_cols(self.value(x), lo, hi);
        self.push(v, Op::SliceCols { x, lo, hi })
    }

    pub fn slice_rows(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let v = tensor::slice_rows(self.value(x), lo, hi);
        self.push(v, Op::SliceRows { x, lo, hi })
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = tensor::softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows { x })
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let v = tensor::mean_rows(self.value(x));
        self.push(v, Op::MeanRows { x })
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let v = SeqTensor::from_vec(1, 1, vec![tensor::sum_all(self.value(x))]);
        self.push(v, Op::SumAll { x })
    }

    /// Mean absolute difference, as a 1x1 node.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(ta.same_shape(tb), "l1_loss shape mismatch");
        let n = ta.len().max(1) as f64;
        let s: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        self.push(SeqTensor::from_vec(1, 1, vec![s / n]), Op::L1Loss { a, b })
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let v = tensor::gather_rows(self.value(table), ids);
        self.push(
            v,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let t = self.value(x);
        assert_eq!(t.len(), rows * cols, "reshape element count");
        let v = SeqTensor::from_vec(rows, cols, t.data().to_vec());
        self.push(v, Op::Reshape { x })
    }

    /// Divides every row by its sum (rows must sum to nonzero values).
    pub fn row_normalize(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (r, c) = (t.rows(), t.cols());
        let mut sums = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let s: f64 = t.row(i).iter().sum();
            sums[i] = s;
            for j in 0..c {
                out[i * c + j] = t.get(i, j) / s;
            }
        }
        self.push(
            SeqTensor::from_vec(r, c, out),
            Op::RowNormalize { x, sums },
        )
    }

    fn accumulate(&mut self, v: Var, g: SeqTensor) {
        match &mut self.adjoints[v.0] {
            Some(acc) => {
                debug_assert!(acc.same_shape(&g));
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    /// Runs the reverse sweep from a scalar root.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let rt = self.value(root);
        if rt.len() != 1 {
            return Err(Error::InvalidArg {
                op: "backward",
                detail: format!("root must be 1x1, got {}x{}", rt.rows(), rt.cols()),
            });
        }
        self.adjoints = (0..self.nodes.len()).map(|_| None).collect();
        self.adjoints[root.0] = Some(SeqTensor::from_vec(1, 1, vec![1.0]));

        for i in (0..=root.0).rev() {
            let Some(g) = self.adjoints[i].take() else {
                continue;
            };
            self.step_backward(i, &g);
            self.adjoints[i] = Some(g);
        }
        Ok(())
    }

    fn step_backward(&mut self, i: usize, g: &SeqTensor) {
        // Split borrows: values read immutably, adjoints written via accumulate.
        macro_rules! val {
            ($v:expr) => {
                &self.nodes[$v.0].value
            };
        }
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (x, w, b) = (*x, *w, *b);
                let gx = tensor::matmul(g, &tensor::transpose(val!(w)));
                let gw = tensor::matmul(&tensor::transpose(val!(x)), g);
                self.accumulate(x, gx);
                self.accumulate(w, gw);
                if let Some(b) = b {
                    let gb = col_sums(g);
                    self.accumulate(b, gb);
                }
            }
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let ga = tensor::matmul(g, &tensor::transpose(val!(b)));
                let gb = tensor::matmul(&tensor::transpose(val!(a)), g);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Transpose { x } => {
                let x = *x;
                let gx = tensor::transpose(g);
                self.accumulate(x, gx);
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, tensor::ew_map(g, |v| -v));
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                let ga = tensor::ew_binary(g, val!(b), |x, y| x * y);
                let gb = tensor::ew_binary(g, val!(a), |x, y| x * y);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Scale { x, k } => {
                let (x, k) = (*x, *k);
                self.accumulate(x, tensor::ew_map(g, |v| v * k));
            }
            Op::RowAdd { x, row } => {
                let (x, row) = (*x, *row);
                self.accumulate(x, g.clone());
                self.accumulate(row, col_sums(g));
            }
            Op::RowMul { x, row } => {
                let (x, row) = (*x, *row);
                let gx = tensor::row_mul(g, val!(row));
                let gr = col_sums(&tensor::ew_binary(g, val!(x), |a, b| a * b));
                self.accumulate(x, gx);
                self.accumulate(row, gr);
            }
            Op::BroadcastRow { row } => {
                let row = *row;
                self.accumulate(row, col_sums(g));
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let y = &self.nodes[i].value;
                let gx = tensor::ew_binary(g, y, |gv, yv| gv * yv * (1.0 - yv));
                self.accumulate(x, gx);
            }
            Op::Tanh { x } => {
                let x = *x;
                let y = &self.nodes[i].value;
                let gx = tensor::ew_binary(g, y, |gv, yv| gv * (1.0 - yv * yv));
                self.accumulate(x, gx);
            }
            Op::Silu { x } => {
                let x = *x;
                let gx = tensor::ew_binary(g, val!(x), |gv, xv| {
                    let s = tensor::sigmoid(xv);
                    gv * s * (1.0 + xv * (1.0 - s))
                });
                self.accumulate(x, gx);
            }
            Op::Softplus { x } => {
                let x = *x;
                let gx = tensor::ew_binary(g, val!(x), |gv, xv| gv * tensor::sigmoid(xv));
                self.accumulate(x, gx);
            }
            Op::Relu { x } => {
                let x = *x;
                let gx = tensor::ew_binary(g, val!(x), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                self.accumulate(x, gx);
            }
            Op::NegExp { x } => {
                let x = *x;
                let y = &self.nodes[i].value;
                let gx = tensor::ew_binary(g, y, |gv, yv| gv * yv);
                self.accumulate(x, gx);
            }
            Op::LayerNorm { x, inv_std } => {
                let x = *x;
                let y = &self.nodes[i].value;
                let (r, c) = (y.rows(), y.cols());
                let mut gx = vec![0.0; r * c];
                for t in 0..r {
                    let yr = y.row(t);
                    let gr = g.row(t);
                    let mg = gr.iter().sum::<f64>() / c as f64;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                    let is = inv_std[t];
                    for j in 0..c {
                        gx[t * c + j] = is * (gr[j] - mg - yr[j] * mgy);
                    }
                }
                self.accumulate(x, SeqTensor::from_vec(r, c, gx));
            }
            Op::Conv { x, kernel, padding } => {
                let (x, kernel, padding) = (*x, *kernel, *padding);
                let (gx, gk) = tensor::conv1d_backward(val!(x), val!(kernel), padding, g);
                self.accumulate(x, gx);
                self.accumulate(kernel, gk);
            }
            Op::Scan {
                u,
                delta,
                a,
                b_seq,
                c_seq,
                states,
            } => {
                let (u, delta, a, b_seq, c_seq) = (*u, *delta, *a, *b_seq, *c_seq);
                let (gu, gd, ga, gb, gc) = scan_core::scan_backward(
                    val!(u),
                    val!(delta),
                    val!(a),
                    val!(b_seq),
                    val!(c_seq),
                    states,
                    g,
                );
                self.accumulate(u, gu);
                self.accumulate(delta, gd);
                self.accumulate(a, ga);
                self.accumulate(b_seq, gb);
                self.accumulate(c_seq, gc);
            }
            Op::ReverseRows { x } => {
                let x = *x;
                self.accumulate(x, tensor::reverse_rows(g));
            }
            Op::ConcatCols { a, b } => {
                let (a, b) = (*a, *b);
                let ca = val!(a).cols();
                let ga = tensor::slice_cols(g, 0, ca);
                let gb = tensor::slice_cols(g, ca, g.cols());
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::SliceCols { x, lo, hi } => {
                let (x, lo, hi) = (*x, *lo, *hi);
                let xt = val!(x);
                let mut gx = SeqTensor::zeros(xt.rows(), xt.cols());
                for t in 0..g.rows() {
                    for (j, col) in (lo..hi).enumerate() {
                        gx.set(t, col, g.get(t, j));
                    }
                }
                self.accumulate(x, gx);
            }
            Op::SliceRows { x, lo, hi } => {
                let (x, lo, _hi) = (*x, *lo, *hi);
                let xt = val!(x);
                let mut gx = SeqTensor::zeros(xt.rows(), xt.cols());
                for t in 0..g.rows() {
                    gx.row_mut(lo + t).copy_from_slice(g.row(t));
                }
                self.accumulate(x, gx);
            }
            Op::SoftmaxRows { x } => {
                let x = *x;
                let y = &self.nodes[i].value;
                let (r, c) = (y.rows(), y.cols());
                let mut gx = vec![0.0; r * c];
                for t in 0..r {
                    let yr = y.row(t);
                    let gr = g.row(t);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        gx[t * c + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(x, SeqTensor::from_vec(r, c, gx));
            }
            Op::MeanRows { x } => {
                let x = *x;
                let xt = val!(x);
                let r = xt.rows();
                let scaled = tensor::ew_map(g, |v| v / r as f64);
                let gx = tensor::broadcast_row(&scaled, r);
                self.accumulate(x, gx);
            }
            Op::SumAll { x } => {
                let x = *x;
                let xt = val!(x);
                let gv = g.data()[0];
                let gx = SeqTensor::from_vec(xt.rows(), xt.cols(), vec![gv; xt.len()]);
                self.accumulate(x, gx);
            }
            Op::L1Loss { a, b } => {
                let (a, b) = (*a, *b);
                let gv = g.data()[0];
                let n = val!(a).len().max(1) as f64;
                let ga = tensor::ew_binary(val!(a), val!(b), |x, y| {
                    gv * (x - y).signum() / n
                });
                let gb = tensor::ew_map(&ga, |v| -v);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Gather { table, ids } => {
                let table = *table;
                let ids = ids.clone();
                let tt = val!(table);
                let mut gt = SeqTensor::zeros(tt.rows(), tt.cols());
                for (t, &id) in ids.iter().enumerate() {
                    for j in 0..gt.cols() {
                        let v = gt.get(id, j) + g.get(t, j);
                        gt.set(id, j, v);
                    }
                }
                self.accumulate(table, gt);
            }
            Op::Reshape { x } => {
                let x = *x;
                let xt = val!(x);
                let gx = SeqTensor::from_vec(xt.rows(), xt.cols(), g.data().to_vec());
                self.accumulate(x, gx);
            }
            Op::RowNormalize { x, sums } => {
                let x = *x;
                let sums = sums.clone();
                let y = &self.nodes[i].value;
                let (r, c) = (y.rows(), y.cols());
                let mut gx = vec![0.0; r * c];
                for t in 0..r {
                    let dot: f64 = g.row(t).iter().zip(y.row(t)).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        gx[t * c + j] = (g.get(t, j) - dot) / sums[t];
                    }
                }
                self.accumulate(x, SeqTensor::from_vec(r, c, gx));
            }
        }
    }

    /// Adjoint of a node after `backward`; zeros if the loss never used it.
    pub fn grad(&self, v: Var) -> SeqTensor {
        match &self.adjoints.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => {
                let t = self.value(v);
                SeqTensor::zeros(t.rows(), t.cols())
            }
        }
    }
}

/// Column sums of g as a 1xc tensor.
fn col_sums(g: &SeqTensor) -> SeqTensor {
    let (r, c) = (g.rows(), g.cols());
    let mut out = vec![0.0; c];
    for t in 0..r {
        for (o, v) in out.iter_mut().zip(g.row(t)) {
            *o += v;
        }
    }
    SeqTensor::from_vec(1, c, out)
}
