//! Monotonic alignment regularizer: penalizes regressions of the attention
//! centroid c_t = sum_j j * alpha[t, j].
//!
//! L = (1/T_m) * sum_t ReLU(c_{t-1} - c_t)

use crate::alignpitch::aligner::AlignmentMatrix;
use crate::numerics::{Ctx, SeqTensor};

pub fn monotonic_loss(alpha: &AlignmentMatrix) -> f64 {
    let a = &alpha.alpha;
    let t_m = a.rows();
    if t_m < 2 {
        return 0.0;
    }
    let centroid = |t: usize| -> f64 {
        a.row(t)
            .iter()
            .enumerate()
            .map(|(j, &w)| j as f64 * w)
            .sum()
    };
    let mut loss = 0.0;
    let mut prev = centroid(0);
    for t in 1..t_m {
        let cur = centroid(t);
        loss += (prev - cur).max(0.0);
        prev = cur;
    }
    loss / t_m as f64
}

/// Differentiable form over a context handle holding alpha (T_m x T_x).
pub fn monotonic_loss_ctx<C: Ctx>(ctx: &mut C, alpha: &C::H) -> C::H {
    let (t_m, t_x) = {
        let a = ctx.val(alpha);
        (a.rows(), a.cols())
    };
    let idx = ctx.lift(&SeqTensor::from_fn(t_x, 1, |j, _| j as f64));
    let centroids = ctx.matmul(alpha, &idx);
    if t_m < 2 {
        let zero = ctx.lift(&SeqTensor::zeros(t_m.min(1), 1));
        let s = ctx.sum_all(&zero);
        return ctx.scale(&s, 0.0);
    }
    let prev = ctx.slice_rows(&centroids, 0, t_m - 1);
    let next = ctx.slice_rows(&centroids, 1, t_m);
    let drops = ctx.sub(&prev, &next);
    let hinged = ctx.relu(&drops);
    let total = ctx.sum_all(&hinged);
    ctx.scale(&total, 1.0 / t_m as f64)
}
