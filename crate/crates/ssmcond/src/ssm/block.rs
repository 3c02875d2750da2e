//! Mamba block and bidirectional wrapper.
//!
//! Block structure: input projection splits into value and gate branches;
//! the value path runs depthwise conv, SiLU, and the selective scan; the
//! result is gated by SiLU(gate), projected back to d_h, and added to the
//! block input.

use crate::error::{Error, Result};
use crate::numerics::{self, Ctx, Padding, SeqTensor};
use crate::ssm::params::{MambaLayerHandles, MambaLayerParams};
use crate::ssm::scan::selective_scan;
use crate::ssm::state::StreamState;

/// Stateful block forward. `state` requires causal padding; same-padding
/// streaming is rejected because it would read future frames.
pub fn mamba_block(
    x: &SeqTensor,
    params: &MambaLayerParams,
    padding: Padding,
    state: Option<&StreamState>,
) -> Result<(SeqTensor, StreamState)> {
    if state.is_some() && padding != Padding::Causal {
        return Err(Error::InvalidArg {
            op: "mamba_block",
            detail: "stream state requires causal padding".into(),
        });
    }
    if x.cols() != params.d_h {
        return Err(Error::Shape {
            op: "mamba_block",
            detail: format!("input has {} features, params want {}", x.cols(), params.d_h),
        });
    }
    if let Some(st) = state {
        st.matches(params)?;
    }
    let d_h = params.d_h;
    let xw = numerics::linear_apply(x, &params.in_proj_w, Some(&params.in_proj_b))?;
    let value = numerics::slice_cols(&xw, 0, d_h);
    let gate = numerics::slice_cols(&xw, d_h, 2 * d_h);

    let conv = match state {
        Some(st) => numerics::conv1d_causal_with_tail(&value, &params.conv_kernel, &st.conv_tail),
        None => numerics::conv1d_kernel(&value, &params.conv_kernel, padding),
    };
    let v = numerics::ew_map(&conv, numerics::silu);

    let (y_scan, mut next) = selective_scan(&v, params, state)?;

    next.conv_tail = updated_tail(
        state.map(|s| &s.conv_tail),
        &value,
        params.k,
        params.d_h,
    );

    let gated = numerics::ew_binary(&y_scan, &gate, |y, g| y * numerics::silu(g));
    let out = numerics::linear_apply(&gated, &params.out_w, Some(&params.out_b))?;
    let result = numerics::ew_binary(&out, x, |a, b| a + b);
    Ok((result, next))
}

/// Last k-1 input frames, shifted through any carried tail.
fn updated_tail(
    old: Option<&SeqTensor>,
    value: &SeqTensor,
    k: usize,
    d_h: usize,
) -> SeqTensor {
    let keep = k - 1;
    let t = value.rows();
    SeqTensor::from_fn(keep, d_h, |i, c| {
        // frame index (t - keep + i) of the combined [old_tail; value] stream
        let pos = t as isize - keep as isize + i as isize;
        if pos >= 0 {
            value.get(pos as usize, c)
        } else {
            match old {
                Some(tail) => tail.get((tail.rows() as isize + pos) as usize, c),
                None => 0.0,
            }
        }
    })
}

/// Forward and backward scans with independent parameters.
/// The backward pass is time reversal around the same kernel.
pub fn bidirectional_scan(
    x: &SeqTensor,
    fwd_params: &MambaLayerParams,
    bwd_params: &MambaLayerParams,
    padding: Padding,
) -> Result<(SeqTensor, SeqTensor)> {
    let (h_f, _) = mamba_block(x, fwd_params, padding, None)?;
    let rev = numerics::reverse_rows(x);
    let (h_b_rev, _) = mamba_block(&rev, bwd_params, padding, None)?;
    Ok((h_f, numerics::reverse_rows(&h_b_rev)))
}

/// Context form of the block (offline padding only; training and bound
/// inference paths).
pub fn mamba_block_ctx<C: Ctx>(
    ctx: &mut C,
    x: &C::H,
    p: &MambaLayerHandles<C::H>,
    padding: Padding,
) -> C::H {
    let d_h = p.d_h;
    let xw = ctx.linear(x, &p.in_proj_w, Some(&p.in_proj_b));
    let value = ctx.slice_cols(&xw, 0, d_h);
    let gate = ctx.slice_cols(&xw, d_h, 2 * d_h);
    let conv = ctx.conv1d(&value, &p.conv_kernel, padding);
    let v = ctx.silu(&conv);
    let delta_raw = ctx.linear(&v, &p.delta_w, Some(&p.delta_b));
    let delta = ctx.softplus(&delta_raw);
    let b_seq = ctx.linear(&v, &p.b_w, None);
    let c_seq = ctx.linear(&v, &p.c_w, None);
    let a = ctx.neg_exp(&p.a_log);
    let y0 = ctx.scan(&v, &delta, &a, &b_seq, &c_seq);
    let skip = ctx.row_mul(&v, &p.d_skip);
    let y1 = ctx.add(&y0, &skip);
    let gs = ctx.silu(&gate);
    let gated = ctx.mul(&y1, &gs);
    let out = ctx.linear(&gated, &p.out_w, Some(&p.out_b));
    ctx.add(&out, x)
}

pub fn bidirectional_scan_ctx<C: Ctx>(
    ctx: &mut C,
    x: &C::H,
    fwd: &MambaLayerHandles<C::H>,
    bwd: &MambaLayerHandles<C::H>,
    padding: Padding,
) -> (C::H, C::H) {
    let h_f = mamba_block_ctx(ctx, x, fwd, padding);
    let rev = ctx.reverse_rows(x);
    let h_b_rev = mamba_block_ctx(ctx, &rev, bwd, padding);
    let h_b = ctx.reverse_rows(&h_b_rev);
    (h_f, h_b)
}
