//! Deterministic tensor primitives, RNG, reverse-mode tape, and tensor I/O.

pub mod audit;
mod ctx;
mod gradcheck;
pub mod init;
mod io;
mod rng;
pub(crate) mod scan_core;
mod tape;
mod tensor;

pub use ctx::{Ctx, EvalCtx, TapeCtx};
pub use gradcheck::{grad_check, FnProblem, GradCheckResult, GradProblem};
pub use io::{read_tensor, read_tensor_from, read_token_ids, write_tensor, write_tensor_to};
pub use rng::Rng;
pub use tape::{GradTape, Var};
pub use tensor::{depthwise_conv1d, layer_norm, linear_apply, Padding, SeqTensor};

#[allow(unused_imports)]
pub(crate) use tensor::{
    broadcast_row, concat_cols, conv1d_causal_with_tail, conv1d_kernel, ew_binary, ew_map,
    gather_rows, matmul, matmul_bias, mean_rows, reverse_rows, row_add, row_mul, sigmoid, silu,
    slice_cols, slice_rows, softmax_rows, softplus, sum_all, transpose,
};
