//! Learned parameters of one selective-SSM layer.

use crate::numerics::{init, Ctx, Rng, SeqTensor};

pub const DEFAULT_D_SSM: usize = 96;
pub const DEFAULT_KERNEL: usize = 5;
pub const DEFAULT_S_MAX: f64 = 1e3;

/// One Mamba layer: input projection into value/gate branches, depthwise
/// conv kernel, input-dependent step/state projections, decay matrix,
/// skip gains, and the output projection.
///
/// `a_log` stores the log of the negated state decay, so A = -exp(a_log) is
/// strictly negative and exp(delta * A) lies in (0,1) for any delta > 0.
#[derive(Debug, Clone)]
pub struct MambaLayerParams {
    pub d_h: usize,
    pub d_ssm: usize,
    pub k: usize,
    pub s_max: f64,
    pub in_proj_w: SeqTensor,
    pub in_proj_b: SeqTensor,
    pub conv_kernel: SeqTensor,
    pub delta_w: SeqTensor,
    pub delta_b: SeqTensor,
    pub a_log: SeqTensor,
    pub b_w: SeqTensor,
    pub c_w: SeqTensor,
    pub d_skip: SeqTensor,
    pub out_w: SeqTensor,
    pub out_b: SeqTensor,
}

impl MambaLayerParams {
    pub fn init(d_h: usize, d_ssm: usize, k: usize, s_max: f64, rng: &mut Rng) -> Self {
        MambaLayerParams {
            d_h,
            d_ssm,
            k,
            s_max,
            in_proj_w: init::dense(rng, d_h, 2 * d_h),
            in_proj_b: init::zeros_row(2 * d_h),
            conv_kernel: init::conv_kernel(rng, d_h, k),
            delta_w: init::dense(rng, d_h, d_h),
            delta_b: init::zeros_row(d_h),
            a_log: init::a_log(d_h, d_ssm),
            b_w: init::dense(rng, d_h, d_ssm),
            c_w: init::dense(rng, d_h, d_ssm),
            d_skip: init::ones_row(d_h),
            out_w: init::dense(rng, d_h, d_h),
            out_b: init::zeros_row(d_h),
        }
    }

    /// All-zero projections (residual-only block); useful in tests.
    pub fn zeroed(d_h: usize, d_ssm: usize, k: usize) -> Self {
        MambaLayerParams {
            d_h,
            d_ssm,
            k,
            s_max: DEFAULT_S_MAX,
            in_proj_w: SeqTensor::zeros(d_h, 2 * d_h),
            in_proj_b: SeqTensor::zeros(1, 2 * d_h),
            conv_kernel: SeqTensor::zeros(d_h, k),
            delta_w: SeqTensor::zeros(d_h, d_h),
            delta_b: SeqTensor::zeros(1, d_h),
            a_log: init::a_log(d_h, d_ssm),
            b_w: SeqTensor::zeros(d_h, d_ssm),
            c_w: SeqTensor::zeros(d_h, d_ssm),
            d_skip: SeqTensor::zeros(1, d_h),
            out_w: SeqTensor::zeros(d_h, d_h),
            out_b: SeqTensor::zeros(1, d_h),
        }
    }

    /// Strictly negative state matrix A = -exp(a_log).
    pub fn a_matrix(&self) -> SeqTensor {
        SeqTensor::from_fn(self.d_h, self.d_ssm, |c, j| -self.a_log.get(c, j).exp())
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &SeqTensor)> {
        vec![
            ("in_proj_w", &self.in_proj_w),
            ("in_proj_b", &self.in_proj_b),
            ("conv_kernel", &self.conv_kernel),
            ("delta_w", &self.delta_w),
            ("delta_b", &self.delta_b),
            ("a_log", &self.a_log),
            ("b_w", &self.b_w),
            ("c_w", &self.c_w),
            ("d_skip", &self.d_skip),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut SeqTensor)> {
        vec![
            ("in_proj_w", &mut self.in_proj_w),
            ("in_proj_b", &mut self.in_proj_b),
            ("conv_kernel", &mut self.conv_kernel),
            ("delta_w", &mut self.delta_w),
            ("delta_b", &mut self.delta_b),
            ("a_log", &mut self.a_log),
            ("b_w", &mut self.b_w),
            ("c_w", &mut self.c_w),
            ("d_skip", &mut self.d_skip),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> MambaLayerHandles<C::H> {
        MambaLayerHandles {
            d_h: self.d_h,
            in_proj_w: ctx.lift(&self.in_proj_w),
            in_proj_b: ctx.lift(&self.in_proj_b),
            conv_kernel: ctx.lift(&self.conv_kernel),
            delta_w: ctx.lift(&self.delta_w),
            delta_b: ctx.lift(&self.delta_b),
            a_log: ctx.lift(&self.a_log),
            b_w: ctx.lift(&self.b_w),
            c_w: ctx.lift(&self.c_w),
            d_skip: ctx.lift(&self.d_skip),
            out_w: ctx.lift(&self.out_w),
            out_b: ctx.lift(&self.out_b),
        }
    }
}

/// Context-bound mirror of `MambaLayerParams`.
#[derive(Clone)]
pub struct MambaLayerHandles<H> {
    pub d_h: usize,
    pub in_proj_w: H,
    pub in_proj_b: H,
    pub conv_kernel: H,
    pub delta_w: H,
    pub delta_b: H,
    pub a_log: H,
    pub b_w: H,
    pub c_w: H,
    pub d_skip: H,
    pub out_w: H,
    pub out_b: H,
}

impl<H> MambaLayerHandles<H> {
    pub fn handles(&self) -> Vec<(&'static str, &H)> {
        vec![
            ("in_proj_w", &self.in_proj_w),
            ("in_proj_b", &self.in_proj_b),
            ("conv_kernel", &self.conv_kernel),
            ("delta_w", &self.delta_w),
            ("delta_b", &self.delta_b),
            ("a_log", &self.a_log),
            ("b_w", &self.b_w),
            ("c_w", &self.c_w),
            ("d_skip", &self.d_skip),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }
}
