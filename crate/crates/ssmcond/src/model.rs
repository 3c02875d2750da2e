//! Model configuration, the full parameter set, checkpoint I/O, and the
//! assembled conditioning pipelines.
//!
//! `MvcParams` is everything the deployed conditioning path needs; the
//! attention aligner lives only in `TrainParams`, so inference code cannot
//! depend on it by construction.

use crate::alignpitch::{align_ctx, AlignerHandles, AlignerParams};
use crate::dynamics::{
    assemble_conditioning_ctx, interp_align, temporal_predict_ctx, toy_decode_ctx,
    total_loss_ctx, ConditioningHeadHandles, ConditioningHeadParams, ConditioningSequence,
    DecoderStubHandles, DecoderStubParams, LossWeights, TemporalPredictorHandles,
    TemporalPredictorParams,
};
use crate::encoders::{
    expressive_encode_ctx, temporal_encode_ctx, text_encode_ctx, ExpressiveHandles,
    ExpressiveParams, TemporalHandles, TemporalParams, TextEncoderHandles, TextEncoderParams,
};
use crate::error::{Error, Result};
use crate::frontend::{style_embed_ctx, MelSpectrogram, PhonemeSequence, StyleHandles, StyleParams};
use crate::numerics::{self, Ctx, EvalCtx, Padding, Rng, SeqTensor};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d: usize,
    pub d_h: usize,
    pub d_s: usize,
    pub d_ssm: usize,
    pub k: usize,
    pub tau: f64,
    pub text_layers: usize,
    pub expressive_layers: usize,
    pub temporal_layers: usize,
    pub dynamics_layers: usize,
    pub aligner_hidden: usize,
    pub aligner_heads: usize,
    pub aligner_layers: usize,
    pub vocab: usize,
    pub mel_bins: usize,
    pub s_max: f64,
    pub seed: u64,
    /// Ablation-harness variant: gate the temporal encoder's fusion instead
    /// of the default linear projection.
    pub temporal_gated_fusion: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 64,
            d_h: 64,
            d_s: 32,
            d_ssm: 96,
            k: 5,
            tau: 1.0,
            text_layers: 6,
            expressive_layers: 2,
            temporal_layers: 2,
            dynamics_layers: 1,
            aligner_hidden: 256,
            aligner_heads: 4,
            aligner_layers: 2,
            vocab: 256,
            mel_bins: 80,
            s_max: 1e3,
            seed: 42,
            temporal_gated_fusion: false,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for desk-scale training runs.
    pub fn toy() -> Self {
        ModelConfig {
            d: 16,
            d_h: 16,
            d_s: 8,
            d_ssm: 8,
            k: 5,
            text_layers: 2,
            expressive_layers: 1,
            temporal_layers: 1,
            dynamics_layers: 1,
            aligner_hidden: 32,
            aligner_heads: 4,
            aligner_layers: 1,
            vocab: 32,
            ..ModelConfig::default()
        }
    }

    /// Micro shapes for end-to-end gradient checks.
    pub fn micro() -> Self {
        ModelConfig {
            d: 4,
            d_h: 4,
            d_s: 3,
            d_ssm: 4,
            k: 3,
            text_layers: 1,
            expressive_layers: 1,
            temporal_layers: 1,
            dynamics_layers: 1,
            aligner_hidden: 8,
            aligner_heads: 2,
            aligner_layers: 1,
            vocab: 5,
            mel_bins: 6,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.d,
            self.d_h,
            self.d_s,
            self.d_ssm,
            self.k,
            self.text_layers,
            self.expressive_layers,
            self.temporal_layers,
            self.dynamics_layers,
            self.aligner_hidden,
            self.aligner_heads,
            self.aligner_layers,
            self.vocab,
            self.mel_bins,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidArg {
                op: "ModelConfig",
                detail: "all dimensions and layer counts must be positive".into(),
            });
        }
        if self.tau <= 0.0 || self.s_max <= 0.0 {
            return Err(Error::InvalidArg {
                op: "ModelConfig",
                detail: "tau and s_max must be positive".into(),
            });
        }
        if self.k % 2 == 0 {
            return Err(Error::InvalidArg {
                op: "ModelConfig",
                detail: "conv kernel must be odd".into(),
            });
        }
        if self.aligner_hidden % self.aligner_heads != 0 {
            return Err(Error::InvalidArg {
                op: "ModelConfig",
                detail: "aligner hidden must divide by heads".into(),
            });
        }
        Ok(())
    }
}

/// All parameters of the deployed (inference-time) conditioning path.
#[derive(Debug, Clone)]
pub struct MvcParams {
    pub config: ModelConfig,
    pub style: StyleParams,
    pub embed: SeqTensor, // vocab x d
    pub text: TextEncoderParams,
    pub expressive: ExpressiveParams,
    pub temporal: TemporalParams,
    pub pitch: crate::alignpitch::PitchParams,
    pub predictor: TemporalPredictorParams,
    pub head: ConditioningHeadParams,
    pub decoder: DecoderStubParams,
}

impl MvcParams {
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        let mut rng = Rng::new(c.seed);
        Ok(MvcParams {
            config: c.clone(),
            style: StyleParams::init(c.mel_bins, c.d_s, c.k, &mut rng.fork(1)),
            embed: crate::numerics::init::dense(&mut rng.fork(2), c.vocab, c.d),
            text: TextEncoderParams::init(
                c.d,
                c.d_h,
                c.d_s,
                c.d_ssm,
                c.k,
                c.tau,
                c.text_layers,
                c.s_max,
                &mut rng.fork(3),
            )?,
            expressive: ExpressiveParams::init(
                c.mel_bins,
                c.d_h,
                c.d_s,
                c.d_ssm,
                c.k,
                c.expressive_layers,
                c.s_max,
                &mut rng.fork(4),
            ),
            temporal: {
                let mut trng = rng.fork(5);
                let base = TemporalParams::init(
                    c.d_s,
                    c.d_h,
                    c.d_ssm,
                    c.k,
                    c.temporal_layers,
                    c.s_max,
                    &mut trng,
                );
                if c.temporal_gated_fusion {
                    base.with_gated_fusion(c.tau, &mut trng)?
                } else {
                    base
                }
            },
            pitch: crate::alignpitch::PitchParams::init(c.d_h, c.tau, &mut rng.fork(6))?,
            predictor: TemporalPredictorParams::init(
                c.d_h,
                c.d_ssm,
                c.k,
                c.dynamics_layers,
                c.s_max,
                &mut rng.fork(7),
            ),
            head: ConditioningHeadParams::init(c.d_h, c.tau, &mut rng.fork(8))?,
            decoder: DecoderStubParams::init(c.d_h, c.mel_bins, &mut rng.fork(9)),
        })
    }

    pub fn visit(&self, f: &mut dyn FnMut(String, &SeqTensor)) {
        for (n, t) in self.style.named_tensors() {
            f(format!("style.{n}"), t);
        }
        f("embed.table".into(), &self.embed);
        f("text.in_w".into(), &self.text.in_w);
        f("text.in_b".into(), &self.text.in_b);
        for (i, l) in self.text.fwd.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("text.fwd.{i}.{n}"), t);
            }
        }
        for (i, l) in self.text.bwd.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("text.bwd.{i}.{n}"), t);
            }
        }
        for (n, t) in self.text.fusion.named_tensors() {
            f(format!("text.fusion.{n}"), t);
        }
        for (n, t) in self.text.adaln.named_tensors() {
            f(format!("text.adaln.{n}"), t);
        }
        for (n, t) in self.expressive.gt.named_tensors() {
            f(format!("expressive.gt.{n}"), t);
        }
        for (n, t) in self.expressive.adaln.named_tensors() {
            f(format!("expressive.adaln.{n}"), t);
        }
        for (i, l) in self.expressive.blocks.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("expressive.blocks.{i}.{n}"), t);
            }
        }
        for (n, t) in self.temporal.gt.named_tensors() {
            f(format!("temporal.gt.{n}"), t);
        }
        f("temporal.conv_kernel".into(), &self.temporal.conv_kernel);
        for (i, l) in self.temporal.fwd.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("temporal.fwd.{i}.{n}"), t);
            }
        }
        for (i, l) in self.temporal.bwd.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("temporal.bwd.{i}.{n}"), t);
            }
        }
        f("temporal.w_f".into(), &self.temporal.w_f);
        if let Some(g) = &self.temporal.gated_fusion {
            for (n, t) in g.named_tensors() {
                f(format!("temporal.gated_fusion.{n}"), t);
            }
        }
        for (n, t) in self.pitch.fusion.named_tensors() {
            f(format!("pitch.fusion.{n}"), t);
        }
        f("pitch.w_f0".into(), &self.pitch.w_f0);
        f("pitch.b_f0".into(), &self.pitch.b_f0);
        f("dynamics.conv_kernel".into(), &self.predictor.conv_kernel);
        for (i, l) in self.predictor.blocks.iter().enumerate() {
            for (n, t) in l.named_tensors() {
                f(format!("dynamics.blocks.{i}.{n}"), t);
            }
        }
        for (n, t) in self.head.fusion.named_tensors() {
            f(format!("head.fusion.{n}"), t);
        }
        f("head.w_f0".into(), &self.head.w_f0);
        f("head.b_f0".into(), &self.head.b_f0);
        f("head.w_n".into(), &self.head.w_n);
        f("decoder.w".into(), &self.decoder.w);
        f("decoder.b".into(), &self.decoder.b);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut SeqTensor)) {
        for (n, t) in self.style.named_tensors_mut() {
            f(format!("style.{n}"), t);
        }
        f("embed.table".into(), &mut self.embed);
        f("text.in_w".into(), &mut self.text.in_w);
        f("text.in_b".into(), &mut self.text.in_b);
        for (i, l) in self.text.fwd.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("text.fwd.{i}.{n}"), t);
            }
        }
        for (i, l) in self.text.bwd.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("text.bwd.{i}.{n}"), t);
            }
        }
        for (n, t) in self.text.fusion.named_tensors_mut() {
            f(format!("text.fusion.{n}"), t);
        }
        for (n, t) in self.text.adaln.named_tensors_mut() {
            f(format!("text.adaln.{n}"), t);
        }
        for (n, t) in self.expressive.gt.named_tensors_mut() {
            f(format!("expressive.gt.{n}"), t);
        }
        for (n, t) in self.expressive.adaln.named_tensors_mut() {
            f(format!("expressive.adaln.{n}"), t);
        }
        for (i, l) in self.expressive.blocks.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("expressive.blocks.{i}.{n}"), t);
            }
        }
        for (n, t) in self.temporal.gt.named_tensors_mut() {
            f(format!("temporal.gt.{n}"), t);
        }
        f("temporal.conv_kernel".into(), &mut self.temporal.conv_kernel);
        for (i, l) in self.temporal.fwd.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("temporal.fwd.{i}.{n}"), t);
            }
        }
        for (i, l) in self.temporal.bwd.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("temporal.bwd.{i}.{n}"), t);
            }
        }
        f("temporal.w_f".into(), &mut self.temporal.w_f);
        if let Some(g) = &mut self.temporal.gated_fusion {
            for (n, t) in g.named_tensors_mut() {
                f(format!("temporal.gated_fusion.{n}"), t);
            }
        }
        for (n, t) in self.pitch.fusion.named_tensors_mut() {
            f(format!("pitch.fusion.{n}"), t);
        }
        f("pitch.w_f0".into(), &mut self.pitch.w_f0);
        f("pitch.b_f0".into(), &mut self.pitch.b_f0);
        f("dynamics.conv_kernel".into(), &mut self.predictor.conv_kernel);
        for (i, l) in self.predictor.blocks.iter_mut().enumerate() {
            for (n, t) in l.named_tensors_mut() {
                f(format!("dynamics.blocks.{i}.{n}"), t);
            }
        }
        for (n, t) in self.head.fusion.named_tensors_mut() {
            f(format!("head.fusion.{n}"), t);
        }
        f("head.w_f0".into(), &mut self.head.w_f0);
        f("head.b_f0".into(), &mut self.head.b_f0);
        f("head.w_n".into(), &mut self.head.w_n);
        f("decoder.w".into(), &mut self.decoder.w);
        f("decoder.b".into(), &mut self.decoder.b);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> MvcHandles<C::H> {
        MvcHandles {
            style: self.style.bind(ctx),
            embed: ctx.lift(&self.embed),
            text: self.text.bind(ctx),
            expressive: self.expressive.bind(ctx),
            temporal: self.temporal.bind(ctx),
            pitch: self.pitch.bind(ctx),
            predictor: self.predictor.bind(ctx),
            head: self.head.bind(ctx),
            decoder: self.decoder.bind(ctx),
        }
    }
}

pub struct MvcHandles<H> {
    pub style: StyleHandles<H>,
    pub embed: H,
    pub text: TextEncoderHandles<H>,
    pub expressive: ExpressiveHandles<H>,
    pub temporal: TemporalHandles<H>,
    pub pitch: crate::alignpitch::PitchHandles<H>,
    pub predictor: TemporalPredictorHandles<H>,
    pub head: ConditioningHeadHandles<H>,
    pub decoder: DecoderStubHandles<H>,
}

/// Training-only parameters: the deployed path plus the alignment teacher.
#[derive(Debug, Clone)]
pub struct TrainParams {
    pub mvc: MvcParams,
    pub aligner: AlignerParams,
}

impl TrainParams {
    pub fn init(config: &ModelConfig) -> Result<Self> {
        let mvc = MvcParams::init(config)?;
        let mut rng = Rng::new(config.seed ^ 0xA11A_0000);
        let aligner = AlignerParams::with_dims(
            config.d_h,
            config.aligner_hidden,
            config.aligner_heads,
            config.aligner_layers,
            &mut rng,
        )?;
        Ok(TrainParams { mvc, aligner })
    }

    pub fn visit(&self, f: &mut dyn FnMut(String, &SeqTensor)) {
        self.mvc.visit(f);
        for (i, l) in self.aligner.layers.iter().enumerate() {
            f(format!("aligner.layers.{i}.w_q"), &l.w_q);
            f(format!("aligner.layers.{i}.w_k"), &l.w_k);
            f(format!("aligner.layers.{i}.w_v"), &l.w_v);
            f(format!("aligner.layers.{i}.w_out"), &l.w_out);
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut SeqTensor)) {
        self.mvc.visit_mut(f);
        for (i, l) in self.aligner.layers.iter_mut().enumerate() {
            f(format!("aligner.layers.{i}.w_q"), &mut l.w_q);
            f(format!("aligner.layers.{i}.w_k"), &mut l.w_k);
            f(format!("aligner.layers.{i}.w_v"), &mut l.w_v);
            f(format!("aligner.layers.{i}.w_out"), &mut l.w_out);
        }
    }

    /// Flattens every parameter (visit order) into one vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    /// Writes a flat vector (visit order) back into the parameters.
    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.visit_mut(&mut |_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        });
        assert_eq!(off, flat.len(), "flat parameter length");
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> TrainHandles<C::H> {
        TrainHandles {
            mvc: self.mvc.bind(ctx),
            aligner: self.aligner.bind(ctx),
        }
    }
}

pub struct TrainHandles<H> {
    pub mvc: MvcHandles<H>,
    pub aligner: AlignerHandles<H>,
}

impl<H: Clone> TrainHandles<H> {
    /// Handles in the same order as `TrainParams::visit`.
    pub fn visit_handles(&self, f: &mut dyn FnMut(String, &H)) {
        let m = &self.mvc;
        for (n, h) in [
            ("style.conv_kernel", &m.style.conv_kernel),
            ("style.w", &m.style.w),
            ("style.b", &m.style.b),
        ] {
            f(n.into(), h);
        }
        f("embed.table".into(), &m.embed);
        f("text.in_w".into(), &m.text.in_w);
        f("text.in_b".into(), &m.text.in_b);
        for (i, l) in m.text.fwd.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("text.fwd.{i}.{n}"), h);
            }
        }
        for (i, l) in m.text.bwd.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("text.bwd.{i}.{n}"), h);
            }
        }
        f("text.fusion.w_g".into(), &m.text.fusion.w_g);
        f("text.fusion.w_o".into(), &m.text.fusion.w_o);
        for (n, h) in [
            ("gamma_w", &m.text.adaln.gamma_w),
            ("gamma_b", &m.text.adaln.gamma_b),
            ("beta_w", &m.text.adaln.beta_w),
            ("beta_b", &m.text.adaln.beta_b),
        ] {
            f(format!("text.adaln.{n}"), h);
        }
        for (n, h) in [
            ("proj_w", &m.expressive.gt.proj_w),
            ("proj_b", &m.expressive.gt.proj_b),
            ("u", &m.expressive.gt.u),
        ] {
            f(format!("expressive.gt.{n}"), h);
        }
        for (n, h) in [
            ("gamma_w", &m.expressive.adaln.gamma_w),
            ("gamma_b", &m.expressive.adaln.gamma_b),
            ("beta_w", &m.expressive.adaln.beta_w),
            ("beta_b", &m.expressive.adaln.beta_b),
        ] {
            f(format!("expressive.adaln.{n}"), h);
        }
        for (i, l) in m.expressive.blocks.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("expressive.blocks.{i}.{n}"), h);
            }
        }
        for (n, h) in [
            ("proj_w", &m.temporal.gt.proj_w),
            ("proj_b", &m.temporal.gt.proj_b),
            ("u", &m.temporal.gt.u),
        ] {
            f(format!("temporal.gt.{n}"), h);
        }
        f("temporal.conv_kernel".into(), &m.temporal.conv_kernel);
        for (i, l) in m.temporal.fwd.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("temporal.fwd.{i}.{n}"), h);
            }
        }
        for (i, l) in m.temporal.bwd.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("temporal.bwd.{i}.{n}"), h);
            }
        }
        f("temporal.w_f".into(), &m.temporal.w_f);
        if let Some(g) = &m.temporal.gated_fusion {
            f("temporal.gated_fusion.w_g".into(), &g.w_g);
            f("temporal.gated_fusion.w_o".into(), &g.w_o);
        }
        f("pitch.fusion.w_g".into(), &m.pitch.fusion.w_g);
        f("pitch.fusion.w_o".into(), &m.pitch.fusion.w_o);
        f("pitch.w_f0".into(), &m.pitch.w_f0);
        f("pitch.b_f0".into(), &m.pitch.b_f0);
        f("dynamics.conv_kernel".into(), &m.predictor.conv_kernel);
        for (i, l) in m.predictor.blocks.iter().enumerate() {
            for (n, h) in l.handles() {
                f(format!("dynamics.blocks.{i}.{n}"), h);
            }
        }
        f("head.fusion.w_g".into(), &m.head.fusion.w_g);
        f("head.fusion.w_o".into(), &m.head.fusion.w_o);
        f("head.w_f0".into(), &m.head.w_f0);
        f("head.b_f0".into(), &m.head.b_f0);
        f("head.w_n".into(), &m.head.w_n);
        f("decoder.w".into(), &m.decoder.w);
        f("decoder.b".into(), &m.decoder.b);
        for (i, l) in self.aligner.layers.iter().enumerate() {
            f(format!("aligner.layers.{i}.w_q"), &l.w_q);
            f(format!("aligner.layers.{i}.w_k"), &l.w_k);
            f(format!("aligner.layers.{i}.w_v"), &l.w_v);
            f(format!("aligner.layers.{i}.w_out"), &l.w_out);
        }
    }
}

/// Everything the inference pipeline produces.
#[derive(Debug)]
pub struct ConditionOutputs {
    pub h_t_s: SeqTensor,
    pub gate_trace: SeqTensor,
    pub h_e: SeqTensor,
    pub h_b: SeqTensor,
    pub h_p: SeqTensor,
    /// Pitch-module contour (the dedicated F0 head).
    pub f0: SeqTensor,
    pub cond: ConditioningSequence,
}

impl ConditionOutputs {
    pub fn encoder_outputs(&self) -> crate::encoders::EncoderOutputs {
        crate::encoders::EncoderOutputs {
            h_t_s: self.h_t_s.clone(),
            h_e: self.h_e.clone(),
            h_b: self.h_b.clone(),
        }
    }
}

/// Deployed conditioning path: attention-free end to end.
pub fn condition(
    params: &MvcParams,
    tokens: &PhonemeSequence,
    ref_mel: &MelSpectrogram,
) -> Result<ConditionOutputs> {
    tokens.validate(params.config.vocab)?;
    if tokens.is_empty() {
        return Err(Error::InvalidArg {
            op: "condition",
            detail: "empty token sequence".into(),
        });
    }
    if ref_mel.frames() == 0 {
        return Err(Error::InvalidArg {
            op: "condition",
            detail: "zero-frame reference mel".into(),
        });
    }
    if ref_mel.mel_bins() != params.config.mel_bins {
        return Err(Error::Shape {
            op: "condition",
            detail: format!(
                "mel has {} bins, config wants {}",
                ref_mel.mel_bins(),
                params.config.mel_bins
            ),
        });
    }
    let mut ctx = EvalCtx::new();
    let h = params.bind(&mut ctx);
    let frames = ctx.lift(&ref_mel.to_frames());
    condition_with_handles(&mut ctx, &h, &tokens.ids, &frames)
}

/// Runs the bound pipeline; shared by `condition` and the bench harness.
pub fn condition_with_handles(
    ctx: &mut EvalCtx,
    h: &MvcHandles<std::rc::Rc<SeqTensor>>,
    ids: &[usize],
    mel_frames: &std::rc::Rc<SeqTensor>,
) -> Result<ConditionOutputs> {
    let t_m = ctx.val(mel_frames).rows();
    let e = style_embed_ctx(ctx, mel_frames, &h.style);
    let x = ctx.gather(&h.embed, ids);
    let (h_t_s, gates) = text_encode_ctx(ctx, &x, &e, &h.text, Padding::Same);
    let h_e = expressive_encode_ctx(ctx, mel_frames, &e, &h.expressive);
    let h_b = temporal_encode_ctx(ctx, &e, t_m, &h.temporal);
    let h_p = crate::alignpitch::pitch_fuse_ctx(ctx, &h_e, &h_b, &h.pitch);
    let f0 = crate::alignpitch::predict_f0_ctx(ctx, &h_p, &h.pitch);
    let h_a = interp_align(ctx.val(&h_t_s), t_m)?;
    let h_a = ctx.lift(&h_a);
    let h_tm = temporal_predict_ctx(ctx, &h_a, &h.predictor);
    let (f0_hat, n, _) = assemble_conditioning_ctx(ctx, &h_tm, &h_p, &h.head);
    let cond = ConditioningSequence::pack(ctx.val(&f0_hat).clone(), ctx.val(&n).clone())?;
    Ok(ConditionOutputs {
        h_t_s: ctx.val(&h_t_s).clone(),
        gate_trace: ctx.val(&gates).clone(),
        h_e: ctx.val(&h_e).clone(),
        h_b: ctx.val(&h_b).clone(),
        h_p: ctx.val(&h_p).clone(),
        f0: ctx.val(&f0).clone(),
        cond,
    })
}

/// Training forward pass (context form): style, encoders, aligner, pitch,
/// dynamics, toy decoder, and the total loss.
pub struct TrainingForward<H> {
    pub loss: H,
    pub alpha: H,
    pub m_hat: H,
    pub f0: H,
    pub h_d: H,
}

pub fn training_forward_ctx<C: Ctx>(
    ctx: &mut C,
    h: &TrainHandles<C::H>,
    ids: &[usize],
    mel_values: &C::H, // F x T_m target
    weights: &LossWeights,
) -> TrainingForward<C::H> {
    training_forward_perturbed_ctx(ctx, h, ids, mel_values, weights, None)
}

/// Training forward with an optional robustness hook: `alpha_noise` holds
/// per-entry multipliers (1 + u); the perturbed attention is renormalized
/// before it builds the frame-synchronous features and the alignment loss.
pub fn training_forward_perturbed_ctx<C: Ctx>(
    ctx: &mut C,
    h: &TrainHandles<C::H>,
    ids: &[usize],
    mel_values: &C::H, // F x T_m target
    weights: &LossWeights,
    alpha_noise: Option<&SeqTensor>,
) -> TrainingForward<C::H> {
    let mel_frames = ctx.transpose(mel_values);
    let t_m = ctx.val(&mel_frames).rows();
    let e = style_embed_ctx(ctx, &mel_frames, &h.mvc.style);
    let x = ctx.gather(&h.mvc.embed, ids);
    let (h_t_s, _gates) = text_encode_ctx(ctx, &x, &e, &h.mvc.text, Padding::Same);
    let h_e = expressive_encode_ctx(ctx, &mel_frames, &e, &h.mvc.expressive);
    let h_b = temporal_encode_ctx(ctx, &e, t_m, &h.mvc.temporal);
    let (alpha, h_a) = align_ctx(ctx, &h_e, &h_t_s, &h.aligner);
    let (alpha, h_a) = match alpha_noise {
        Some(noise) => {
            let noise = ctx.lift(noise);
            let bumped = ctx.mul(&alpha, &noise);
            let renorm = ctx.row_normalize(&bumped);
            let h_a = ctx.matmul(&renorm, &h_t_s);
            (renorm, h_a)
        }
        None => (alpha, h_a),
    };
    let h_p = crate::alignpitch::pitch_fuse_ctx(ctx, &h_e, &h_b, &h.mvc.pitch);
    let f0 = crate::alignpitch::predict_f0_ctx(ctx, &h_p, &h.mvc.pitch);
    let h_tm = temporal_predict_ctx(ctx, &h_a, &h.mvc.predictor);
    let (_f0_hat, _n, h_d) = assemble_conditioning_ctx(ctx, &h_tm, &h_p, &h.mvc.head);
    let m_hat = toy_decode_ctx(ctx, &h_d, &h.mvc.decoder);
    let loss = total_loss_ctx(ctx, &m_hat, mel_values, &alpha, weights);
    TrainingForward {
        loss,
        alpha,
        m_hat,
        f0,
        h_d,
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json plus one MVCT file per tensor
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<ManifestEntry>,
}

fn tensor_file_name(name: &str) -> String {
    format!("{}.mvct", name.replace('.', "_"))
}

fn save_tensors(
    dir: &Path,
    config: &ModelConfig,
    tensors: &[(String, &SeqTensor)],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (name, t) in tensors {
        let file = tensor_file_name(name);
        numerics::write_tensor(t, dir.join(&file))?;
        entries.push(ManifestEntry {
            name: name.clone(),
            rows: t.rows(),
            cols: t.cols(),
            file,
        });
    }
    let manifest = Manifest {
        format: "ssmcond-checkpoint".into(),
        version: 1,
        config: config.clone(),
        tensors: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn save_checkpoint(dir: impl AsRef<Path>, params: &TrainParams) -> Result<()> {
    let mut owned: Vec<(String, SeqTensor)> = Vec::new();
    params.visit(&mut |name, t| owned.push((name, t.clone())));
    let refs: Vec<(String, &SeqTensor)> =
        owned.iter().map(|(n, t)| (n.clone(), t)).collect();
    save_tensors(dir.as_ref(), &params.mvc.config, &refs)
}

/// Saves only the deployed path (no aligner tensors).
pub fn save_inference_checkpoint(dir: impl AsRef<Path>, params: &MvcParams) -> Result<()> {
    let mut owned: Vec<(String, SeqTensor)> = Vec::new();
    params.visit(&mut |name, t| owned.push((name, t.clone())));
    let refs: Vec<(String, &SeqTensor)> =
        owned.iter().map(|(n, t)| (n.clone(), t)).collect();
    save_tensors(dir.as_ref(), &params.config, &refs)
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let json = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::Checkpoint(format!("missing manifest: {e}")))?;
    Ok(serde_json::from_str(&json)?)
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<TrainParams> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut params = TrainParams::init(&manifest.config)?;
    let mut problems = Vec::new();
    {
        let available: std::collections::BTreeMap<String, String> = manifest
            .tensors
            .iter()
            .map(|e| (e.name.clone(), e.file.clone()))
            .collect();
        params.visit_mut(&mut |name, t| {
            match available.get(&name) {
                Some(file) => match numerics::read_tensor(dir.join(file)) {
                    Ok(loaded) => {
                        if loaded.rows() == t.rows() && loaded.cols() == t.cols() {
                            *t = loaded;
                        } else {
                            problems.push(format!("{name}: unexpected shape"));
                        }
                    }
                    Err(e) => problems.push(format!("{name}: {e}")),
                },
                None => problems.push(format!("{name}: absent")),
            }
        });
    }
    if !problems.is_empty() {
        return Err(Error::Checkpoint(problems.join("; ")));
    }
    Ok(params)
}

/// Loads only the deployed path; aligner tensors in the directory (if any)
/// are ignored.
pub fn load_inference_checkpoint(dir: impl AsRef<Path>) -> Result<MvcParams> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut params = MvcParams::init(&manifest.config)?;
    let mut problems = Vec::new();
    {
        let available: std::collections::BTreeMap<String, String> = manifest
            .tensors
            .iter()
            .map(|e| (e.name.clone(), e.file.clone()))
            .collect();
        params.visit_mut(&mut |name, t| {
            match available.get(&name) {
                Some(file) => match numerics::read_tensor(dir.join(file)) {
                    Ok(loaded) => {
                        if loaded.rows() == t.rows() && loaded.cols() == t.cols() {
                            *t = loaded;
                        } else {
                            problems.push(format!("{name}: unexpected shape"));
                        }
                    }
                    Err(e) => problems.push(format!("{name}: {e}")),
                },
                None => problems.push(format!("{name}: absent")),
            }
        });
    }
    if !problems.is_empty() {
        return Err(Error::Checkpoint(problems.join("; ")));
    }
    Ok(params)
}
