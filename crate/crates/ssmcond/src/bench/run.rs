//! Wall-clock and memory measurement harness.
//!
//! Medians over R repeats after warmup runs; activation memory is counted by
//! the allocation auditor (live tensor elements), so memory numbers are
//! deterministic while wall-clock varies.

use crate::bench::report::{
    BenchReport, BreakdownEntry, MemoryReport, MemoryRow, ScalingReport, ScalingRow,
    ThroughputReport,
};
use crate::dynamics::interp_align;
use crate::encoders::{expressive_encode_ctx, temporal_encode_ctx, text_encode_ctx};
use crate::error::Result;
use crate::frontend::style_embed_ctx;
use crate::model::{ModelConfig, MvcParams};
use crate::numerics::{audit, Ctx, EvalCtx, Padding, Rng, SeqTensor};
use crate::streaming::{open_session_frames, StreamPipelineParams};
use std::sync::Arc;
use std::time::Instant;

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_WARMUPS: usize = 2;

/// Compact dimensions for desk-scale wall-clock runs.
pub fn bench_config() -> ModelConfig {
    ModelConfig {
        d: 32,
        d_h: 32,
        d_s: 16,
        d_ssm: 96,
        text_layers: 6,
        expressive_layers: 2,
        temporal_layers: 2,
        vocab: 64,
        ..ModelConfig::default()
    }
}

fn median_ms(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples[samples.len() / 2]
}

fn time_ms(f: &mut dyn FnMut()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

fn measure_samples(repeats: usize, warmups: usize, f: &mut dyn FnMut()) -> Vec<f64> {
    for _ in 0..warmups {
        f();
    }
    (0..repeats).map(|_| time_ms(f)).collect()
}

fn seeded_inputs(config: &ModelConfig, t_x: usize, t_m: usize) -> (Vec<usize>, SeqTensor) {
    let mut rng = Rng::new(config.seed ^ 0xBE7C);
    let ids: Vec<usize> = (0..t_x).map(|_| rng.below(config.vocab)).collect();
    let frames = rng.uniform_tensor(t_m, config.mel_bins, -2.0, 1.0);
    (ids, frames)
}

/// Per-stage timing of the deployed conditioning path.
pub fn bench_breakdown(
    params: &MvcParams,
    t_x: usize,
    t_m: usize,
    repeats: usize,
    warmups: usize,
) -> Result<BenchReport> {
    assert!(repeats >= 3, "repeats must be at least 3");
    let config = &params.config;
    let (ids, frames) = seeded_inputs(config, t_x, t_m);

    let mut ctx = EvalCtx::new();
    let h = params.bind(&mut ctx);
    let frames_h = ctx.lift(&frames);

    // one reference pass for fixed stage inputs and the element count
    let total_before = audit::total_allocated();
    let e = style_embed_ctx(&mut ctx, &frames_h, &h.style);
    let x = ctx.gather(&h.embed, &ids);
    let (h_t_s, _) = text_encode_ctx(&mut ctx, &x, &e, &h.text, Padding::Same);
    let h_e = expressive_encode_ctx(&mut ctx, &frames_h, &e, &h.expressive);
    let h_b = temporal_encode_ctx(&mut ctx, &e, t_m, &h.temporal);
    let h_p = crate::alignpitch::pitch_fuse_ctx(&mut ctx, &h_e, &h_b, &h.pitch);
    let h_a = ctx.lift(&interp_align(ctx.val(&h_t_s), t_m)?);
    let h_tm = crate::dynamics::temporal_predict_ctx(&mut ctx, &h_a, &h.predictor);
    let (_, _, h_d) = crate::dynamics::assemble_conditioning_ctx(&mut ctx, &h_tm, &h_p, &h.head);
    let _m_hat = crate::dynamics::toy_decode_ctx(&mut ctx, &h_d, &h.decoder);
    let elements_per_pass = audit::total_allocated() - total_before;

    let mut entries: Vec<BreakdownEntry> = Vec::new();
    let mut stability_warning = false;
    let mut push = |name: &str, mut samples: Vec<f64>| {
        let full = median_ms(&mut samples);
        let half = median_ms(&mut samples[..samples.len().div_ceil(2)].to_vec());
        if (half - full).abs() > 0.2 * full {
            stability_warning = true;
        }
        entries.push(BreakdownEntry {
            name: name.into(),
            median_ms: full,
            pct: 0.0,
        });
    };

    push(
        "style",
        measure_samples(repeats, warmups, &mut || {
            let _ = style_embed_ctx(&mut ctx, &frames_h, &h.style);
        }),
    );
    push(
        "text",
        measure_samples(repeats, warmups, &mut || {
            let _ = text_encode_ctx(&mut ctx, &x, &e, &h.text, Padding::Same);
        }),
    );
    push(
        "expressive",
        measure_samples(repeats, warmups, &mut || {
            let _ = expressive_encode_ctx(&mut ctx, &frames_h, &e, &h.expressive);
        }),
    );
    push(
        "temporal",
        measure_samples(repeats, warmups, &mut || {
            let _ = temporal_encode_ctx(&mut ctx, &e, t_m, &h.temporal);
        }),
    );
    push(
        "align_stub",
        measure_samples(repeats, warmups, &mut || {
            let _ = interp_align(ctx.val(&h_t_s), t_m).unwrap();
        }),
    );
    push(
        "dynamics",
        measure_samples(repeats, warmups, &mut || {
            let h_p2 = crate::alignpitch::pitch_fuse_ctx(&mut ctx, &h_e, &h_b, &h.pitch);
            let h_tm2 = crate::dynamics::temporal_predict_ctx(&mut ctx, &h_a, &h.predictor);
            let _ =
                crate::dynamics::assemble_conditioning_ctx(&mut ctx, &h_tm2, &h_p2, &h.head);
        }),
    );
    push(
        "toy_decoder",
        measure_samples(repeats, warmups, &mut || {
            let _ = crate::dynamics::toy_decode_ctx(&mut ctx, &h_d, &h.decoder);
        }),
    );

    let total_ms: f64 = entries.iter().map(|e| e.median_ms).sum();
    for e in entries.iter_mut() {
        e.pct = 100.0 * e.median_ms / total_ms;
    }
    Ok(BenchReport {
        t_x,
        t_m,
        repeats,
        warmups,
        total_ms,
        entries,
        elements_per_pass,
        stability_warning,
    })
}

/// Times the full encoder stack (style + text + expressive + temporal) at
/// each T, with T_x = T_m = T.
pub fn bench_scaling(
    params: &MvcParams,
    t_list: &[usize],
    repeats: usize,
    warmups: usize,
) -> Result<ScalingReport> {
    assert!(t_list.len() >= 2, "need at least two sequence lengths");
    let config = &params.config;
    // per-frame activation elements: probe two lengths so per-call constants
    // (e.g. the materialized state matrix) cancel exactly
    let elements_per_frame = {
        let probe = |t: usize| -> u64 {
            let (ids, frames) = seeded_inputs(config, t, t);
            let mut ctx = EvalCtx::new();
            let h = params.bind(&mut ctx);
            let frames_h = ctx.lift(&frames);
            let before = audit::total_allocated();
            run_encoder_stack(&mut ctx, &h, &ids, &frames_h, t);
            audit::total_allocated() - before
        };
        let (a1, a2) = (probe(64), probe(128));
        (a2 - a1) / 64
    };
    // round-robin the repeats across lengths so slow clock drift (thermal,
    // turbo decay) hits every T equally instead of only the longest runs
    let mut inputs = Vec::new();
    for &t in t_list {
        let (ids, frames) = seeded_inputs(config, t, t);
        let mut ctx = EvalCtx::new();
        let h = params.bind(&mut ctx);
        let frames_h = ctx.lift(&frames);
        inputs.push((t, ids, ctx, h, frames_h));
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); t_list.len()];
    for rep in 0..warmups + repeats {
        for (i, (t, ids, ctx, h, frames_h)) in inputs.iter_mut().enumerate() {
            let ms = time_ms(&mut || {
                run_encoder_stack(ctx, h, ids, frames_h, *t);
            });
            if rep >= warmups {
                samples[i].push(ms);
            }
        }
    }
    let mut rows: Vec<ScalingRow> = Vec::new();
    for (i, &t) in t_list.iter().enumerate() {
        let min = samples[i].iter().copied().fold(f64::INFINITY, f64::min);
        let median = median_ms(&mut samples[i]);
        let elements = elements_per_frame * t as u64;
        let (time_ratio, element_ratio) = match rows.last() {
            Some(prev) => (
                Some(min / prev.min_ms),
                Some(elements as f64 / prev.elements as f64),
            ),
            None => (None, None),
        };
        rows.push(ScalingRow {
            t,
            median_ms: median,
            min_ms: min,
            elements,
            time_ratio,
            element_ratio,
        });
    }
    let pass = rows.windows(2).all(|w| {
        let r = w[1].t as f64 / w[0].t as f64;
        let ratio = w[1].min_ms / w[0].min_ms;
        ratio >= 0.85 * r && ratio <= 1.15 * r
    });
    Ok(ScalingReport { rows, pass })
}

fn run_encoder_stack(
    ctx: &mut EvalCtx,
    h: &crate::model::MvcHandles<std::rc::Rc<SeqTensor>>,
    ids: &[usize],
    frames_h: &std::rc::Rc<SeqTensor>,
    t_m: usize,
) {
    let e = style_embed_ctx(ctx, frames_h, &h.style);
    let x = ctx.gather(&h.embed, ids);
    let _ = text_encode_ctx(ctx, &x, &e, &h.text, Padding::Same);
    let _ = expressive_encode_ctx(ctx, frames_h, &e, &h.expressive);
    let _ = temporal_encode_ctx(ctx, &e, t_m, &h.temporal);
}

/// Peak activation elements for offline runs (grows with T) or streaming
/// sessions (constant in stream length for fixed L).
pub fn audit_memory(
    params: &MvcParams,
    t_list: &[usize],
    mode: &str,
    lookahead: usize,
) -> Result<MemoryReport> {
    let config = &params.config;
    let mut rows = Vec::new();
    match mode {
        "offline" => {
            for &t in t_list {
                let (ids, frames) = seeded_inputs(config, t, t);
                let mut ctx = EvalCtx::new();
                let h = params.bind(&mut ctx);
                let frames_h = ctx.lift(&frames);
                let ((), peak) = audit::measure_region(|| {
                    run_encoder_stack(&mut ctx, &h, &ids, &frames_h, t);
                });
                rows.push(MemoryRow {
                    t,
                    peak_elements: peak,
                });
            }
        }
        "stream" => {
            let mut rng = Rng::new(config.seed ^ 0x57EA);
            let pipe = Arc::new(StreamPipelineParams::init(
                config.d,
                config.d_h,
                config.d_ssm,
                config.k,
                config.text_layers,
                config.s_max,
                &mut rng,
            ));
            const CHUNK: usize = 100;
            for &t in t_list {
                let pipe = pipe.clone();
                let mut rng = Rng::new(config.seed ^ t as u64);
                let template = rng.uniform_tensor(CHUNK, config.d, -1.0, 1.0);
                let ((), peak) = audit::measure_region(|| {
                    let mut session = open_session_frames(pipe, lookahead);
                    let mut fed = 0usize;
                    while fed < t {
                        let take = CHUNK.min(t - fed);
                        let chunk = if take == CHUNK {
                            template.clone()
                        } else {
                            crate::numerics::slice_rows(&template, 0, take)
                        };
                        let out = session.feed(&chunk).expect("stream feed");
                        drop(out);
                        fed += take;
                    }
                    let _ = session.close().expect("stream close");
                });
                rows.push(MemoryRow {
                    t,
                    peak_elements: peak,
                });
            }
        }
        other => {
            return Err(crate::error::Error::InvalidArg {
                op: "audit_memory",
                detail: format!("unknown mode {other:?}"),
            })
        }
    }
    Ok(MemoryReport {
        mode: mode.into(),
        rows,
    })
}

/// Multi-session throughput: independent sessions on separate threads over
/// shared immutable params. Single-session remains the default elsewhere.
pub fn bench_throughput(
    pipe: Arc<StreamPipelineParams>,
    sessions: usize,
    frames_per_session: usize,
    lookahead: usize,
) -> crate::error::Result<ThroughputReport> {
    const CHUNK: usize = 64;
    let start = Instant::now();
    let workers: Vec<_> = (0..sessions)
        .map(|i| {
            let pipe = pipe.clone();
            std::thread::spawn(move || {
                let d_in = pipe.d_in;
                let mut rng = Rng::new(0xAB5E ^ i as u64);
                let template = rng.uniform_tensor(CHUNK, d_in, -1.0, 1.0);
                let mut session = open_session_frames(pipe, lookahead);
                let mut fed = 0usize;
                let mut sink = 0.0f64;
                while fed < frames_per_session {
                    let take = CHUNK.min(frames_per_session - fed);
                    let chunk = if take == CHUNK {
                        template.clone()
                    } else {
                        crate::numerics::slice_rows(&template, 0, take)
                    };
                    let out = session.feed(&chunk).expect("feed");
                    sink += out.data().iter().sum::<f64>();
                    fed += take;
                }
                sink += session.close().expect("close").data().iter().sum::<f64>();
                sink
            })
        })
        .collect();
    let mut checksum = 0.0;
    for w in workers {
        checksum += w.join().expect("worker thread");
    }
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    assert!(checksum.is_finite());
    Ok(ThroughputReport {
        sessions,
        frames_per_session,
        lookahead_frames: lookahead,
        elapsed_ms,
        frames_per_second: (sessions * frames_per_session) as f64 / (elapsed_ms / 1e3),
    })
}
