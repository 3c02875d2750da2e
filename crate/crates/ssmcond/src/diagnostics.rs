//! Gradient-fidelity battery: every module's tape path against central
//! finite differences, plus the full pipeline at micro shapes.

use crate::dynamics::LossWeights;
use crate::model::{training_forward_ctx, ModelConfig, TrainParams};
use crate::numerics::{
    grad_check, Ctx, FnProblem, GradCheckResult, GradTape, Padding, Rng, SeqTensor, TapeCtx,
};

pub struct BatteryRow {
    pub name: &'static str,
    pub result: GradCheckResult,
    pub tolerance: f64,
}

impl BatteryRow {
    pub fn passed(&self) -> bool {
        self.result.passed(self.tolerance)
    }
}

const H_STEP: f64 = 1e-5;

/// Runs every module-level check (tol 1e-4) and the end-to-end pipeline
/// check at micro shapes (tol 1e-3).
pub fn gradient_battery() -> Vec<BatteryRow> {
    vec![
        BatteryRow {
            name: "numerics",
            result: check_numerics(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "frontend",
            result: check_style(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "ssm",
            result: check_block(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "encoders",
            result: check_fusion_adaln(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "alignpitch",
            result: check_aligner(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "dynamics",
            result: check_dynamics(),
            tolerance: 1e-4,
        },
        BatteryRow {
            name: "pipeline",
            result: check_end_to_end(),
            tolerance: 1e-3,
        },
    ]
}

/// Gradcheck over a closure that rebuilds a tape from a flat vector.
fn run_problem(
    n: usize,
    build: &dyn Fn(&mut GradTape, crate::numerics::Var) -> crate::numerics::Var,
    params: &[f64],
) -> GradCheckResult {
    let problem = FnProblem {
        loss_and_grad: |p: &[f64]| {
            let mut tape = GradTape::new();
            let x = tape.leaf(SeqTensor::from_vec(1, n, p.to_vec()));
            let loss = build(&mut tape, x);
            let v = tape.scalar(loss);
            tape.backward(loss).unwrap();
            (v, tape.grad(x).data().to_vec())
        },
        loss: |p: &[f64]| {
            let mut tape = GradTape::new();
            let x = tape.leaf(SeqTensor::from_vec(1, n, p.to_vec()));
            let loss = build(&mut tape, x);
            tape.scalar(loss)
        },
    };
    grad_check(&problem, params, H_STEP)
}

/// linear -> conv -> layer_norm -> silu -> L1
fn check_numerics() -> GradCheckResult {
    let (t, d) = (5usize, 3usize);
    let k = 3usize;
    let mut rng = Rng::new(1001);
    let x = rng.uniform_tensor(t, d, -1.0, 1.0);
    let target = rng.uniform_tensor(t, d, -1.0, 1.0);
    let n = d * d + d * k;
    let flat: Vec<f64> = rng
        .uniform_tensor(1, n, -0.7, 0.7)
        .data()
        .to_vec();
    let build = |tape: &mut GradTape, p: crate::numerics::Var| {
        let w_flat = tape.slice_cols(p, 0, d * d);
        let w = tape.reshape(w_flat, d, d);
        let k_flat = tape.slice_cols(p, d * d, d * d + d * k);
        let kernel = tape.reshape(k_flat, d, k);
        let xv = tape.leaf(x.clone());
        let tv = tape.leaf(target.clone());
        let lin = tape.linear(xv, w, None);
        let conv = tape.conv1d(lin, kernel, Padding::Same);
        let ln = tape.layer_norm(conv, 1e-5);
        let act = tape.silu(ln);
        tape.l1_loss(act, tv)
    };
    run_problem(n, &build, &flat)
}

/// conv over frames -> linear -> tanh -> mean pool -> squared norm
fn check_style() -> GradCheckResult {
    let (t_m, f, d_s, k) = (6usize, 4usize, 3usize, 3usize);
    let mut rng = Rng::new(1002);
    let frames = rng.uniform_tensor(t_m, f, -1.0, 1.0);
    let n = f * k + f * d_s + d_s;
    let flat: Vec<f64> = rng.uniform_tensor(1, n, -0.7, 0.7).data().to_vec();
    let build = |tape: &mut GradTape, p: crate::numerics::Var| {
        let kern_flat = tape.slice_cols(p, 0, f * k);
        let kern = tape.reshape(kern_flat, f, k);
        let w_flat = tape.slice_cols(p, f * k, f * k + f * d_s);
        let w = tape.reshape(w_flat, f, d_s);
        let b = tape.slice_cols(p, f * k + f * d_s, n);
        let xv = tape.leaf(frames.clone());
        let conv = tape.conv1d(xv, kern, Padding::Same);
        let lin = tape.linear(conv, w, Some(b));
        let act = tape.tanh(lin);
        let e = tape.mean_rows(act);
        let sq = tape.mul(e, e);
        tape.sum_all(sq)
    };
    run_problem(n, &build, &flat)
}

fn check_block() -> GradCheckResult {
    use crate::ssm::{mamba_block_ctx, MambaLayerParams};
    let (t_len, d_h, d_ssm, k) = (7usize, 4usize, 8usize, 5usize);
    let mut rng = Rng::new(21);
    let mut p = MambaLayerParams::init(d_h, d_ssm, k, 1e3, &mut rng);
    p.a_log = rng.uniform_tensor(d_h, d_ssm, 0.5f64.ln(), 1.5f64.ln());
    let x = rng.uniform_tensor(t_len, d_h, -1.0, 1.0);
    let target = rng.uniform_tensor(t_len, d_h, -1.0, 1.0);
    let shapes: Vec<(usize, usize)> = p
        .named_tensors()
        .iter()
        .map(|(_, t)| (t.rows(), t.cols()))
        .collect();
    let flat: Vec<f64> = p
        .named_tensors()
        .iter()
        .flat_map(|(_, t)| t.data().to_vec())
        .collect();
    let run = move |vals: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut q = p.clone();
        let mut off = 0;
        for (i, (_, t)) in q.named_tensors_mut().into_iter().enumerate() {
            let n = shapes[i].0 * shapes[i].1;
            t.data_mut().copy_from_slice(&vals[off..off + n]);
            off += n;
        }
        let mut tape = GradTape::new();
        let mut ctx = TapeCtx::new(&mut tape);
        let h = q.bind(&mut ctx);
        let xv = ctx.lift(&x);
        let tv = ctx.lift(&target);
        let y = mamba_block_ctx(&mut ctx, &xv, &h, Padding::Same);
        let loss = ctx.l1_loss(&y, &tv);
        let v = tape.scalar(loss);
        if !want_grad {
            return (v, Vec::new());
        }
        tape.backward(loss).unwrap();
        let mut g = Vec::new();
        for (_, hv) in h.handles() {
            g.extend_from_slice(tape.grad(*hv).data());
        }
        (v, g)
    };
    let problem = FnProblem {
        loss_and_grad: |v: &[f64]| run(v, true),
        loss: |v: &[f64]| run(v, false).0,
    };
    grad_check(&problem, &flat, H_STEP)
}

/// gated fusion of two streams followed by AdaLN, against a target
fn check_fusion_adaln() -> GradCheckResult {
    let (t, d_h, d_s) = (5usize, 3usize, 2usize);
    let mut rng = Rng::new(1004);
    let h_f = rng.uniform_tensor(t, d_h, -1.0, 1.0);
    let h_b = rng.uniform_tensor(t, d_h, -1.0, 1.0);
    let e = rng.uniform_tensor(1, d_s, -1.0, 1.0);
    let target = rng.uniform_tensor(t, d_h, -1.0, 1.0);
    let n = (2 * d_h) * (2 * d_h) + (2 * d_h) * d_h + 2 * (d_s * d_h + d_h);
    let flat: Vec<f64> = rng.uniform_tensor(1, n, -0.5, 0.5).data().to_vec();
    let build = |tape: &mut GradTape, p: crate::numerics::Var| {
        let mut off = 0;
        let mut take = |tape: &mut GradTape, rows: usize, cols: usize| {
            let s = tape.slice_cols(p, off, off + rows * cols);
            off += rows * cols;
            tape.reshape(s, rows, cols)
        };
        let w_g = take(tape, 2 * d_h, 2 * d_h);
        let w_o = take(tape, 2 * d_h, d_h);
        let gamma_w = take(tape, d_s, d_h);
        let gamma_b = take(tape, 1, d_h);
        let beta_w = take(tape, d_s, d_h);
        let beta_b = take(tape, 1, d_h);
        let hf = tape.leaf(h_f.clone());
        let hb = tape.leaf(h_b.clone());
        let ev = tape.leaf(e.clone());
        let tv = tape.leaf(target.clone());
        let cat = tape.concat_cols(hf, hb);
        let logits = tape.linear(cat, w_g, None);
        let gates = tape.sigmoid(logits);
        let gated = tape.mul(gates, cat);
        let fused = tape.linear(gated, w_o, None);
        let gamma = tape.linear(ev, gamma_w, Some(gamma_b));
        let beta = tape.linear(ev, beta_w, Some(beta_b));
        let ln = tape.layer_norm(fused, 1e-5);
        let scaled = tape.row_mul(ln, gamma);
        let out = tape.row_add(scaled, beta);
        tape.l1_loss(out, tv)
    };
    run_problem(n, &build, &flat)
}

/// cross-attention aligner + monotonic loss + aligned-feature L1
fn check_aligner() -> GradCheckResult {
    use crate::alignpitch::{align_ctx, monotonic_loss_ctx, AlignerParams};
    let (t_m, t_x, d_h) = (5usize, 3usize, 4usize);
    let mut rng = Rng::new(1005);
    let p = AlignerParams::with_dims(d_h, 8, 2, 1, &mut rng).unwrap();
    let mel = rng.uniform_tensor(t_m, d_h, -1.0, 1.0);
    let text = rng.uniform_tensor(t_x, d_h, -1.0, 1.0);
    let target = rng.uniform_tensor(t_m, d_h, -1.0, 1.0);
    let shapes = [(d_h, 8), (d_h, 8), (d_h, 8), (8, d_h)];
    let flat: Vec<f64> = {
        let l = &p.layers[0];
        [&l.w_q, &l.w_k, &l.w_v, &l.w_out]
            .iter()
            .flat_map(|t| t.data().to_vec())
            .collect()
    };
    let run = move |vals: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut q = p.clone();
        let mut off = 0;
        {
            let l = &mut q.layers[0];
            for (i, t) in [&mut l.w_q, &mut l.w_k, &mut l.w_v, &mut l.w_out]
                .into_iter()
                .enumerate()
            {
                let n = shapes[i].0 * shapes[i].1;
                t.data_mut().copy_from_slice(&vals[off..off + n]);
                off += n;
            }
        }
        let mut tape = GradTape::new();
        let mut ctx = TapeCtx::new(&mut tape);
        let h = q.bind(&mut ctx);
        let mv = ctx.lift(&mel);
        let tv = ctx.lift(&text);
        let tg = ctx.lift(&target);
        let (alpha, h_a) = align_ctx(&mut ctx, &mv, &tv, &h);
        let mono = monotonic_loss_ctx(&mut ctx, &alpha);
        let l1 = ctx.l1_loss(&h_a, &tg);
        let scaled = ctx.scale(&mono, 0.1);
        let loss = ctx.add(&l1, &scaled);
        let v = tape.scalar(loss);
        if !want_grad {
            return (v, Vec::new());
        }
        tape.backward(loss).unwrap();
        let mut g = Vec::new();
        for l in &h.layers {
            for hv in [&l.w_q, &l.w_k, &l.w_v, &l.w_out] {
                g.extend_from_slice(tape.grad(*hv).data());
            }
        }
        (v, g)
    };
    let problem = FnProblem {
        loss_and_grad: |v: &[f64]| run(v, true),
        loss: |v: &[f64]| run(v, false).0,
    };
    grad_check(&problem, &flat, H_STEP)
}

/// fusion heads -> packed conditioning -> toy decoder -> mel L1
fn check_dynamics() -> GradCheckResult {
    let (t, d_h, f) = (4usize, 3usize, 5usize);
    let mut rng = Rng::new(1006);
    let h_tm = rng.uniform_tensor(t, d_h, -1.0, 1.0);
    let h_p = rng.uniform_tensor(t, d_h, -1.0, 1.0);
    let mel = rng.uniform_tensor(f, t, -1.0, 1.0);
    let n = (2 * d_h) * (2 * d_h) + (2 * d_h) * d_h + d_h + 1 + d_h * d_h + (1 + d_h) * f + f;
    let flat: Vec<f64> = rng.uniform_tensor(1, n, -0.5, 0.5).data().to_vec();
    let build = |tape: &mut GradTape, p: crate::numerics::Var| {
        let mut off = 0;
        let mut take = |tape: &mut GradTape, rows: usize, cols: usize| {
            let s = tape.slice_cols(p, off, off + rows * cols);
            off += rows * cols;
            tape.reshape(s, rows, cols)
        };
        let w_g = take(tape, 2 * d_h, 2 * d_h);
        let w_o = take(tape, 2 * d_h, d_h);
        let w_f0 = take(tape, d_h, 1);
        let b_f0 = take(tape, 1, 1);
        let w_n = take(tape, d_h, d_h);
        let dec_w = take(tape, 1 + d_h, f);
        let dec_b = take(tape, 1, f);
        let a = tape.leaf(h_tm.clone());
        let b = tape.leaf(h_p.clone());
        let mv = tape.leaf(mel.clone());
        let cat = tape.concat_cols(a, b);
        let logits = tape.linear(cat, w_g, None);
        let gates = tape.sigmoid(logits);
        let gated = tape.mul(gates, cat);
        let g = tape.linear(gated, w_o, None);
        let f0 = tape.linear(g, w_f0, Some(b_f0));
        let nres = tape.linear(g, w_n, None);
        let h_d = tape.concat_cols(f0, nres);
        let framewise = tape.linear(h_d, dec_w, Some(dec_b));
        let m_hat = tape.transpose(framewise);
        tape.l1_loss(m_hat, mv)
    };
    run_problem(n, &build, &flat)
}

/// Full training forward at micro shapes over every parameter.
fn check_end_to_end() -> GradCheckResult {
    let mut config = ModelConfig::micro();
    config.seed = 5;
    let mut base = TrainParams::init(&config).expect("micro params");
    // check at a generic parameter point: the fan-in init point leaves the
    // temporal path in a small-signal regime whose gradients sit below the
    // finite-difference noise floor; seeds frozen after calibration
    let mut rng = Rng::new(777);
    {
        let n = base.to_flat().len();
        let wide: Vec<f64> = (0..n).map(|_| rng.uniform(-0.8, 0.8)).collect();
        base.load_flat(&wide);
        base.mvc.visit_mut(&mut |name, t| {
            if name.ends_with("a_log") {
                for v in t.data_mut() {
                    *v = rng.uniform(0.5f64.ln(), 1.5f64.ln());
                }
            }
        });
    }
    let mut rng = Rng::new(1);
    let t_m = 5usize;
    let ids = vec![1usize, 0, 3];
    let mel = rng.uniform_tensor(config.mel_bins, t_m, -1.5, 0.5);
    let weights = LossWeights::default();

    let flat = base.to_flat();
    let run = move |vals: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
        let mut params = base.clone();
        params.load_flat(vals);
        let mut tape = GradTape::new();
        let mut ctx = TapeCtx::new(&mut tape);
        let handles = params.bind(&mut ctx);
        let mel_h = ctx.lift(&mel);
        let fwd = training_forward_ctx(&mut ctx, &handles, &ids, &mel_h, &weights);
        let v = tape.scalar(fwd.loss);
        if !want_grad {
            return (v, Vec::new());
        }
        tape.backward(fwd.loss).unwrap();
        let mut g = Vec::new();
        handles.visit_handles(&mut |_, h| g.extend_from_slice(tape.grad(*h).data()));
        (v, g)
    };
    let problem = FnProblem {
        loss_and_grad: |v: &[f64]| run(v, true),
        loss: |v: &[f64]| run(v, false).0,
    };
    // wider step for the long composition: the 1e-5 step leaves central
    // differences noise-limited against the smallest pipeline gradients
    grad_check(&problem, &flat, 1e-4)
}
