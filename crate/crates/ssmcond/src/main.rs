//! ssmcond command-line interface.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use ssmcond::bench::{self, SweepGrid, SweepSettings};
use ssmcond::dynamics::{self, LossWeights, TrainConfig};
use ssmcond::frontend::{self, MelSpectrogram, PhonemeSequence};
use ssmcond::model::{self, ModelConfig, TrainParams};
use ssmcond::numerics::{read_tensor, read_token_ids, write_tensor, Rng};
use ssmcond::streaming::{open_session, StreamPipelineParams};
use ssmcond::{Error, Result};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "ssmcond", about = "SSM-only TTS conditioning engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a log-mel spectrogram from a 24 kHz mono 16-bit WAV.
    Mel { wav: PathBuf, out: PathBuf },
    /// Run the conditioning pipeline: tokens + reference mel -> h_D.
    Condition {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        refmel: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream framed f32 chunks on stdin through the causal pipeline.
    Stream {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lookahead_sec: f64,
    },
    /// Performance harness.
    Bench(BenchArgs),
    /// Hyperparameter sensitivity sweep (fresh training + timed inference).
    Sweep {
        /// JSON grid {"d_ssm": [...], "k": [...], "tau": [...]}; omit for
        /// the default 4x3x3 grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        train_steps: usize,
        #[arg(long, default_value_t = 1024)]
        infer_frames: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gate statistics for a checkpoint over a directory of token files.
    GateStats {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Desk-scale training on the synthetic dataset.
    TrainToy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "toy_ckpt")]
        out: PathBuf,
    },
    /// Gradient-fidelity battery (modules + end-to-end).
    Gradcheck,
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    which: BenchCommand,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Per-stage runtime breakdown.
    Breakdown {
        #[arg(long, default_value_t = 512)]
        t_x: usize,
        #[arg(long, default_value_t = 512)]
        t_m: usize,
        #[arg(long, default_value_t = bench::DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall-clock scaling over sequence lengths.
    Scaling {
        #[arg(long = "T", value_delimiter = ',', default_values_t = vec![4096usize, 8192, 16384])]
        t: Vec<usize>,
        #[arg(long, default_value_t = bench::DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-session streaming throughput over shared params.
    Throughput {
        #[arg(long, default_value_t = 2)]
        sessions: usize,
        #[arg(long, default_value_t = 20_000)]
        frames: usize,
        #[arg(long, default_value_t = 47)]
        lookahead_frames: usize,
    },
    /// Peak activation elements, offline or streaming.
    Memory {
        #[arg(long = "T", value_delimiter = ',', default_values_t = vec![1000usize, 100000])]
        t: Vec<usize>,
        #[arg(long, default_value = "stream")]
        mode: String,
        #[arg(long, default_value_t = 47)]
        lookahead_frames: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct TrainToyFile {
    model: ModelConfig,
    train: TrainConfig,
    weights: LossWeights,
    dataset_size: usize,
}

impl Default for TrainToyFile {
    fn default() -> Self {
        TrainToyFile {
            model: ModelConfig::toy(),
            train: TrainConfig {
                lr: 5e-2,
                ..TrainConfig::default()
            },
            weights: LossWeights::default(),
            dataset_size: 4,
        }
    }
}

fn seed_override() -> Option<u64> {
    std::env::var("SSMCOND_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Mel { wav, out } => {
            let w = frontend::load_wav(&wav)?;
            let mel = frontend::compute_mel(&w)?;
            write_tensor(mel.values(), &out)?;
            eprintln!(
                "wrote {} ({} bins x {} frames)",
                out.display(),
                mel.mel_bins(),
                mel.frames()
            );
        }
        Command::Condition {
            ckpt,
            tokens,
            refmel,
            out,
        } => {
            let params = model::load_inference_checkpoint(&ckpt)?;
            let ids = read_token_ids(&tokens)?;
            let mel = MelSpectrogram::from_values(read_tensor(&refmel)?)?;
            let outputs = model::condition(&params, &PhonemeSequence::new(ids), &mel)?;
            write_tensor(&outputs.cond.h_d, &out)?;
            eprintln!(
                "wrote {} (T_m {} x {} = 1 + d_h)",
                out.display(),
                outputs.cond.frames(),
                outputs.cond.width()
            );
        }
        Command::Stream {
            ckpt,
            lookahead_sec,
        } => {
            let params = model::load_inference_checkpoint(&ckpt)?;
            let config = &params.config;
            let mut rng = Rng::new(seed_override().unwrap_or(config.seed) ^ 0x57EA);
            let pipe = Arc::new(StreamPipelineParams::init(
                config.d,
                config.d_h,
                config.d_ssm,
                config.k,
                config.text_layers,
                config.s_max,
                &mut rng,
            ));
            run_stream_io(pipe, lookahead_sec)?;
        }
        Command::Bench(args) => run_bench(args)?,
        Command::Sweep {
            grid,
            train_steps,
            infer_frames,
            out,
        } => {
            let grid: SweepGrid = match grid {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => SweepGrid::default(),
            };
            let settings = SweepSettings {
                train_steps,
                infer_frames,
                seed: seed_override().unwrap_or(7),
                ..SweepSettings::default()
            };
            let report = bench::sweep(&grid, &settings)?;
            emit(&report.to_csv(), out.as_ref())?;
        }
        Command::GateStats { ckpt, corpus } => {
            let params = model::load_inference_checkpoint(&ckpt)?;
            let mut traces = Vec::new();
            let mut entries: Vec<_> =
                std::fs::read_dir(&corpus)?.collect::<std::io::Result<Vec<_>>>()?;
            entries.sort_by_key(|e| e.path());
            let mut rng = Rng::new(seed_override().unwrap_or(params.config.seed));
            for entry in entries {
                if entry.path().extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let ids = read_token_ids(entry.path())?;
                if ids.is_empty() {
                    continue;
                }
                // gate statistics are over token streams; the reference mel
                // only feeds the style embedding, so a seeded one suffices
                let floor = frontend::MEL_EPS.ln();
                let mel = MelSpectrogram::from_values(rng.uniform_tensor(
                    params.config.mel_bins,
                    64,
                    floor,
                    floor + 6.0,
                ))?;
                let outputs = model::condition(&params, &PhonemeSequence::new(ids), &mel)?;
                traces.push(outputs.gate_trace);
            }
            let stats = bench::gate_stats(&traces)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::TrainToy { config, out } => {
            let mut file: TrainToyFile = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => TrainToyFile::default(),
            };
            if let Some(seed) = seed_override() {
                file.train.seed = seed;
            }
            file.model.seed = file.train.seed;
            let params = TrainParams::init(&file.model)?;
            let dataset = dynamics::dataset::generate(
                file.dataset_size,
                file.model.vocab,
                file.train.seed,
            );
            let outcome = dynamics::train(params, &dataset, &file.train, &file.weights)?;
            std::fs::create_dir_all(&out)?;
            model::save_checkpoint(&out, &outcome.params)?;
            model::save_checkpoint(out.join("ema"), &outcome.ema_params)?;
            std::fs::write(out.join("loss_curve.csv"), outcome.curve_csv())?;
            eprintln!(
                "trained {} steps: loss {:.6} -> {:.6}; checkpoint at {}",
                file.train.steps,
                outcome.initial_loss(),
                outcome.final_loss(),
                out.display()
            );
        }
        Command::Gradcheck => {
            let mut all_ok = true;
            println!("module      max_rel_err   tolerance  status");
            for row in ssmcond::diagnostics::gradient_battery() {
                let ok = row.passed();
                all_ok &= ok;
                println!(
                    "{:<11} {:>12.3e} {:>10.0e}  {}",
                    row.name,
                    row.result.max_rel_err,
                    row.tolerance,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if !all_ok {
                return Err(Error::InvalidArg {
                    op: "gradcheck",
                    detail: "battery failed".into(),
                });
            }
        }
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut config = bench::bench_config();
    if let Some(seed) = seed_override() {
        config.seed = seed;
    }
    let params = model::MvcParams::init(&config)?;
    match args.which {
        BenchCommand::Breakdown {
            t_x,
            t_m,
            repeats,
            out,
        } => {
            let report =
                bench::bench_breakdown(&params, t_x, t_m, repeats, bench::DEFAULT_WARMUPS)?;
            emit(&report.to_csv(), out.as_ref())?;
            eprintln!(
                "total {:.3} ms over {} repeats; percentages sum to {:.3}",
                report.total_ms,
                report.repeats,
                report.pct_sum()
            );
            if report.stability_warning {
                eprintln!("warning: medians unstable across repeats (noisy host?)");
            }
        }
        BenchCommand::Scaling { t, repeats, out } => {
            let report = bench::bench_scaling(&params, &t, repeats, bench::DEFAULT_WARMUPS)?;
            emit(&report.to_csv(), out.as_ref())?;
            eprintln!("linear-scaling PASS: {}", report.pass);
        }
        BenchCommand::Throughput {
            sessions,
            frames,
            lookahead_frames,
        } => {
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
            let report = bench::bench_throughput(pipe, sessions, frames, lookahead_frames)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        BenchCommand::Memory {
            t,
            mode,
            lookahead_frames,
            out,
        } => {
            let report = bench::audit_memory(&params, &t, &mode, lookahead_frames)?;
            emit(&report.to_csv(), out.as_ref())?;
        }
    }
    Ok(())
}

/// stdin/stdout framing: u32 LE frame count, then count * width f32 LE.
fn run_stream_io(pipe: Arc<StreamPipelineParams>, lookahead_sec: f64) -> Result<()> {
    let d_in = pipe.d_in;
    let mut session = open_session(pipe, lookahead_sec)?;
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let stdout = std::io::stdout();
    let mut output = stdout.lock();

    let mut header = [0u8; 4];
    loop {
        match input.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let count = u32::from_le_bytes(header) as usize;
        let mut payload = vec![0u8; count * d_in * 4];
        input.read_exact(&mut payload)?;
        let data: Vec<f64> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        let chunk = ssmcond::numerics::SeqTensor::from_vec(count, d_in, data);
        let released = session.feed(&chunk)?;
        write_frames(&mut output, &released)?;
    }
    let tail = session.close()?;
    write_frames(&mut output, &tail)?;
    output.flush()?;
    Ok(())
}

fn write_frames(out: &mut impl Write, frames: &ssmcond::numerics::SeqTensor) -> Result<()> {
    out.write_all(&(frames.rows() as u32).to_le_bytes())?;
    let mut payload = Vec::with_capacity(frames.len() * 4);
    for &v in frames.data() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&payload)?;
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
