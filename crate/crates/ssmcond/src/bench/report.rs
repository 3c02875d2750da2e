//! Benchmark report types and serialization.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct BreakdownEntry {
    pub name: String,
    pub median_ms: f64,
    pub pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub t_x: usize,
    pub t_m: usize,
    pub repeats: usize,
    pub warmups: usize,
    pub total_ms: f64,
    pub entries: Vec<BreakdownEntry>,
    /// Deterministic count of activation elements allocated per full pass.
    pub elements_per_pass: u64,
    /// Set when halving the repeat count moves any stage median by 20% or
    /// more (unstable hardware or background load).
    pub stability_warning: bool,
}

impl BenchReport {
    pub fn pct_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.pct).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,median_ms,pct\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:.6},{:.3}\n", e.name, e.median_ms, e.pct));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub t: usize,
    pub median_ms: f64,
    /// Fastest repeat; the intrinsic-cost estimate used for the ratios.
    pub min_ms: f64,
    pub elements: u64,
    /// Ratio of min_ms vs the previous row.
    pub time_ratio: Option<f64>,
    pub element_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// True when every adjacent doubling lands in [1.7, 2.3] (scaled by the
    /// actual T ratio).
    pub pass: bool,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,median_ms,min_ms,elements,time_ratio,element_ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{},{}\n",
                r.t,
                r.median_ms,
                r.min_ms,
                r.elements,
                r.time_ratio.map_or(String::new(), |v| format!("{v:.4}")),
                r.element_ratio
                    .map_or(String::new(), |v| format!("{v:.4}")),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryRow {
    pub t: usize,
    pub peak_elements: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub mode: String,
    pub rows: Vec<MemoryRow>,
}

impl MemoryReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,peak_elements\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.t, r.peak_elements));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThroughputReport {
    pub sessions: usize,
    pub frames_per_session: usize,
    pub lookahead_frames: usize,
    pub elapsed_ms: f64,
    pub frames_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateStats {
    pub mean_fwd: f64,
    pub mean_bwd: f64,
    pub var: f64,
    pub positions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub d_ssm: usize,
    pub k: usize,
    pub tau: f64,
    pub final_loss: f64,
    pub min_infer_ms: f64,
    pub frames_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_ssm,k,tau,final_loss,min_infer_ms,frames_per_second\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.9},{:.6},{:.3}\n",
                r.d_ssm, r.k, r.tau, r.final_loss, r.min_infer_ms, r.frames_per_second
            ));
        }
        out
    }
}
