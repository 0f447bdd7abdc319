//! JSON and CSV report rendering.
//!
//! Every JSON report has the shape
//! `{"tool", "version", "config", "result"}` plus an optional `timing` object
//! for commands that train. `config` is the full argument set of the run and
//! can be fed back through `depthscale rerun`; everything except `timing` is
//! a deterministic function of it. The schema lives in
//! `schemas/report.schema.json`.

use depthscale::analyzer::{ProfileComparison, VarianceProfile};
use depthscale::train::TrainReport;
use depthscale::KSolution;
use serde::{Deserialize, Serialize};

use crate::args::Command;

pub const TOOL: &str = "depthscale";

/// JSON Schema for every report this tool writes.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

/// CSV columns of `train` output.
pub const TRAIN_CSV_COLUMNS: [&str; 3] = ["epoch", "loss", "accuracy"];

/// CSV columns of `compare` output.
pub const COMPARE_CSV_COLUMNS: [&str; 6] = [
    "rank",
    "scheme",
    "status",
    "final_loss",
    "final_accuracy",
    "loss_reduction",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub config: Command,
    pub result: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl<T> Envelope<T> {
    pub fn new(config: Command, result: T, timing: Option<Timing>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            result,
            timing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SolveKResult {
    pub K: f64,
    pub S: f64,
    pub alpha: f64,
    pub V: f64,
    pub L: usize,
    pub n: usize,
    pub shift: u32,
    /// Total variance gain of the plan built with the solved `K`.
    pub gain_product_check: f64,
}

impl SolveKResult {
    pub fn new(solution: &KSolution, gain_product_check: f64) -> Self {
        Self {
            K: solution.k,
            S: solution.log_inverse_sum,
            alpha: solution.alpha,
            V: solution.variance,
            L: solution.layers,
            n: solution.width,
            shift: solution.shift,
            gain_product_check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub profile: VarianceProfile,
    pub comparison: Option<ProfileComparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// Position in the scheme list.
    pub slot: usize,
    pub entry: String,
    pub scheme: String,
    pub status: RowStatus,
    pub error: Option<String>,
    pub exit_code: Option<i32>,
    pub report: Option<TrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub slot: usize,
    pub scheme: String,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub loss_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResult {
    pub rows: Vec<CompareRow>,
    /// Successful rows by final loss, ascending; ties keep list order.
    pub ranking: Vec<RankEntry>,
}

impl CompareResult {
    pub fn new(rows: Vec<CompareRow>) -> Self {
        let mut ranking: Vec<RankEntry> = rows
            .iter()
            .filter_map(|row| {
                let report = row.report.as_ref()?;
                let last = report.final_stats();
                Some(RankEntry {
                    rank: 0,
                    slot: row.slot,
                    scheme: row.scheme.clone(),
                    final_loss: last.loss,
                    final_accuracy: last.accuracy,
                    loss_reduction: report.loss_reduction(),
                })
            })
            .collect();
        ranking.sort_by(|a, b| a.final_loss.total_cmp(&b.final_loss).then(a.slot.cmp(&b.slot)));
        for (i, r) in ranking.iter_mut().enumerate() {
            r.rank = i + 1;
        }
        Self { rows, ranking }
    }
}

fn config_comment(config: &Command) -> String {
    format!(
        "# {TOOL} {} config: {}\n",
        env!("CARGO_PKG_VERSION"),
        serde_json::to_string(config).expect("config serializes")
    )
}

/// Profile CSV preceded by a `#` line carrying the run configuration.
pub fn profile_csv(config: &Command, profile: &VarianceProfile) -> String {
    config_comment(config) + &profile.to_csv()
}

/// One row per epoch, epoch 0 being the evaluation before training.
pub fn train_csv(config: &Command, report: &TrainReport) -> String {
    let mut out = config_comment(config);
    out.push_str(&TRAIN_CSV_COLUMNS.join(","));
    out.push('\n');
    for e in std::iter::once(&report.initial).chain(&report.epochs) {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
    }
    out
}

pub fn compare_csv(config: &Command, result: &CompareResult) -> String {
    let mut out = config_comment(config);
    out.push_str(&COMPARE_CSV_COLUMNS.join(","));
    out.push('\n');
    for r in &result.ranking {
        out.push_str(&format!(
            "{},{},ok,{},{},{}\n",
            r.rank, r.scheme, r.final_loss, r.final_accuracy, r.loss_reduction
        ));
    }
    for row in result.rows.iter().filter(|r| r.status == RowStatus::Failed) {
        out.push_str(&format!(",{},failed,,,\n", row.scheme));
    }
    out
}

/// Strips `timing` so two runs of one configuration compare equal.
pub fn deterministic_part(report: &serde_json::Value) -> serde_json::Value {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}
