//! Serialized reports. Every report and CSV file carries a [`Manifest`].

use iadof_core::algebra::{Certification, VarBlock};
use iadof_core::benchmark::BenchmarkRecord;
use iadof_core::feasibility::{FeasibilityReport, Verdict};
use iadof_core::solver::{AlignmentCheck, StopReason};
use iadof_core::{Pair, PairSet, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::config::Counts;
use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "iadof";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_path: Option<String>,
    pub inputs: Inputs,
    pub seed: u64,
    /// Wall-clock time, recorded only on request so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
}

/// Effective inline parameters after merging the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub users: Option<String>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<Counts>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub manifest: Manifest,
    pub config: SystemConfig,
    pub equations: usize,
    pub variables: usize,
    pub feasibility: FeasibilityReport,
}

/// One row per condition instance of a `check` run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRow {
    pub item: String,
    pub user: Option<usize>,
    pub rx: Option<usize>,
    pub tx: Option<usize>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub max_total: usize,
    pub argmax_tuple: Vec<usize>,
    pub enumeration_count: u64,
}

/// [`BoundRow`] with the tuple `;`-separated, for CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCsvRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub max_total: usize,
    pub argmax_tuple: String,
    pub enumeration_count: u64,
}

impl From<&BoundRow> for BoundCsvRow {
    fn from(r: &BoundRow) -> Self {
        Self {
            users: r.users,
            max_total: r.max_total,
            argmax_tuple: join_tuple(&r.argmax_tuple),
            enumeration_count: r.enumeration_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub manifest: Manifest,
    pub rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedBlock {
    pub pair: Pair,
    pub block: VarBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MatchingSummary {
    NotApplicable,
    Complete {
        assignment: Vec<MatchedBlock>,
        removed: Vec<VarBlock>,
        /// Determinant of the certificate Jacobian, when it is a signed permutation.
        determinant: Option<i64>,
    },
    HallViolator {
        pairs: PairSet,
        equation_nodes: usize,
        neighbour_blocks: usize,
        deficiency: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub manifest: Manifest,
    pub config: SystemConfig,
    pub matching: MatchingSummary,
    pub certification: Certification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub trial: usize,
    pub rank: usize,
    pub equations: usize,
    pub variables: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub manifest: Manifest,
    pub config: SystemConfig,
    pub verdict: Verdict,
    pub converged: bool,
    pub rank_ok: bool,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_leakage: f64,
    pub alignment: AlignmentCheck,
    /// Omitted from the CSV-mode summary, where the trace is the table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leakage_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub manifest: Manifest,
    #[serde(rename = "M")]
    pub tx: Vec<usize>,
    #[serde(rename = "N")]
    pub rx: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub record: BenchmarkRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub snr_db: f64,
    pub trial: usize,
    pub sum_rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub manifest: Manifest,
    #[serde(rename = "M")]
    pub tx: Vec<usize>,
    #[serde(rename = "N")]
    pub rx: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub mean_rates: Vec<f64>,
    pub estimated_dof_slope: Option<f64>,
    pub theoretical_bound: usize,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// CSV with a leading `# <manifest json>` comment line.
pub fn to_csv<T: Serialize>(manifest: &Manifest, rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut out = b"# ".to_vec();
    out.extend(serde_json::to_vec(manifest).map_err(|e| Failure::io(e.to_string()))?);
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Failure::io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::io(e.to_string()))
}

/// Parses a CSV written by [`to_csv`].
pub fn from_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<(Manifest, Vec<T>), Failure> {
    let text = std::str::from_utf8(bytes).map_err(|e| Failure::io(e.to_string()))?;
    let (first, _) = text
        .split_once('\n')
        .ok_or_else(|| Failure::io("empty CSV"))?;
    let manifest_json = first
        .strip_prefix("# ")
        .ok_or_else(|| Failure::io("missing manifest line"))?;
    let manifest = serde_json::from_str(manifest_json).map_err(|e| Failure::io(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes);
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Failure::io(e.to_string()))?;
    Ok((manifest, rows))
}

pub fn join_tuple(t: &[usize]) -> String {
    t.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(";")
}
