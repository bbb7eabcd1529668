use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{per_task, Episode, EvalConfig, Policy};
use crate::error::NtpError;
use crate::interpreter::Termination;
use crate::ntpmodel::sha256_hex;
use crate::taskgen::Family;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub episodes: usize,
    pub successes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub family: Family,
    pub label: String,
    pub grid_value: Option<usize>,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub terminations: BTreeMap<Termination, usize>,
    pub per_task: Vec<TaskResult>,
    pub adversary_prob: f64,
    pub seed: u64,
    pub config_fingerprint: String,
    pub checkpoint_hash: Option<String>,
}

/// Short stable hash of the evaluation protocol and, for models, the
/// architecture.
pub fn config_fingerprint(policy: Policy, cfg: &EvalConfig) -> String {
    let model = match policy {
        Policy::Model(m) => serde_json::to_string(&m.config).unwrap_or_default(),
        Policy::Expert => "expert".into(),
    };
    let proto = EvalConfig { workers: None, ..cfg.clone() };
    let text = format!("{model}|{}", serde_json::to_string(&proto).unwrap_or_default());
    sha256_hex(text.as_bytes())[..16].to_string()
}

impl EvalReport {
    pub fn aggregate(policy: Policy, family: Family, label: &str, cfg: &EvalConfig, episodes: &[Episode], checkpoint_hash: Option<String>) -> Self {
        let successes = episodes.iter().filter(|e| e.success).count();
        let mut terminations: BTreeMap<Termination, usize> = Termination::ALL.iter().map(|t| (*t, 0)).collect();
        for e in episodes {
            *terminations.entry(e.termination).or_default() += 1;
        }
        EvalReport {
            variant: policy.name(),
            family,
            label: label.to_string(),
            grid_value: None,
            episodes: episodes.len(),
            successes,
            success_rate: successes as f64 / episodes.len() as f64,
            terminations,
            per_task: per_task(episodes).into_iter().map(|(task, (s, n))| TaskResult { task, episodes: n, successes: s }).collect(),
            adversary_prob: cfg.adversary_prob,
            seed: cfg.seed,
            config_fingerprint: config_fingerprint(policy, cfg),
            checkpoint_hash,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self, NtpError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(NtpError::Config(format!("unknown report format {s:?}"))),
        }
    }

    /// Format implied by a file extension, defaulting to JSON.
    pub fn for_path(path: &Path) -> Self {
        if path.extension().is_some_and(|e| e == "csv") {
            ReportFormat::Csv
        } else {
            ReportFormat::Json
        }
    }
}

pub const CSV_HEADER: &str = "variant,family,label,grid_value,episodes,successes,success_rate,completed,depth_exceeded,budget_exceeded,iteration_cap_exceeded,invalid_api_call,adversary_prob,seed,config_fingerprint,checkpoint_hash";

pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        let t = |k: Termination| r.terminations.get(&k).copied().unwrap_or(0);
        s.push_str(&format!(
            "{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.family.name(),
            r.label,
            r.grid_value.map(|g| g.to_string()).unwrap_or_default(),
            r.episodes,
            r.successes,
            r.success_rate,
            t(Termination::Completed),
            t(Termination::DepthExceeded),
            t(Termination::BudgetExceeded),
            t(Termination::IterationCapExceeded),
            t(Termination::InvalidApiCall),
            r.adversary_prob,
            r.seed,
            r.config_fingerprint,
            r.checkpoint_hash.as_deref().unwrap_or("")
        ));
    }
    s
}

/// Writes reports as pretty JSON (an array) or CSV.
pub fn emit_report(reports: &[EvalReport], path: &Path, format: ReportFormat) -> Result<(), NtpError> {
    let mut f = std::fs::File::create(path)?;
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut f, reports)?;
            f.write_all(b"\n")?;
        }
        ReportFormat::Csv => f.write_all(reports_to_csv(reports).as_bytes())?,
    }
    Ok(())
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>, NtpError> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
