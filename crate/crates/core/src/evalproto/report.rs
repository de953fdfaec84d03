use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{generalization_error, EpisodeSpec};
use crate::envcore::DomainId;
use crate::error::{Error, Result};

/// Column label of training-environment episodes in the raw table.
pub const TRAIN_COLUMN: &str = "Train";

pub const CSV_HEADER: &str = "method,domain,toggle_column,visual_seed,dynamics_seed,return";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub method: String,
    pub domain: DomainId,
    pub column: String,
    pub visual_seed: u64,
    pub dynamics_seed: u64,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub label: String,
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    /// Against the training-environment mean; absent for the train row or
    /// when undefined.
    pub e_g: Option<f64>,
}

/// Raw episode returns plus per-column summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub domain: DomainId,
    pub columns: Vec<ColumnSummary>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRecord>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn new(method: &str, domain: DomainId) -> Self {
        EvalReport { method: method.into(), domain, columns: Vec::new(), notes: Vec::new(), episodes: Vec::new() }
    }

    pub fn push_column(&mut self, label: &str, eps: &[EpisodeSpec], returns: &[f64]) {
        for (e, r) in eps.iter().zip(returns) {
            self.episodes.push(EpisodeRecord {
                method: self.method.clone(),
                domain: self.domain,
                column: label.into(),
                visual_seed: e.visual_seed,
                dynamics_seed: e.dynamics_seed,
                ret: *r,
            });
        }
        self.recompute();
    }

    /// Rebuilds column summaries and generalization errors from raw returns.
    pub fn recompute(&mut self) {
        let mut labels: Vec<String> = Vec::new();
        for e in &self.episodes {
            if !labels.contains(&e.column) {
                labels.push(e.column.clone());
            }
        }
        let returns = |label: &str| -> Vec<f64> {
            self.episodes.iter().filter(|e| e.column == label).map(|e| e.ret).collect()
        };
        let train = self.episodes.iter().any(|e| e.column == TRAIN_COLUMN).then(|| mean_std(&returns(TRAIN_COLUMN)).0);
        self.columns = labels
            .iter()
            .map(|l| {
                let r = returns(l);
                let (mean, std) = mean_std(&r);
                let e_g = match train {
                    Some(t) if l != TRAIN_COLUMN => generalization_error(t, &r),
                    _ => None,
                };
                ColumnSummary { label: l.clone(), episodes: r.len(), mean, std, e_g }
            })
            .collect();
    }

    pub fn column(&self, label: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.label == label)
    }

    pub fn returns(&self, label: &str) -> Vec<f64> {
        self.episodes.iter().filter(|e| e.column == label).map(|e| e.ret).collect()
    }

    /// `(Train, Test, E_G)` with the `All` column as the test condition.
    pub fn table1_row(&self) -> Option<(f64, f64, Option<f64>)> {
        let t = self.column(TRAIN_COLUMN)?;
        let a = self.column("All")?;
        Some((t.mean, a.mean, a.e_g))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for e in &self.episodes {
            let _ = writeln!(s, "{},{},{},{},{},{}", e.method, e.domain, e.column, e.visual_seed, e.dynamics_seed, e.ret);
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Vec<EpisodeRecord>> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::config(format!("report table must start with '{CSV_HEADER}'")));
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 6 {
                    return Err(Error::config(format!("malformed report row '{l}'")));
                }
                let bad = |what: &str| Error::config(format!("bad {what} in report row '{l}'"));
                Ok(EpisodeRecord {
                    method: f[0].into(),
                    domain: f[1].parse()?,
                    column: f[2].into(),
                    visual_seed: f[3].parse().map_err(|_| bad("visual_seed"))?,
                    dynamics_seed: f[4].parse().map_err(|_| bad("dynamics_seed"))?,
                    ret: f[5].parse().map_err(|_| bad("return"))?,
                })
            })
            .collect()
    }

    pub fn to_summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `returns.csv` and `summary.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("returns.csv"), self.to_csv())?;
        std::fs::write(dir.join("summary.json"), self.to_summary_json())?;
        Ok(())
    }

    /// Reads a saved report and checks that its summaries match the raw table.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut report: EvalReport = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
        report.episodes = Self::parse_csv(&std::fs::read_to_string(dir.join("returns.csv"))?)?;
        let stored = report.columns.clone();
        report.recompute();
        for (a, b) in stored.iter().zip(&report.columns) {
            let same = a.label == b.label
                && a.episodes == b.episodes
                && match (a.e_g, b.e_g) {
                    (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
                    (None, None) => true,
                    _ => false,
                };
            if !same {
                return Err(Error::config(format!("summary for column '{}' disagrees with raw returns", a.label)));
            }
        }
        if stored.len() != report.columns.len() {
            return Err(Error::config("summary and raw returns list different columns"));
        }
        report.columns = stored;
        Ok(report)
    }
}
