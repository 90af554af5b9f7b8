//! Interaction log records and their JSONL persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::DecisionDistribution;
use crate::error::{Error, Result};
use crate::explain::{DisplayItem, ExplanationConfig};
use crate::forecast::ForecastDistribution;
use crate::market::PortfolioState;
use crate::nudge::ScoredConfig;
use crate::user_model::ContextFeatures;

/// One day of one session: the `(c, x, d_u)` triple plus everything needed
/// to audit or replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRecord {
    pub session_id: String,
    pub day: usize,
    pub open: f64,
    pub trailing_prices: Vec<f64>,
    pub forecast: ForecastDistribution,
    pub context: ContextFeatures,
    pub config: ExplanationConfig,
    pub payload: Vec<DisplayItem>,
    /// Distance of the chosen configuration when a nudge engine selected it.
    pub nudge_distance: Option<f64>,
    /// Every candidate the engine scored.
    pub audit: Option<Vec<ScoredConfig>>,
    pub policy: DecisionDistribution,
    pub policy_unseen: bool,
    pub suggested: f64,
    pub suggested_index: usize,
    pub decision: f64,
    pub decision_index: usize,
    /// Portfolio right after the order filled at `open`.
    pub state_after: PortfolioState,
    /// Total assets at the next day's open.
    pub assets_after: f64,
    pub timestamp_ms: u64,
}

pub fn to_json_line(record: &InteractionRecord) -> Result<String> {
    Ok(serde_json::to_string(record)?)
}

pub fn write_jsonl(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", to_json_line(r)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one record as a single write so concurrent readers never see a
/// partial line.
pub fn append_jsonl(path: &Path, record: &InteractionRecord) -> Result<()> {
    let mut line = to_json_line(record)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<InteractionRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InteractionRecord =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    check_session(&out)?;
    Ok(out)
}

/// Reads every `*.jsonl` file in `dir`, sorted by file name.
pub fn read_jsonl_dir(dir: &Path) -> Result<Vec<Vec<InteractionRecord>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_jsonl(p)).collect()
}

/// Days strictly increase within a session.
pub fn check_session(records: &[InteractionRecord]) -> Result<()> {
    for w in records.windows(2) {
        if w[1].session_id == w[0].session_id && w[1].day <= w[0].day {
            return Err(Error::Data(format!("session {}: day {} follows day {}", w[0].session_id, w[1].day, w[0].day)));
        }
    }
    Ok(())
}
