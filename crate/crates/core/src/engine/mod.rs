//! Matches, tournaments and their persisted records.

mod prompt;
mod record;
mod runner;
mod summary;
mod tournament;

use std::fs;
use std::io::BufReader;
use std::path::Path;

use thiserror::Error;

use crate::game::GameError;

pub use prompt::{PromptTemplate, DEFAULT_TEMPLATE_VERSION};
pub use record::{
    CellRef, Diagnostic, MatchConfig, MatchRecord, MatchStatus, RoundReasoning,
};
pub use runner::{run_match, seat_rng};
pub use summary::{summarize, GameTable, Summary, SummaryRow, EXACT_NASH};
pub use tournament::{run_tournament, stable_hash, Cell, GameRef, Pairing, TournamentPlan};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("record format error: {0}")]
    Format(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub const RECORD_FILE: &str = "record.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const TABLES_DIR: &str = "tables";

/// Writes `<dir>/<cell-id>/record.jsonl` for every record (`match-<n>` when a
/// record has no cell) and the summary files at the top of `dir`.
pub fn write_run(dir: &Path, records: &[MatchRecord]) -> Result<Summary, EngineError> {
    fs::create_dir_all(dir)?;
    for (n, r) in records.iter().enumerate() {
        let name = r.cell.as_ref().map(|c| c.id.clone()).unwrap_or_else(|| format!("match-{n}"));
        let cell_dir = dir.join(name);
        fs::create_dir_all(&cell_dir)?;
        fs::write(cell_dir.join(RECORD_FILE), r.to_jsonl())?;
    }
    write_summary(dir, records)
}

/// Writes `summary.csv`, `summary.txt` and `tables/<game>.csv`.
pub fn write_summary(dir: &Path, records: &[MatchRecord]) -> Result<Summary, EngineError> {
    let summary = summarize(records);
    fs::write(dir.join(SUMMARY_FILE), summary.to_csv()?)?;
    fs::write(dir.join(SUMMARY_TEXT_FILE), summary.to_text())?;
    let tables = dir.join(TABLES_DIR);
    fs::create_dir_all(&tables)?;
    for game in summary.games() {
        fs::write(tables.join(format!("{game}.csv")), summary.game_table(&game).to_csv()?)?;
    }
    Ok(summary)
}

/// Loads every `record.jsonl` one level below `dir`, in cell order (records
/// without a cell come last, by directory name).
pub fn read_run(dir: &Path) -> Result<Vec<MatchRecord>, EngineError> {
    let mut found = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path().join(RECORD_FILE);
        if path.is_file() {
            let rec = MatchRecord::read_jsonl(BufReader::new(fs::File::open(&path)?))?;
            found.push((entry.file_name(), rec));
        }
    }
    found.sort_by(|(na, a), (nb, b)| {
        let ka = a.cell.as_ref().map_or(usize::MAX, |c| c.index);
        let kb = b.cell.as_ref().map_or(usize::MAX, |c| c.index);
        ka.cmp(&kb).then_with(|| na.cmp(nb))
    });
    Ok(found.into_iter().map(|(_, r)| r).collect())
}
