//! Final-distance tables: a long CSV with one row per match, and per-game
//! wide tables with one row per ordered pair and one column per mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::record::{MatchRecord, MatchStatus};
use super::EngineError;
use crate::agents::Mode;

/// Distances below this count as exact Nash play.
pub const EXACT_NASH: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub game: String,
    pub mode: Mode,
    pub agent_a: String,
    pub agent_b: String,
    pub final_distance: Option<f64>,
    pub exact_nash: bool,
    pub status: String,
}

impl SummaryRow {
    pub fn pair(&self) -> String {
        format!("{} vs {}", self.agent_a, self.agent_b)
    }

    fn cell_text(&self) -> String {
        match self.final_distance {
            Some(d) if self.status == "complete" => format!("{d:.2}"),
            _ => "invalid".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

/// One game's wide table.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTable {
    pub game: String,
    pub modes: Vec<Mode>,
    /// Pair label and one cell per mode (`None` when that cell was not run).
    pub rows: Vec<(String, Vec<Option<SummaryRow>>)>,
}

pub fn summarize(records: &[MatchRecord]) -> Summary {
    let rows = records
        .iter()
        .map(|r| {
            let (a, b) = &r.config.role_assignment;
            let status = match &r.status {
                MatchStatus::Complete => "complete".to_string(),
                MatchStatus::Invalid { code, .. } => format!("invalid:{code}"),
            };
            let exact = r.is_valid() && r.final_distance.is_some_and(|d| d < EXACT_NASH);
            SummaryRow {
                game: r.config.game.name().to_string(),
                mode: r.config.mode,
                agent_a: a.clone(),
                agent_b: b.clone(),
                final_distance: r.final_distance,
                exact_nash: exact,
                status,
            }
        })
        .collect();
    Summary { rows }
}

impl Summary {
    /// Games in order of first appearance.
    pub fn games(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.game) {
                seen.push(r.game.clone());
            }
        }
        seen
    }

    pub fn to_csv(&self) -> Result<String, EngineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["game", "mode", "agent_a", "agent_b", "final_distance", "exact_nash", "status"])?;
        for r in &self.rows {
            let d = r.final_distance.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([
                r.game.as_str(),
                r.mode.id(),
                &r.agent_a,
                &r.agent_b,
                &d,
                if r.exact_nash { "true" } else { "false" },
                &r.status,
            ])?;
        }
        finish(w)
    }

    pub fn game_table(&self, game: &str) -> GameTable {
        let mut modes: Vec<Mode> = self.rows.iter().filter(|r| r.game == game).map(|r| r.mode).collect();
        modes.sort();
        modes.dedup();
        let mut order: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(String, Mode), SummaryRow> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.game == game) {
            let pair = r.pair();
            if !order.contains(&pair) {
                order.push(pair.clone());
            }
            cells.insert((pair, r.mode), r.clone());
        }
        let rows = order
            .into_iter()
            .map(|pair| {
                let cols = modes.iter().map(|&m| cells.get(&(pair.clone(), m)).cloned()).collect();
                (pair, cols)
            })
            .collect();
        GameTable {
            game: game.to_string(),
            modes,
            rows,
        }
    }

    /// Plain-text rendering of every game table; exact-Nash cells carry a `*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for game in self.games() {
            let t = self.game_table(&game);
            let _ = writeln!(out, "{}", t.to_text());
        }
        if out.is_empty() {
            out.push_str("(no matches)\n");
        } else {
            out.push_str(&format!("* exact Nash (d < {EXACT_NASH})\n"));
        }
        out
    }
}

impl GameTable {
    fn header(&self) -> Vec<String> {
        std::iter::once("pair".to_string())
            .chain(self.modes.iter().map(|m| m.title().to_string()))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, EngineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for (pair, cols) in &self.rows {
            let mut rec = vec![pair.clone()];
            rec.extend(cols.iter().map(|c| c.as_ref().map(SummaryRow::cell_text).unwrap_or_default()));
            w.write_record(rec)?;
        }
        finish(w)
    }

    pub fn to_text(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(pair, cols)| {
                let mut line = vec![pair.clone()];
                line.extend(cols.iter().map(|c| match c {
                    Some(r) if r.exact_nash => format!("{}*", r.cell_text()),
                    Some(r) => r.cell_text(),
                    None => "-".into(),
                }));
                line
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                body.iter()
                    .map(|l| l[i].chars().count())
                    .chain(std::iter::once(header[i].chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_line = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = format!("{}\n{}\n", self.game, fmt_line(&header));
        for l in &body {
            out.push_str(&fmt_line(l));
            out.push('\n');
        }
        out
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, EngineError> {
    let bytes = w.into_inner().map_err(|e| EngineError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}
