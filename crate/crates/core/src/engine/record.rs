//! Match configuration and transcripts, with their JSON-lines form: one
//! header object followed by one object per committed round.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::agents::{AgentDescriptor, Mode};
use crate::game::{Game, JointHistory, Player};

fn default_rounds() -> usize {
    50
}

fn default_temperature() -> f64 {
    0.7
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    pub game: Game,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Agent ids seated as A and B.
    pub role_assignment: (String, String),
    /// Whether the fully mixed equilibrium counts in the distance.
    #[serde(default = "yes")]
    pub include_mixed_eq: bool,
}

impl MatchConfig {
    pub fn new(game: Game, mode: Mode, seed: u64, a: impl Into<String>, b: impl Into<String>) -> Self {
        MatchConfig {
            game,
            rounds: default_rounds(),
            mode,
            seed,
            temperature: default_temperature(),
            role_assignment: (a.into(), b.into()),
            include_mixed_eq: true,
        }
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.rounds == 0 {
            return Err(EngineError::Config("rounds must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(EngineError::Config(format!(
                "temperature {} must be a finite value >= 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Optional reasoning text of both agents in one round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundReasoning {
    pub a: Option<String>,
    pub b: Option<String>,
}

impl RoundReasoning {
    pub fn of(&self, player: Player) -> Option<&str> {
        match player {
            Player::A => self.a.as_deref(),
            Player::B => self.b.as_deref(),
        }
    }
}

/// A problem raised by one agent during one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub round: usize,
    pub role: Player,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum MatchStatus {
    Complete,
    /// Aborted; `round` is the round that could not be committed.
    Invalid { code: String, round: usize },
}

/// Where a match sits in a tournament.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRef {
    pub index: usize,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub config: MatchConfig,
    pub cell: Option<CellRef>,
    pub template_version: String,
    pub agents: Vec<AgentDescriptor>,
    pub status: MatchStatus,
    pub history: JointHistory,
    pub reasoning_log: Vec<RoundReasoning>,
    pub distance_series: Vec<f64>,
    /// Last element of the distance series; `None` when no round was
    /// committed.
    pub final_distance: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

impl MatchRecord {
    pub fn is_valid(&self) -> bool {
        self.status == MatchStatus::Complete
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    kind: String,
    config: MatchConfig,
    cell: Option<CellRef>,
    template_version: String,
    agents: Vec<AgentDescriptor>,
    status: MatchStatus,
    rounds_played: usize,
    final_distance: Option<f64>,
    diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundLine {
    kind: String,
    round: usize,
    a: usize,
    b: usize,
    a_label: String,
    b_label: String,
    reasoning_a: Option<String>,
    reasoning_b: Option<String>,
    distance: f64,
}

impl MatchRecord {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), EngineError> {
        let header = HeaderLine {
            kind: "header".into(),
            config: self.config.clone(),
            cell: self.cell.clone(),
            template_version: self.template_version.clone(),
            agents: self.agents.clone(),
            status: self.status.clone(),
            rounds_played: self.history.len(),
            final_distance: self.final_distance,
            diagnostics: self.diagnostics.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        let g = &self.config.game;
        for (k, &(a, b)) in self.history.rounds.iter().enumerate() {
            let r = self.reasoning_log.get(k).cloned().unwrap_or_default();
            let line = RoundLine {
                kind: "round".into(),
                round: k + 1,
                a,
                b,
                a_label: g.action_label(Player::A, a).into(),
                b_label: g.action_label(Player::B, b).into(),
                reasoning_a: r.a,
                reasoning_b: r.b,
                distance: self.distance_series[k],
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<MatchRecord, EngineError> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| EngineError::Format("empty record".into()))??;
        let header: HeaderLine = serde_json::from_str(&first)?;
        if header.kind != "header" {
            return Err(EngineError::Format(format!("first line has kind '{}'", header.kind)));
        }
        let mut history = JointHistory::with_horizon(header.config.game.clone(), header.config.rounds);
        let mut reasoning_log = Vec::new();
        let mut distance_series = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: RoundLine = serde_json::from_str(&line)?;
            if r.kind != "round" || r.round != history.len() + 1 {
                return Err(EngineError::Format(format!("unexpected line for round {}", r.round)));
            }
            history.push(r.a, r.b)?;
            reasoning_log.push(RoundReasoning {
                a: r.reasoning_a,
                b: r.reasoning_b,
            });
            distance_series.push(r.distance);
        }
        if history.len() != header.rounds_played {
            return Err(EngineError::Format(format!(
                "header announces {} rounds, found {}",
                header.rounds_played,
                history.len()
            )));
        }
        Ok(MatchRecord {
            config: header.config,
            cell: header.cell,
            template_version: header.template_version,
            agents: header.agents,
            status: header.status,
            history,
            reasoning_log,
            distance_series,
            final_distance: header.final_distance,
            diagnostics: header.diagnostics,
        })
    }
}
