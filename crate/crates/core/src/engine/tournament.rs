use std::collections::BTreeSet;
use std::hash::Hasher;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::PromptTemplate;
use super::record::{CellRef, MatchConfig, MatchRecord, MatchStatus};
use super::runner::run_cell;
use super::EngineError;
use crate::agents::{AgentSpec, Mode};
use crate::game::{make_game, Game, JointHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Each agent against a copy of itself.
    SelfPlay,
    /// Every ordered pair of distinct agents.
    AllOrderedPairs,
}

/// A canonical game id or a full game definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRef {
    Id(String),
    Def(Game),
}

impl GameRef {
    pub fn resolve(&self) -> Result<Game, EngineError> {
        match self {
            GameRef::Id(id) => Ok(make_game(id)?),
            GameRef::Def(g) => Ok(g.clone()),
        }
    }
}

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
pub struct TournamentPlan {
    pub agents: Vec<AgentSpec>,
    pub games: Vec<GameRef>,
    pub modes: Vec<Mode>,
    pub pairing: Pairing,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "yes")]
    pub include_mixed_eq: bool,
}

/// One (pair, game, mode) cell of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub id: String,
    pub agent_a: usize,
    pub agent_b: usize,
    pub game: Game,
    pub mode: Mode,
    pub seed: u64,
}

/// 64-bit FNV-1a of a cell id.
pub fn stable_hash(s: &str) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

impl TournamentPlan {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.agents.is_empty() || self.games.is_empty() || self.modes.is_empty() {
            return Err(EngineError::Config("plan needs agents, games and modes".into()));
        }
        let ids: BTreeSet<&str> = self.agents.iter().map(AgentSpec::id).collect();
        if ids.len() != self.agents.len() {
            return Err(EngineError::Config("agent ids must be unique".into()));
        }
        if self.pairing == Pairing::AllOrderedPairs && self.agents.len() < 2 {
            return Err(EngineError::Config("all_ordered_pairs needs at least two agents".into()));
        }
        if self.rounds == 0 {
            return Err(EngineError::Config("rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// Ordered (A, B) agent index pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let k = self.agents.len();
        match self.pairing {
            Pairing::SelfPlay => (0..k).map(|i| (i, i)).collect(),
            Pairing::AllOrderedPairs => (0..k)
                .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect(),
        }
    }

    /// All cells in run order: game, then pair, then mode.
    pub fn cells(&self) -> Result<Vec<Cell>, EngineError> {
        self.validate()?;
        let games = self.games.iter().map(GameRef::resolve).collect::<Result<Vec<_>, _>>()?;
        let mut cells = Vec::new();
        for game in &games {
            for (a, b) in self.pairs() {
                for &mode in &self.modes {
                    let id = sanitize(&format!(
                        "{}-vs-{}-{}-{}",
                        self.agents[a].id(),
                        self.agents[b].id(),
                        game.name(),
                        mode
                    ));
                    cells.push(Cell {
                        index: cells.len(),
                        seed: self.base_seed ^ stable_hash(&id),
                        id,
                        agent_a: a,
                        agent_b: b,
                        game: game.clone(),
                        mode,
                    });
                }
            }
        }
        Ok(cells)
    }

    fn cell_config(&self, cell: &Cell) -> MatchConfig {
        MatchConfig {
            game: cell.game.clone(),
            rounds: self.rounds,
            mode: cell.mode,
            seed: cell.seed,
            temperature: self.temperature,
            role_assignment: (
                self.agents[cell.agent_a].id().to_string(),
                self.agents[cell.agent_b].id().to_string(),
            ),
            include_mixed_eq: self.include_mixed_eq,
        }
    }
}

fn run_one(plan: &TournamentPlan, cell: &Cell, template: &PromptTemplate) -> Result<MatchRecord, EngineError> {
    let config = plan.cell_config(cell);
    let cell_ref = CellRef {
        index: cell.index,
        id: cell.id.clone(),
    };
    let built = plan.agents[cell.agent_a]
        .build()
        .and_then(|a| plan.agents[cell.agent_b].build().map(|b| (a, b)));
    match built {
        Ok((mut a, mut b)) => run_cell(a.as_mut(), b.as_mut(), &config, template, Some(cell_ref)),
        Err(e) => Ok(MatchRecord {
            history: JointHistory::with_horizon(config.game.clone(), config.rounds),
            config,
            cell: Some(cell_ref),
            template_version: template.version().to_string(),
            agents: Vec::new(),
            status: MatchStatus::Invalid {
                code: "agent_init".into(),
                round: 0,
            },
            reasoning_log: Vec::new(),
            distance_series: Vec::new(),
            final_distance: None,
            diagnostics: vec![super::record::Diagnostic {
                round: 0,
                role: crate::game::Player::A,
                code: "agent_init".into(),
                message: e.to_string(),
            }],
        }),
    }
}

/// Runs every cell on at most `jobs` worker threads. Records come back in
/// cell order whatever the scheduling; an invalid match does not stop the
/// others.
pub fn run_tournament(
    plan: &TournamentPlan,
    template: &PromptTemplate,
    jobs: usize,
) -> Result<Vec<MatchRecord>, EngineError> {
    let cells = plan.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EngineError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_one(plan, cell, template))
            .collect::<Result<Vec<_>, _>>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedKind;

    fn plan(pairing: Pairing, k: usize) -> TournamentPlan {
        let kinds = [
            ScriptedKind::AlwaysCoop,
            ScriptedKind::AlwaysDefect,
            ScriptedKind::TitForTat,
            ScriptedKind::GrimTrigger,
        ];
        TournamentPlan {
            agents: kinds[..k]
                .iter()
                .map(|kind| AgentSpec::scripted(kind.name(), kind.clone()))
                .collect(),
            games: ["pd", "bos", "sh", "mp"].map(|g| GameRef::Id(g.into())).to_vec(),
            modes: Mode::ALL.to_vec(),
            pairing,
            rounds: 5,
            base_seed: 3,
            temperature: 0.7,
            include_mixed_eq: true,
        }
    }

    #[test]
    fn cell_counts() {
        assert_eq!(plan(Pairing::AllOrderedPairs, 4).cells().unwrap().len(), 144);
        assert_eq!(plan(Pairing::SelfPlay, 1).cells().unwrap().len(), 12);
        assert_eq!(plan(Pairing::AllOrderedPairs, 4).pairs().len(), 12);
    }

    #[test]
    fn cell_ids_and_seeds_are_unique() {
        let cells = plan(Pairing::AllOrderedPairs, 4).cells().unwrap();
        let ids: BTreeSet<_> = cells.iter().map(|c| c.id.clone()).collect();
        let seeds: BTreeSet<_> = cells.iter().map(|c| c.seed).collect();
        assert_eq!(ids.len(), cells.len());
        assert_eq!(seeds.len(), cells.len());
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(stable_hash(""), 0xcbf29ce484222325);
        assert_eq!(stable_hash("a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(Pairing::AllOrderedPairs, 1);
        assert!(p.cells().is_err());
        p.pairing = Pairing::SelfPlay;
        assert!(p.cells().is_ok());
        p.agents.push(p.agents[0].clone());
        assert!(p.cells().is_err());
    }

    #[test]
    fn plan_from_toml() {
        let text = r#"
            games = ["pd", "mp"]
            modes = ["direct", "cot"]
            pairing = "self_play"
            rounds = 10
            base_seed = 9

            [[agents]]
            type = "scripted"
            id = "tft"
            strategy = { kind = "tit_for_tat" }
        "#;
        let p: TournamentPlan = toml::from_str(text).unwrap();
        assert_eq!(p.cells().unwrap().len(), 4);
        assert!(toml::from_str::<TournamentPlan>(&format!("{text}\nbogus = 1")).is_err());
    }
}
