//! The agent interface and its three families: scripted strategies,
//! the toy-transformer agent and external agents speaking the wire protocol.

mod external;
mod parse;
mod protocol;
mod scripted;
mod transformer;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, JointHistory, Player};
use crate::model::ModelError;

pub use external::{ExternalAgent, Transport, DEFAULT_TIMEOUT};
pub use parse::parse_action;
pub use protocol::{WireError, WireRequest, WireResponse, WireRound, PROTOCOL};
pub use scripted::{ScriptedAgent, ScriptedKind};
pub use transformer::{sample_action, TransformerAgent};

/// Every agent draws its randomness from this generator.
pub type AgentRng = ChaCha8Rng;

/// How much reasoning an agent is asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Cot,
    Scratchpad,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Direct, Mode::Cot, Mode::Scratchpad];

    pub fn id(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Cot => "cot",
            Mode::Scratchpad => "scratchpad",
        }
    }

    /// Column heading used in summary tables.
    pub fn title(self) -> &'static str {
        match self {
            Mode::Direct => "Direct",
            Mode::Cot => "CoT",
            Mode::Scratchpad => "Scratchpad",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Mode::Direct),
            "cot" => Ok(Mode::Cot),
            "scratchpad" => Ok(Mode::Scratchpad),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no response within {0} ms")]
    Timeout(u64),
    #[error("malformed response: {0}")]
    Schema(String),
    #[error("endpoint unavailable: {0}")]
    DeadEndpoint(String),
    #[error("no action label in '{0}'")]
    UnparseableAction(String),
    #[error("endpoint reported error '{0}'")]
    Remote(String),
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl AgentError {
    /// Stable code recorded in match diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            AgentError::Timeout(_) => "timeout",
            AgentError::Schema(_) => "schema",
            AgentError::DeadEndpoint(_) => "dead_endpoint",
            AgentError::UnparseableAction(_) => "unparseable_action",
            AgentError::Remote(_) => "remote",
            AgentError::Config(_) => "config",
            AgentError::Model(_) => "model",
        }
    }
}

/// Everything an agent may look at when choosing its move.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub game: &'a Game,
    /// Rounds committed so far; never contains the current round.
    pub history: &'a JointHistory,
    pub role: Player,
    pub mode: Mode,
    /// 1-based index of the round being decided.
    pub round: usize,
    /// Rendered prompt text for this role.
    pub prompt: &'a str,
    pub temperature: f64,
}

impl DecisionContext<'_> {
    /// Actions the opponent has played, oldest first.
    pub fn opponent_actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.history.actions_of(self.role.other())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: usize,
    pub reasoning: Option<String>,
}

impl Decision {
    pub fn silent(action: usize) -> Self {
        Decision { action, reasoning: None }
    }
}

/// Identifier and parameters of an agent, recorded with every match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub id: String,
    pub kind: String,
    pub params: serde_json::Value,
}

pub trait Agent: Send {
    fn next_action(
        &mut self,
        ctx: &DecisionContext<'_>,
        rng: &mut AgentRng,
    ) -> Result<Decision, AgentError>;

    /// Clears any per-match state.
    fn reset(&mut self);

    fn descriptor(&self) -> AgentDescriptor;
}

/// Serializable recipe for an agent, so that every match can build its own
/// instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Scripted { id: String, strategy: ScriptedKind },
    /// A planted toy model, built from the given circuit settings.
    Planted {
        id: String,
        #[serde(default)]
        circuit: crate::model::SyntheticCircuitConfig,
        #[serde(default)]
        weight_seed: u64,
    },
    /// A model loaded from a weight directory.
    Weights { id: String, path: std::path::PathBuf },
    Stdio {
        id: String,
        command: Vec<String>,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
    Http {
        id: String,
        url: String,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

impl AgentSpec {
    pub fn id(&self) -> &str {
        match self {
            AgentSpec::Scripted { id, .. }
            | AgentSpec::Planted { id, .. }
            | AgentSpec::Weights { id, .. }
            | AgentSpec::Stdio { id, .. }
            | AgentSpec::Http { id, .. } => id,
        }
    }

    pub fn scripted(id: impl Into<String>, kind: ScriptedKind) -> Self {
        AgentSpec::Scripted { id: id.into(), strategy: kind }
    }

    pub fn build(&self) -> Result<Box<dyn Agent>, AgentError> {
        let timeout = |ms: &Option<u64>| {
            ms.map(std::time::Duration::from_millis).unwrap_or(DEFAULT_TIMEOUT)
        };
        Ok(match self {
            AgentSpec::Scripted { id, strategy } => Box::new(ScriptedAgent::new(id.clone(), strategy.clone())?),
            AgentSpec::Planted { id, circuit, weight_seed } => {
                let spec = crate::model::ModelSpec::default();
                let model = crate::model::build_synthetic_circuit(&spec, circuit, *weight_seed)?;
                Box::new(TransformerAgent::new(id.clone(), std::sync::Arc::new(model)))
            }
            AgentSpec::Weights { id, path } => {
                let model = crate::model::load_model(path)?;
                Box::new(TransformerAgent::new(id.clone(), std::sync::Arc::new(model)))
            }
            AgentSpec::Stdio { id, command, timeout_ms } => Box::new(ExternalAgent::new(
                id.clone(),
                Transport::Stdio { command: command.clone() },
                timeout(timeout_ms),
            )?),
            AgentSpec::Http { id, url, timeout_ms } => Box::new(ExternalAgent::new(
                id.clone(),
                Transport::Http { url: url.clone() },
                timeout(timeout_ms),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trips() {
        for m in Mode::ALL {
            assert_eq!(m.id().parse::<Mode>().unwrap(), m);
        }
        assert!("loud".parse::<Mode>().is_err());
    }

    #[test]
    fn agent_spec_from_toml() {
        let spec: AgentSpec = toml::from_str(
            r#"
            type = "scripted"
            id = "b7"
            strategy = { kind = "bernoulli", p = 0.7 }
            "#,
        )
        .unwrap();
        assert_eq!(spec, AgentSpec::scripted("b7", ScriptedKind::Bernoulli { p: 0.7 }));
        assert_eq!(spec.id(), "b7");
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [
            AgentError::Timeout(1).code(),
            AgentError::Schema(String::new()).code(),
            AgentError::DeadEndpoint(String::new()).code(),
            AgentError::UnparseableAction(String::new()).code(),
            AgentError::Remote(String::new()).code(),
        ];
        let set: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(set.len(), codes.len());
    }
}
