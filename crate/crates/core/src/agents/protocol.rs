//! The `equilens/1` wire protocol: one JSON object per line in each
//! direction.
//!
//! Request:  `{"protocol":"equilens/1","round":n,"role":"A"|"B","mode":...,
//! "game":{...},"history":[{"a":label,"b":label},...],"prompt":text}`
//!
//! Response: `{"action":text,"reasoning":text|null}` or `{"error":code}`.

use serde::{Deserialize, Serialize};

use super::{AgentError, DecisionContext, Mode};
use crate::game::{Game, JointHistory, Player};

pub const PROTOCOL: &str = "equilens/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRound {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRequest {
    pub protocol: String,
    pub round: usize,
    pub role: Player,
    pub mode: Mode,
    pub game: Game,
    pub history: Vec<WireRound>,
    pub prompt: String,
}

impl WireRequest {
    pub fn from_context(ctx: &DecisionContext<'_>) -> Self {
        WireRequest {
            protocol: PROTOCOL.to_string(),
            round: ctx.round,
            role: ctx.role,
            mode: ctx.mode,
            game: ctx.game.clone(),
            history: wire_history(ctx.history),
            prompt: ctx.prompt.to_string(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

fn wire_history(history: &JointHistory) -> Vec<WireRound> {
    let g = &history.game;
    history
        .rounds
        .iter()
        .map(|&(a, b)| WireRound {
            a: g.action_label(Player::A, a).to_string(),
            b: g.action_label(Player::B, b).to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireResponse {
    pub action: String,
    #[serde(default)]
    pub reasoning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireError {
    pub error: String,
}

/// Decodes one response line. An `{"error": code}` object becomes
/// [`AgentError::Remote`]; anything else that is not a well-formed response
/// is a schema error.
pub fn decode_response(line: &str) -> Result<WireResponse, AgentError> {
    let value: serde_json::Value = serde_json::from_str(line.trim_end_matches(['\r', '\n']))
        .map_err(|e| AgentError::Schema(format!("not a JSON object: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AgentError::Schema("response is not a JSON object".into()))?;
    if obj.contains_key("error") {
        let err: WireError = serde_json::from_value(value.clone())
            .map_err(|e| AgentError::Schema(format!("error object: {e}")))?;
        return Err(AgentError::Remote(err.error));
    }
    if !obj.contains_key("action") {
        return Err(AgentError::Schema("missing field 'action'".into()));
    }
    serde_json::from_value(value).map_err(|e| AgentError::Schema(e.to_string()))
}
