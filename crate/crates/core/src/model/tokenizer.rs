//! Whitespace tokenizer over a fixed vocabulary, plus the compact transcript
//! format the toy model reads.
//!
//! A compact transcript is `<bos> <game> <role> o_1 … o_t` where each `o_k` is
//! a joint-outcome token `mine|theirs` written from the deciding agent's point
//! of view. The decision position is the last token, so on round `t + 1` it
//! holds the opponent's most recent move.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::game::{CanonicalGame, Game, JointHistory, Player};

pub const BOS: &str = "<bos>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Tokenizer {
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for Tokenizer {
    type Error = ModelError;

    fn try_from(vocab: Vec<String>) -> Result<Self, Self::Error> {
        Tokenizer::new(vocab)
    }
}

impl From<Tokenizer> for Vec<String> {
    fn from(t: Tokenizer) -> Self {
        t.vocab
    }
}

/// Joint-outcome token for a round seen from one side.
pub fn outcome_token(mine: &str, theirs: &str) -> String {
    format!("{mine}|{theirs}")
}

impl Tokenizer {
    pub fn new(vocab: Vec<String>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(ModelError::InvalidConfig(format!("bad token {tok:?}")));
            }
            if index.insert(tok.clone(), i).is_some() {
                return Err(ModelError::InvalidConfig(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Tokenizer { vocab, index })
    }

    /// Vocabulary covering the four canonical games: specials, game ids,
    /// roles, plain action tokens and joint-outcome tokens.
    pub fn standard() -> Self {
        let mut vocab = vec![BOS.to_string(), "A".to_string(), "B".to_string()];
        for id in CanonicalGame::ALL {
            vocab.push(id.id().to_string());
        }
        for id in CanonicalGame::ALL {
            let g = Game::canonical(id);
            vocab.extend(g.actions(Player::A).iter().cloned());
        }
        for id in CanonicalGame::ALL {
            let g = Game::canonical(id);
            let labels = g.actions(Player::A);
            for mine in labels {
                for theirs in labels {
                    vocab.push(outcome_token(mine, theirs));
                }
            }
        }
        Tokenizer::new(vocab).expect("standard vocabulary is well formed")
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.vocab.get(id).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>, ModelError> {
        text.split_whitespace()
            .map(|t| self.id(t).ok_or_else(|| ModelError::UnknownToken(t.to_string())))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Token ids of the two actions `player` can take in `game`, in action
    /// order.
    pub fn action_ids(&self, game: &Game, player: Player) -> Result<[usize; 2], ModelError> {
        let labels = game.actions(player);
        let lookup = |l: &str| self.id(l).ok_or_else(|| ModelError::UnknownToken(l.to_string()));
        Ok([lookup(&labels[0])?, lookup(&labels[1])?])
    }

    /// True for joint-outcome tokens, i.e. positions carrying an opponent
    /// action.
    pub fn is_outcome(&self, id: usize) -> bool {
        self.token(id).is_some_and(|t| t.contains('|'))
    }

    /// Positions holding opponent actions.
    pub fn opponent_positions(&self, tokens: &[usize]) -> Vec<usize> {
        tokens
            .iter()
            .enumerate()
            .filter(|(_, &t)| self.is_outcome(t))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Renders the compact transcript `role` sees before its next move.
pub fn compact_transcript(history: &JointHistory, role: Player) -> String {
    let game = &history.game;
    let mut parts = vec![BOS.to_string(), game.name().to_string(), role.label().to_string()];
    for &(a, b) in &history.rounds {
        let (mine, theirs) = match role {
            Player::A => (a, b),
            Player::B => (b, a),
        };
        parts.push(outcome_token(
            game.action_label(role, mine),
            game.action_label(role.other(), theirs),
        ));
    }
    parts.join(" ")
}
