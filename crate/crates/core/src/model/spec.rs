use serde::{Deserialize, Serialize};

use super::tokenizer::Tokenizer;
use super::ModelError;

/// Shape of a toy decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_mlp: usize,
    pub vocab: Vec<String>,
    pub max_context: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            n_layers: 8,
            d_model: 64,
            n_heads: 4,
            d_mlp: 256,
            vocab: Tokenizer::standard().vocab().to_vec(),
            max_context: 128,
        }
    }
}

impl ModelSpec {
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_layers == 0 || self.d_model == 0 || self.n_heads == 0 || self.max_context == 0 {
            return Err(ModelError::InvalidConfig(
                "layers, width, heads and context must be positive".into(),
            ));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab.is_empty() {
            return Err(ModelError::InvalidConfig("empty vocabulary".into()));
        }
        let tok = Tokenizer::new(self.vocab.clone())?;
        for game in crate::game::CanonicalGame::ALL {
            let g = crate::game::Game::canonical(game);
            for label in g.actions(crate::game::Player::A) {
                if tok.id(label).is_none() {
                    return Err(ModelError::InvalidConfig(format!(
                        "vocabulary lacks action token '{label}'"
                    )));
                }
            }
        }
        Ok(())
    }
}
