//! Prompt sets for the analyses: random game transcripts and the
//! cooperative/defecting contrast sets used for direction extraction.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InterpError;
use crate::game::{Game, JointHistory, Player};
use crate::model::{compact_transcript, Tokenizer};

/// One analysis prompt: the transcript it was rendered from and its tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptItem {
    pub id: String,
    pub history: JointHistory,
    pub role: Player,
    pub tokens: Vec<usize>,
}

impl PromptItem {
    pub fn new(id: impl Into<String>, history: JointHistory, role: Player, tok: &Tokenizer) -> Result<Self, InterpError> {
        let tokens = tok.encode(&compact_transcript(&history, role))?;
        Ok(PromptItem {
            id: id.into(),
            history,
            role,
            tokens,
        })
    }

    /// 1 when the opponent's most recent move was action 1 (the
    /// non-cooperative one); `None` on the first round.
    pub fn opp_last_move(&self) -> Option<u8> {
        self.history.actions_of(self.role.other()).last().map(|a| a as u8)
    }

    /// 1 when this agent cooperated (action 0) in the most recent round.
    pub fn cooperated(&self) -> Option<u8> {
        self.history.actions_of(self.role).last().map(|a| u8::from(a == 0))
    }
}

fn check_lengths(lengths: &RangeInclusive<usize>) -> Result<(), InterpError> {
    if lengths.is_empty() {
        return Err(InterpError::InvalidArgument("empty history length range".into()));
    }
    Ok(())
}

/// `n` transcripts with uniformly random moves for both players and a
/// history length drawn uniformly from `lengths`.
pub fn random_prompts(
    tok: &Tokenizer,
    game: &Game,
    role: Player,
    n: usize,
    lengths: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<PromptItem>, InterpError> {
    check_lengths(&lengths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(lengths.clone());
            let rounds: Vec<(usize, usize)> =
                (0..len).map(|_| (rng.random_range(0..2), rng.random_range(0..2))).collect();
            let h = JointHistory::from_rounds(game.clone(), &rounds)?;
            PromptItem::new(format!("random-{i:04}"), h, role, tok)
        })
        .collect()
}

/// Contrast sets of `n` prompts each: the opponent cooperated in every
/// round, or defected in every round. The agent's own moves are random and
/// all prompts share the history length `len`.
pub fn contrast_prompts(
    tok: &Tokenizer,
    game: &Game,
    role: Player,
    n: usize,
    len: usize,
    seed: u64,
) -> Result<(Vec<PromptItem>, Vec<PromptItem>), InterpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |opp: usize, tag: &str| -> Result<Vec<PromptItem>, InterpError> {
        (0..n)
            .map(|i| {
                let rounds: Vec<(usize, usize)> = (0..len)
                    .map(|_| {
                        let own = rng.random_range(0..2);
                        match role {
                            Player::A => (own, opp),
                            Player::B => (opp, own),
                        }
                    })
                    .collect();
                let h = JointHistory::from_rounds(game.clone(), &rounds)?;
                PromptItem::new(format!("{tag}-{i:04}"), h, role, tok)
            })
            .collect()
    };
    let coop = make(0, "coop")?;
    let defect = make(1, "defect")?;
    Ok((coop, defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_game;

    #[test]
    fn random_prompts_are_seeded() {
        let tok = Tokenizer::standard();
        let g = make_game("pd").unwrap();
        let a = random_prompts(&tok, &g, Player::A, 10, 1..=5, 4).unwrap();
        let b = random_prompts(&tok, &g, Player::A, 10, 1..=5, 4).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!((1..=5).contains(&p.history.len()));
            assert_eq!(p.tokens.len(), p.history.len() + 3);
        }
    }

    #[test]
    fn labels_follow_the_role() {
        let tok = Tokenizer::standard();
        let g = make_game("pd").unwrap();
        let h = JointHistory::from_rounds(g, &[(0, 1)]).unwrap();
        let as_a = PromptItem::new("x", h.clone(), Player::A, &tok).unwrap();
        assert_eq!(as_a.opp_last_move(), Some(1));
        assert_eq!(as_a.cooperated(), Some(1));
        let as_b = PromptItem::new("y", h, Player::B, &tok).unwrap();
        assert_eq!(as_b.opp_last_move(), Some(0));
        assert_eq!(as_b.cooperated(), Some(0));
    }

    #[test]
    fn contrast_sets_fix_the_opponent() {
        let tok = Tokenizer::standard();
        let g = make_game("pd").unwrap();
        let (c, d) = contrast_prompts(&tok, &g, Player::B, 5, 6, 1).unwrap();
        assert!(c.iter().all(|p| p.history.actions_of(Player::A).all(|a| a == 0)));
        assert!(d.iter().all(|p| p.history.actions_of(Player::A).all(|a| a == 1)));
    }
}
