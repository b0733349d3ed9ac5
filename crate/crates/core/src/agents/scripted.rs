use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentDescriptor, AgentError, AgentRng, Decision, DecisionContext};
use crate::game::{enumerate_equilibria, EquilibriumKind, EquilibriumProfile, Game, MixedStrategy, Player};

/// Fixed strategies used as oracles. Action 0 is the cooperative action of
/// every canonical game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptedKind {
    AlwaysCoop,
    AlwaysDefect,
    TitForTat,
    GrimTrigger,
    /// Plays action 0 with probability `p`.
    Bernoulli { p: f64 },
    /// Samples the stored profile; without one, the game's mixed equilibrium
    /// (or its first equilibrium when no mixed one exists).
    NashMixed {
        #[serde(default)]
        profile: Option<EquilibriumProfile>,
    },
    /// Best response to the opponent's empirical mixture, lowest index on
    /// ties. With no history the opponent is taken to be uniform.
    FictitiousPlay,
}

impl ScriptedKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScriptedKind::AlwaysCoop => "always_coop",
            ScriptedKind::AlwaysDefect => "always_defect",
            ScriptedKind::TitForTat => "tit_for_tat",
            ScriptedKind::GrimTrigger => "grim_trigger",
            ScriptedKind::Bernoulli { .. } => "bernoulli",
            ScriptedKind::NashMixed { .. } => "nash_mixed",
            ScriptedKind::FictitiousPlay => "fictitious_play",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    id: String,
    kind: ScriptedKind,
}

impl ScriptedAgent {
    pub fn new(id: impl Into<String>, kind: ScriptedKind) -> Result<Self, AgentError> {
        if let ScriptedKind::Bernoulli { p } = kind {
            if !(0.0..=1.0).contains(&p) {
                return Err(AgentError::Config(format!("bernoulli p = {p} outside [0, 1]")));
            }
        }
        Ok(ScriptedAgent { id: id.into(), kind })
    }

    pub fn kind(&self) -> &ScriptedKind {
        &self.kind
    }
}

/// Best response of `role` to the opponent's empirical mixture in
/// `opponent_actions`, lowest index on ties.
pub(crate) fn fictitious_best_response(
    game: &Game,
    role: Player,
    opponent_actions: impl Iterator<Item = usize>,
) -> usize {
    let mut counts = [0u64; 2];
    for a in opponent_actions {
        counts[a] += 1;
    }
    let t = counts[0] + counts[1];
    let belief = if t == 0 {
        MixedStrategy { probs: vec![0.5, 0.5] }
    } else {
        MixedStrategy {
            probs: vec![counts[0] as f64 / t as f64, counts[1] as f64 / t as f64],
        }
    };
    let v = game.action_values(role, &belief);
    if v[1] > v[0] {
        1
    } else {
        0
    }
}

fn default_profile(game: &Game) -> EquilibriumProfile {
    let eqs = enumerate_equilibria(game);
    eqs.profiles
        .iter()
        .find(|p| p.kind == EquilibriumKind::Mixed)
        .or_else(|| eqs.profiles.first())
        .cloned()
        .expect("every 2x2 game has an equilibrium")
}

impl Agent for ScriptedAgent {
    fn next_action(
        &mut self,
        ctx: &DecisionContext<'_>,
        rng: &mut AgentRng,
    ) -> Result<Decision, AgentError> {
        let action = match &self.kind {
            ScriptedKind::AlwaysCoop => 0,
            ScriptedKind::AlwaysDefect => 1,
            ScriptedKind::TitForTat => ctx.opponent_actions().last().unwrap_or(0),
            ScriptedKind::GrimTrigger => usize::from(ctx.opponent_actions().any(|a| a == 1)),
            ScriptedKind::Bernoulli { p } => usize::from(rng.random::<f64>() >= *p),
            ScriptedKind::NashMixed { profile } => {
                let profile = profile.clone().unwrap_or_else(|| default_profile(ctx.game));
                let p0 = profile.strategy(ctx.role).probs[0];
                usize::from(rng.random::<f64>() >= p0)
            }
            ScriptedKind::FictitiousPlay => {
                fictitious_best_response(ctx.game, ctx.role, ctx.opponent_actions())
            }
        };
        Ok(Decision::silent(action))
    }

    fn reset(&mut self) {}

    fn descriptor(&self) -> AgentDescriptor {
        AgentDescriptor {
            id: self.id.clone(),
            kind: format!("scripted:{}", self.kind.name()),
            params: serde_json::to_value(&self.kind).unwrap_or(serde_json::Value::Null),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::agents::Mode;
    use crate::game::{make_game, JointHistory};

    fn decide(kind: ScriptedKind, game: &str, rounds: &[(usize, usize)], role: Player) -> usize {
        let g = make_game(game).unwrap();
        let h = JointHistory::from_rounds(g.clone(), rounds).unwrap();
        let ctx = DecisionContext {
            game: &g,
            history: &h,
            role,
            mode: Mode::Direct,
            round: h.len() + 1,
            prompt: "",
            temperature: 0.7,
        };
        let mut agent = ScriptedAgent::new("x", kind).unwrap();
        agent.next_action(&ctx, &mut AgentRng::seed_from_u64(0)).unwrap().action
    }

    #[test]
    fn tit_for_tat_opens_with_cooperate_then_copies() {
        assert_eq!(decide(ScriptedKind::TitForTat, "pd", &[], Player::A), 0);
        assert_eq!(decide(ScriptedKind::TitForTat, "pd", &[(0, 1)], Player::A), 1);
        assert_eq!(decide(ScriptedKind::TitForTat, "pd", &[(0, 1), (1, 0)], Player::A), 0);
        assert_eq!(decide(ScriptedKind::TitForTat, "pd", &[(1, 0)], Player::B), 1);
    }

    #[test]
    fn grim_trigger_never_forgives() {
        let h = [(0, 0), (0, 1), (1, 0), (1, 0)];
        assert_eq!(decide(ScriptedKind::GrimTrigger, "pd", &h[..1], Player::A), 0);
        for t in 2..=h.len() {
            assert_eq!(decide(ScriptedKind::GrimTrigger, "pd", &h[..t], Player::A), 1);
        }
    }

    #[test]
    fn fictitious_play_in_matching_pennies() {
        // Opponent history Heads, Heads, Tails: belief (2/3, 1/3).
        // The mismatcher (B) answers Tails, the matcher (A) answers Heads.
        let as_b = [(0, 0), (0, 0), (1, 0)];
        assert_eq!(decide(ScriptedKind::FictitiousPlay, "mp", &as_b, Player::B), 1);
        let as_a = [(0, 0), (0, 0), (0, 1)];
        assert_eq!(decide(ScriptedKind::FictitiousPlay, "mp", &as_a, Player::A), 0);
    }

    #[test]
    fn fictitious_play_ties_break_low() {
        // Uniform belief in matching pennies leaves both actions at 0.
        assert_eq!(decide(ScriptedKind::FictitiousPlay, "mp", &[], Player::A), 0);
        assert_eq!(decide(ScriptedKind::FictitiousPlay, "mp", &[(0, 0), (0, 1)], Player::A), 0);
    }

    #[test]
    fn bernoulli_bounds_checked() {
        assert!(ScriptedAgent::new("b", ScriptedKind::Bernoulli { p: 1.5 }).is_err());
        assert_eq!(decide(ScriptedKind::Bernoulli { p: 1.0 }, "pd", &[], Player::A), 0);
        assert_eq!(decide(ScriptedKind::Bernoulli { p: 0.0 }, "pd", &[], Player::A), 1);
    }

    #[test]
    fn nash_mixed_picks_pure_profile_in_pd() {
        let kind = ScriptedKind::NashMixed { profile: None };
        assert_eq!(decide(kind, "pd", &[], Player::B), 1);
    }
}
