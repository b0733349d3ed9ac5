use rand::SeedableRng;

use super::prompt::PromptTemplate;
use super::record::{CellRef, Diagnostic, MatchConfig, MatchRecord, MatchStatus, RoundReasoning};
use super::EngineError;
use crate::agents::{Agent, AgentError, AgentRng, Decision, DecisionContext};
use crate::game::{enumerate_equilibria, DistanceTracker, JointHistory, Player};

/// Independent generator for one seat, derived from the match seed.
pub fn seat_rng(seed: u64, role: Player) -> AgentRng {
    let mut rng = AgentRng::seed_from_u64(seed);
    rng.set_stream(match role {
        Player::A => 1,
        Player::B => 2,
    });
    rng
}

/// One decision under the retry policy: an unparseable reply earns one
/// stricter re-prompt; any other failure, or a second unparseable reply,
/// is final.
fn decide(
    agent: &mut dyn Agent,
    ctx: DecisionContext<'_>,
    rng: &mut AgentRng,
    template: &PromptTemplate,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Decision, AgentError> {
    let diag = |e: &AgentError| Diagnostic {
        round: ctx.round,
        role: ctx.role,
        code: e.code().to_string(),
        message: e.to_string(),
    };
    match agent.next_action(&ctx, rng) {
        Err(e @ AgentError::UnparseableAction(_)) => {
            diagnostics.push(diag(&e));
            let strict = template.render_strict(ctx.prompt, ctx.game, ctx.role);
            let retry = DecisionContext {
                prompt: &strict,
                ..ctx
            };
            agent.next_action(&retry, rng).inspect_err(|e| diagnostics.push(diag(e)))
        }
        Err(e) => {
            diagnostics.push(diag(&e));
            Err(e)
        }
        Ok(d) if d.action > 1 => {
            let e = AgentError::Schema(format!("action index {} out of range", d.action));
            diagnostics.push(diag(&e));
            Err(e)
        }
        Ok(d) => Ok(d),
    }
}

/// Plays `config.rounds` simultaneous rounds. Agent failures end the match
/// early and are reported in the record, not as an `Err`.
pub fn run_match(
    agent_a: &mut dyn Agent,
    agent_b: &mut dyn Agent,
    config: &MatchConfig,
    template: &PromptTemplate,
) -> Result<MatchRecord, EngineError> {
    run_cell(agent_a, agent_b, config, template, None)
}

pub(crate) fn run_cell(
    agent_a: &mut dyn Agent,
    agent_b: &mut dyn Agent,
    config: &MatchConfig,
    template: &PromptTemplate,
    cell: Option<CellRef>,
) -> Result<MatchRecord, EngineError> {
    config.validate()?;
    let game = &config.game;
    let equilibria = enumerate_equilibria(game).with_mixed(config.include_mixed_eq);
    let mut tracker = DistanceTracker::new(equilibria)?;
    agent_a.reset();
    agent_b.reset();
    let mut rng_a = seat_rng(config.seed, Player::A);
    let mut rng_b = seat_rng(config.seed, Player::B);

    let mut history = JointHistory::with_horizon(game.clone(), config.rounds);
    let mut reasoning_log = Vec::with_capacity(config.rounds);
    let mut distance_series = Vec::with_capacity(config.rounds);
    let mut diagnostics = Vec::new();
    let mut status = MatchStatus::Complete;

    for round in 1..=config.rounds {
        // Both prompts come from the same committed state before either
        // agent moves.
        let prompt_a = template.render(game, &history, &reasoning_log, Player::A, config.mode, round)?;
        let prompt_b = template.render(game, &history, &reasoning_log, Player::B, config.mode, round)?;
        let ctx = |role, prompt| DecisionContext {
            game,
            history: &history,
            role,
            mode: config.mode,
            round,
            prompt,
            temperature: config.temperature,
        };
        let da = decide(agent_a, ctx(Player::A, &prompt_a), &mut rng_a, template, &mut diagnostics);
        let db = match &da {
            Ok(_) => decide(agent_b, ctx(Player::B, &prompt_b), &mut rng_b, template, &mut diagnostics),
            Err(_) => Err(AgentError::Config("not queried".into())),
        };
        match (da, db) {
            (Ok(a), Ok(b)) => {
                history.push(a.action, b.action)?;
                distance_series.push(tracker.push(a.action, b.action)?);
                reasoning_log.push(RoundReasoning {
                    a: a.reasoning,
                    b: b.reasoning,
                });
            }
            (Err(e), _) | (_, Err(e)) => {
                status = MatchStatus::Invalid {
                    code: e.code().to_string(),
                    round,
                };
                break;
            }
        }
    }

    Ok(MatchRecord {
        config: config.clone(),
        cell,
        template_version: template.version().to_string(),
        agents: vec![agent_a.descriptor(), agent_b.descriptor()],
        status,
        final_distance: distance_series.last().copied(),
        history,
        reasoning_log,
        distance_series,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Mode, ScriptedAgent, ScriptedKind};
    use crate::game::make_game;

    fn play(a: ScriptedKind, b: ScriptedKind, game: &str, rounds: usize) -> MatchRecord {
        let mut a = ScriptedAgent::new("a", a).unwrap();
        let mut b = ScriptedAgent::new("b", b).unwrap();
        let cfg = MatchConfig::new(make_game(game).unwrap(), Mode::Direct, 11, "a", "b").with_rounds(rounds);
        run_match(&mut a, &mut b, &cfg, &PromptTemplate::builtin("v1").unwrap()).unwrap()
    }

    #[test]
    fn series_has_one_entry_per_round() {
        let r = play(ScriptedKind::TitForTat, ScriptedKind::Bernoulli { p: 0.5 }, "pd", 17);
        assert!(r.is_valid());
        assert_eq!(r.distance_series.len(), 17);
        assert_eq!(r.final_distance, r.distance_series.last().copied());
        assert_eq!(r.reasoning_log.len(), 17);
    }

    #[test]
    fn rejects_zero_rounds_and_negative_temperature() {
        let mut a = ScriptedAgent::new("a", ScriptedKind::AlwaysCoop).unwrap();
        let mut b = a.clone();
        let t = PromptTemplate::builtin("v1").unwrap();
        let cfg = MatchConfig::new(make_game("pd").unwrap(), Mode::Direct, 0, "a", "b").with_rounds(0);
        assert!(run_match(&mut a, &mut b, &cfg, &t).is_err());
        let mut cfg = cfg.with_rounds(3);
        cfg.temperature = -1.0;
        assert!(run_match(&mut a, &mut b, &cfg, &t).is_err());
    }

    #[test]
    fn seats_draw_from_different_streams() {
        use rand::Rng;
        let mut a = seat_rng(5, Player::A);
        let mut b = seat_rng(5, Player::B);
        let xs: Vec<u64> = (0..4).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.random()).collect();
        assert_ne!(xs, ys);
    }
}
