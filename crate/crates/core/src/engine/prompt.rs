//! Prompt rendering from a versioned template file.
//!
//! A template starts with `@version <id>`, then `[section]` blocks. Text in a
//! section may use `{placeholder}` fields. The sections used are `header`,
//! `history`, `row`, `opponent_reasoning`, `payoff_row`, one per mode
//! (`direct`, `cot`, `scratchpad`) and `strict` for the re-prompt after an
//! unparseable reply.

use std::collections::BTreeMap;
use std::path::Path;

use super::record::RoundReasoning;
use super::EngineError;
use crate::agents::Mode;
use crate::game::{Game, JointHistory, Player};

const BUILTIN_V1: &str = include_str!("../../templates/prompt_v1.txt");
pub const DEFAULT_TEMPLATE_VERSION: &str = "v1";

const REQUIRED: [&str; 9] = [
    "header",
    "history",
    "row",
    "opponent_reasoning",
    "payoff_row",
    "direct",
    "cot",
    "scratchpad",
    "strict",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    version: String,
    sections: BTreeMap<String, String>,
}

/// Replaces `{key}` fields in one pass, so substituted text is never
/// re-scanned.
fn fill(fragment: &str, fields: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(fragment.len());
    let mut rest = fragment;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let field = after.find('}').and_then(|close| {
            let key = &after[..close];
            fields.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        });
        match field {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

impl PromptTemplate {
    /// Templates shipped with the crate.
    pub fn builtin(version: &str) -> Result<Self, EngineError> {
        match version {
            "v1" => Self::parse(BUILTIN_V1),
            other => Err(EngineError::Template(format!("no built-in template '{other}'"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let mut version = None;
        let mut sections: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if sections.contains_key(name) {
                    return Err(EngineError::Template(format!("section [{name}] repeated")));
                }
                sections.insert(name.to_string(), Vec::new());
                current = Some(name.to_string());
                continue;
            }
            match &current {
                Some(name) => sections.get_mut(name).expect("section exists").push(line),
                None => {
                    if let Some(v) = line.strip_prefix("@version ") {
                        version = Some(v.trim().to_string());
                    } else if !line.starts_with('#') && !line.trim().is_empty() {
                        return Err(EngineError::Template(format!("text outside a section: {line:?}")));
                    }
                }
            }
        }
        let version = version.ok_or_else(|| EngineError::Template("missing @version line".into()))?;
        for name in REQUIRED {
            if !sections.contains_key(name) {
                return Err(EngineError::Template(format!("missing section [{name}]")));
            }
        }
        Ok(PromptTemplate {
            version,
            sections: sections.into_iter().map(|(k, v)| (k, v.join("\n"))).collect(),
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    fn section(&self, name: &str) -> &str {
        &self.sections[name]
    }

    /// Prompt for `role` before `round`. The history must hold exactly
    /// `round - 1` rounds, so the current round's moves cannot leak in.
    /// Opponent reasoning is shown in `cot` mode only.
    #[allow(clippy::too_many_arguments)]
    pub fn render(
        &self,
        game: &Game,
        history: &JointHistory,
        reasoning: &[RoundReasoning],
        role: Player,
        mode: Mode,
        round: usize,
    ) -> Result<String, EngineError> {
        if round != history.len() + 1 {
            return Err(EngineError::Config(format!(
                "round {round} does not follow a history of {} rounds",
                history.len()
            )));
        }
        let mine = game.actions(role);
        let theirs = game.actions(role.other());
        let my_actions = format!("{} or {}", mine[0], mine[1]);
        let their_actions = format!("{} or {}", theirs[0], theirs[1]);

        let mut table = Vec::new();
        for (i, m) in mine.iter().enumerate() {
            for (j, t) in theirs.iter().enumerate() {
                let (a, b) = match role {
                    Player::A => (i, j),
                    Player::B => (j, i),
                };
                let mp = game.payoff(role, a, b).to_string();
                let tp = game.payoff(role.other(), a, b).to_string();
                table.push(fill(
                    self.section("payoff_row"),
                    &[("mine", m), ("theirs", t), ("mine_payoff", &mp), ("their_payoff", &tp)],
                ));
            }
        }
        let round_s = round.to_string();
        let mut text = fill(
            self.section("header"),
            &[
                ("role", role.label()),
                ("game", game.name()),
                ("my_actions", &my_actions),
                ("their_actions", &their_actions),
                ("payoff_table", &table.join("\n")),
                ("round", &round_s),
            ],
        );

        if !history.is_empty() {
            let mut rows = Vec::new();
            for (k, &(a, b)) in history.rounds.iter().enumerate() {
                let (m, t) = match role {
                    Player::A => (a, b),
                    Player::B => (b, a),
                };
                let n = (k + 1).to_string();
                rows.push(fill(
                    self.section("row"),
                    &[
                        ("n", &n),
                        ("mine", game.action_label(role, m)),
                        ("theirs", game.action_label(role.other(), t)),
                    ],
                ));
                if mode == Mode::Cot {
                    let opp = reasoning.get(k).and_then(|r| r.of(role.other()));
                    if let Some(r) = opp {
                        rows.push(fill(self.section("opponent_reasoning"), &[("reasoning", r)]));
                    }
                }
            }
            text.push('\n');
            text.push_str(&fill(self.section("history"), &[("rows", &rows.join("\n"))]));
        }
        text.push('\n');
        text.push_str(&fill(self.section(mode.id()), &[("my_actions", &my_actions)]));
        Ok(text)
    }

    /// The re-prompt sent after a reply with no recognisable action.
    pub fn render_strict(&self, base: &str, game: &Game, role: Player) -> String {
        let mine = game.actions(role);
        let my_actions = format!("{} or {}", mine[0], mine[1]);
        format!("{base}\n{}", fill(self.section("strict"), &[("my_actions", &my_actions)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_game;

    fn render(rounds: &[(usize, usize)], log: &[RoundReasoning], role: Player, mode: Mode) -> String {
        let g = make_game("pd").unwrap();
        let h = JointHistory::from_rounds(g.clone(), rounds).unwrap();
        PromptTemplate::builtin("v1")
            .unwrap()
            .render(&g, &h, log, role, mode, rounds.len() + 1)
            .unwrap()
    }

    #[test]
    fn first_round_has_no_history() {
        let text = render(&[], &[], Player::A, Mode::Direct);
        assert!(text.contains("Cooperate") && text.contains("Defect"));
        assert!(text.contains("Agent A"));
        assert!(!text.contains("History"));
        assert!(text.contains("action name only"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render(&[(0, 1)], &[], Player::B, Mode::Cot);
        let b = render(&[(0, 1)], &[], Player::B, Mode::Cot);
        assert_eq!(a, b);
    }

    #[test]
    fn history_is_from_the_role_perspective() {
        let text = render(&[(0, 1)], &[], Player::B, Mode::Direct);
        assert!(text.contains("Round 1: you played Defect, your opponent played Cooperate."));
        assert!(text.contains("you Defect, opponent Cooperate: you get 5, opponent gets 0"));
    }

    #[test]
    fn opponent_reasoning_only_in_cot() {
        let log = [RoundReasoning {
            a: Some("secret plan {round}".into()),
            b: None,
        }];
        let cot = render(&[(0, 0)], &log, Player::B, Mode::Cot);
        assert!(cot.contains("secret plan {round}"));
        let pad = render(&[(0, 0)], &log, Player::B, Mode::Scratchpad);
        assert!(!pad.contains("secret plan"));
        // A never sees its own reasoning echoed back as the opponent's.
        let own = render(&[(0, 0)], &log, Player::A, Mode::Cot);
        assert!(!own.contains("secret plan"));
    }

    #[test]
    fn round_must_follow_history() {
        let g = make_game("pd").unwrap();
        let h = JointHistory::new(g.clone());
        let t = PromptTemplate::builtin("v1").unwrap();
        assert!(t.render(&g, &h, &[], Player::A, Mode::Direct, 2).is_err());
    }

    #[test]
    fn template_errors() {
        assert!(PromptTemplate::builtin("v9").is_err());
        assert!(PromptTemplate::parse("[header]\nx").is_err());
        assert!(PromptTemplate::parse("@version t\n[header]\nx").is_err());
        assert_eq!(PromptTemplate::builtin("v1").unwrap().version(), "v1");
    }

    #[test]
    fn fill_leaves_unknown_fields() {
        assert_eq!(fill("{a}-{b}-{", &[("a", "{b}")]), "{b}-{b}-{");
    }
}
