//! Two-player 2×2 games, exact equilibrium enumeration and the Nash-distance
//! metric.
//!
//! Payoffs are indexed `payoffs[i][j] = (u_A, u_B)` where player A (the row
//! player) picks action `i` and player B (the column player) picks action `j`.
//! By convention action 0 is the "cooperative" option of every canonical game
//! (Cooperate, Opera, Stag, Heads).
//!
//! Nash distance after `t` rounds is the Euclidean norm of the concatenated
//! 4-vector `(μ̂_A − σ*_A, μ̂_B − σ*_B)`, minimised over the equilibrium set.
//! Strategies enter as their full per-action probability vectors, so in the
//! Prisoner's Dilemma universal cooperation sits at distance 2 from (D, D).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on probability sums and equilibrium verification.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("unknown game '{0}' (expected one of pd, bos, sh, mp)")]
    UnknownGame(String),
    #[error("payoff table must be 2x2, got {rows} rows with column counts {cols:?}")]
    NotTwoByTwo { rows: usize, cols: Vec<usize> },
    #[error("each player needs exactly 2 actions, got {a} for A and {b} for B")]
    ActionCount { a: usize, b: usize },
    #[error("payoff at ({row}, {col}) is not finite")]
    NonFinitePayoff { row: usize, col: usize },
    #[error("invalid mixed strategy {0:?}: entries must lie in [0, 1] and sum to 1")]
    InvalidStrategy(Vec<f64>),
    #[error("history is empty")]
    EmptyHistory,
    #[error("equilibrium set is empty")]
    NoEquilibria,
    #[error("history is for game '{history}' but equilibria are for game '{equilibria}'")]
    GameMismatch { history: String, equilibria: String },
    #[error("action index ({a}, {b}) out of range")]
    InvalidAction { a: usize, b: usize },
    #[error("history already holds {0} rounds, the configured horizon")]
    HorizonExceeded(usize),
    #[error("failed to parse game definition: {0}")]
    Parse(String),
}

/// One of the two seats at the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Player::A => "A",
            Player::B => "B",
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The four built-in games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonicalGame {
    Pd,
    Bos,
    Sh,
    Mp,
}

impl CanonicalGame {
    pub const ALL: [CanonicalGame; 4] = [
        CanonicalGame::Pd,
        CanonicalGame::Bos,
        CanonicalGame::Sh,
        CanonicalGame::Mp,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CanonicalGame::Pd => "pd",
            CanonicalGame::Bos => "bos",
            CanonicalGame::Sh => "sh",
            CanonicalGame::Mp => "mp",
        }
    }
}

impl FromStr for CanonicalGame {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pd" => Ok(CanonicalGame::Pd),
            "bos" => Ok(CanonicalGame::Bos),
            "sh" => Ok(CanonicalGame::Sh),
            "mp" => Ok(CanonicalGame::Mp),
            _ => Err(GameError::UnknownGame(s.to_string())),
        }
    }
}

/// A two-player bimatrix game with two named actions per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDef", into = "GameDef")]
pub struct Game {
    name: String,
    actions_a: [String; 2],
    actions_b: [String; 2],
    payoffs: [[(f64, f64); 2]; 2],
}

/// Serialized form of a game: `{name, actions_a, actions_b, payoffs}` with
/// `payoffs[i][j] = [pa, pb]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDef {
    pub name: String,
    pub actions_a: Vec<String>,
    pub actions_b: Vec<String>,
    pub payoffs: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<GameDef> for Game {
    type Error = GameError;

    fn try_from(def: GameDef) -> Result<Self, Self::Error> {
        if def.actions_a.len() != 2 || def.actions_b.len() != 2 {
            return Err(GameError::ActionCount {
                a: def.actions_a.len(),
                b: def.actions_b.len(),
            });
        }
        let table: Vec<Vec<(f64, f64)>> = def
            .payoffs
            .iter()
            .map(|row| row.iter().map(|p| (p[0], p[1])).collect())
            .collect();
        Game::custom(
            def.name,
            [def.actions_a[0].clone(), def.actions_a[1].clone()],
            [def.actions_b[0].clone(), def.actions_b[1].clone()],
            &table,
        )
    }
}

impl From<Game> for GameDef {
    fn from(g: Game) -> Self {
        GameDef {
            name: g.name,
            actions_a: g.actions_a.to_vec(),
            actions_b: g.actions_b.to_vec(),
            payoffs: g
                .payoffs
                .iter()
                .map(|row| row.iter().map(|&(a, b)| [a, b]).collect())
                .collect(),
        }
    }
}

/// Builds one of the canonical games by id (`pd`, `bos`, `sh`, `mp`).
pub fn make_game(name: &str) -> Result<Game, GameError> {
    Ok(Game::canonical(name.parse()?))
}

fn labels(a: &str, b: &str) -> [String; 2] {
    [a.to_string(), b.to_string()]
}

impl Game {
    pub fn canonical(id: CanonicalGame) -> Game {
        match id {
            CanonicalGame::Pd => Game {
                name: "pd".into(),
                actions_a: labels("Cooperate", "Defect"),
                actions_b: labels("Cooperate", "Defect"),
                payoffs: [[(3.0, 3.0), (0.0, 5.0)], [(5.0, 0.0), (1.0, 1.0)]],
            },
            CanonicalGame::Bos => Game {
                name: "bos".into(),
                actions_a: labels("Opera", "Football"),
                actions_b: labels("Opera", "Football"),
                payoffs: [[(2.0, 1.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 2.0)]],
            },
            CanonicalGame::Sh => Game {
                name: "sh".into(),
                actions_a: labels("Stag", "Hare"),
                actions_b: labels("Stag", "Hare"),
                payoffs: [[(4.0, 4.0), (0.0, 3.0)], [(3.0, 0.0), (3.0, 3.0)]],
            },
            // Player A is the matcher, player B the mismatcher.
            CanonicalGame::Mp => Game {
                name: "mp".into(),
                actions_a: labels("Heads", "Tails"),
                actions_b: labels("Heads", "Tails"),
                payoffs: [[(1.0, -1.0), (-1.0, 1.0)], [(-1.0, 1.0), (1.0, -1.0)]],
            },
        }
    }

    /// Builds a game from an arbitrary payoff table, which must be 2×2 and
    /// finite.
    pub fn custom(
        name: impl Into<String>,
        actions_a: [String; 2],
        actions_b: [String; 2],
        table: &[Vec<(f64, f64)>],
    ) -> Result<Game, GameError> {
        if table.len() != 2 || table.iter().any(|row| row.len() != 2) {
            return Err(GameError::NotTwoByTwo {
                rows: table.len(),
                cols: table.iter().map(Vec::len).collect(),
            });
        }
        let mut payoffs = [[(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let (pa, pb) = table[i][j];
                if !pa.is_finite() || !pb.is_finite() {
                    return Err(GameError::NonFinitePayoff { row: i, col: j });
                }
                payoffs[i][j] = (pa, pb);
            }
        }
        Ok(Game {
            name: name.into(),
            actions_a,
            actions_b,
            payoffs,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Game, GameError> {
        serde_json::from_str(s).map_err(|e| GameError::Parse(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Game, GameError> {
        toml::from_str(s).map_err(|e| GameError::Parse(e.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn actions(&self, player: Player) -> &[String; 2] {
        match player {
            Player::A => &self.actions_a,
            Player::B => &self.actions_b,
        }
    }

    pub fn action_label(&self, player: Player, index: usize) -> &str {
        &self.actions(player)[index]
    }

    pub fn payoffs(&self) -> &[[(f64, f64); 2]; 2] {
        &self.payoffs
    }

    /// Payoff to `player` when A plays `a` and B plays `b`.
    pub fn payoff(&self, player: Player, a: usize, b: usize) -> f64 {
        let (pa, pb) = self.payoffs[a][b];
        match player {
            Player::A => pa,
            Player::B => pb,
        }
    }

    /// Expected payoff to `player` under a mixed profile.
    pub fn expected_payoff(&self, player: Player, sa: &MixedStrategy, sb: &MixedStrategy) -> f64 {
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                total += sa.probs[a] * sb.probs[b] * self.payoff(player, a, b);
            }
        }
        total
    }

    /// Expected payoff of each pure action of `player` against the opponent's
    /// mixed strategy.
    pub fn action_values(&self, player: Player, opponent: &MixedStrategy) -> [f64; 2] {
        let mut values = [0.0; 2];
        for (own, value) in values.iter_mut().enumerate() {
            for other in 0..2 {
                let (a, b) = match player {
                    Player::A => (own, other),
                    Player::B => (other, own),
                };
                *value += opponent.probs[other] * self.payoff(player, a, b);
            }
        }
        values
    }

    /// True when some player is indifferent between its two actions against a
    /// pure action of the opponent. Such games can have continua of
    /// equilibria.
    pub fn is_degenerate(&self) -> bool {
        let p = &self.payoffs;
        p[0][0].0 == p[1][0].0
            || p[0][1].0 == p[1][1].0
            || p[0][0].1 == p[0][1].1
            || p[1][0].1 == p[1][1].1
    }

    /// The Nash action of `player` when the game has a unique, pure
    /// equilibrium.
    pub fn nash_action(&self, player: Player) -> Option<usize> {
        let eqs = enumerate_equilibria(self);
        match eqs.profiles.as_slice() {
            [only] if only.kind == EquilibriumKind::Pure => {
                let s = match player {
                    Player::A => &only.strat_a,
                    Player::B => &only.strat_b,
                };
                s.support_index()
            }
            _ => None,
        }
    }

    /// Index of an action label, matched case-insensitively.
    pub fn action_index(&self, player: Player, label: &str) -> Option<usize> {
        self.actions(player)
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
    }
}

/// A probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        let in_range = probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p));
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || !in_range || (sum - 1.0).abs() > PROB_TOL {
            return Err(GameError::InvalidStrategy(probs));
        }
        Ok(MixedStrategy { probs })
    }

    pub fn pure(index: usize, n: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        MixedStrategy { probs }
    }

    /// The action played with certainty, if any.
    pub fn support_index(&self) -> Option<usize> {
        self.probs.iter().position(|&p| p == 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub strat_a: MixedStrategy,
    pub strat_b: MixedStrategy,
    pub kind: EquilibriumKind,
}

impl EquilibriumProfile {
    pub fn strategy(&self, player: Player) -> &MixedStrategy {
        match player {
            Player::A => &self.strat_a,
            Player::B => &self.strat_b,
        }
    }
}

/// The equilibrium set of a game, in deterministic order: pure profiles
/// row-major, then the fully mixed profile if one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibria {
    pub game: Game,
    pub profiles: Vec<EquilibriumProfile>,
    /// Set when the game has payoff ties. Profiles then list representative
    /// vertices of possibly continuous equilibrium components.
    pub degenerate: bool,
}

impl Equilibria {
    /// Drops the mixed profile, unless it is the only equilibrium.
    pub fn pure_only(&self) -> Equilibria {
        let pure: Vec<_> = self
            .profiles
            .iter()
            .filter(|p| p.kind == EquilibriumKind::Pure)
            .cloned()
            .collect();
        Equilibria {
            game: self.game.clone(),
            profiles: if pure.is_empty() { self.profiles.clone() } else { pure },
            degenerate: self.degenerate,
        }
    }

    /// Selects the full set or the pure-only set.
    pub fn with_mixed(self, include_mixed: bool) -> Equilibria {
        if include_mixed {
            self
        } else {
            self.pure_only()
        }
    }
}

/// Largest gain any player gets from a unilateral deviation to a pure action.
/// Payoffs are linear in the deviator's own mixture, so pure deviations
/// bound all deviations.
pub fn deviation_gain(game: &Game, profile: &EquilibriumProfile) -> f64 {
    let ua = game.expected_payoff(Player::A, &profile.strat_a, &profile.strat_b);
    let ub = game.expected_payoff(Player::B, &profile.strat_a, &profile.strat_b);
    let va = game.action_values(Player::A, &profile.strat_b);
    let vb = game.action_values(Player::B, &profile.strat_a);
    let best_a = va[0].max(va[1]);
    let best_b = vb[0].max(vb[1]);
    (best_a - ua).max(best_b - ub)
}

/// Enumerates the equilibria of a 2×2 game exactly.
///
/// Pure equilibria are the cells where both actions are (weak) best responses.
/// The fully mixed equilibrium comes from the two indifference conditions and
/// is reported when both solutions lie in the open interval (0, 1).
pub fn enumerate_equilibria(game: &Game) -> Equilibria {
    let p = &game.payoffs;
    let mut profiles = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let a_best = p[i][j].0 >= p[1 - i][j].0;
            let b_best = p[i][j].1 >= p[i][1 - j].1;
            if a_best && b_best {
                profiles.push(EquilibriumProfile {
                    strat_a: MixedStrategy::pure(i, 2),
                    strat_b: MixedStrategy::pure(j, 2),
                    kind: EquilibriumKind::Pure,
                });
            }
        }
    }

    // A mixes with weight x on action 0 so that B is indifferent.
    let b_denom = (p[0][0].1 - p[0][1].1) - (p[1][0].1 - p[1][1].1);
    // B mixes with weight y on action 0 so that A is indifferent.
    let a_denom = (p[0][0].0 - p[1][0].0) - (p[0][1].0 - p[1][1].0);
    if b_denom != 0.0 && a_denom != 0.0 {
        let x = (p[1][1].1 - p[1][0].1) / b_denom;
        let y = (p[1][1].0 - p[0][1].0) / a_denom;
        if x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0 {
            profiles.push(EquilibriumProfile {
                strat_a: MixedStrategy { probs: vec![x, 1.0 - x] },
                strat_b: MixedStrategy { probs: vec![y, 1.0 - y] },
                kind: EquilibriumKind::Mixed,
            });
        }
    }

    Equilibria {
        game: game.clone(),
        profiles,
        degenerate: game.is_degenerate(),
    }
}

/// Ordered record of joint actions for one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointHistory {
    pub game: Game,
    pub rounds: Vec<(usize, usize)>,
    pub horizon: Option<usize>,
}

impl JointHistory {
    pub fn new(game: Game) -> Self {
        JointHistory {
            game,
            rounds: Vec::new(),
            horizon: None,
        }
    }

    pub fn with_horizon(game: Game, horizon: usize) -> Self {
        JointHistory {
            game,
            rounds: Vec::new(),
            horizon: Some(horizon),
        }
    }

    pub fn from_rounds(game: Game, rounds: &[(usize, usize)]) -> Result<Self, GameError> {
        let mut h = JointHistory::new(game);
        for &(a, b) in rounds {
            h.push(a, b)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, a: usize, b: usize) -> Result<(), GameError> {
        if a > 1 || b > 1 {
            return Err(GameError::InvalidAction { a, b });
        }
        if let Some(h) = self.horizon {
            if self.rounds.len() >= h {
                return Err(GameError::HorizonExceeded(h));
            }
        }
        self.rounds.push((a, b));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Actions of one player, in round order.
    pub fn actions_of(&self, player: Player) -> impl Iterator<Item = usize> + '_ {
        self.rounds.iter().map(move |&(a, b)| match player {
            Player::A => a,
            Player::B => b,
        })
    }

    pub fn prefix(&self, t: usize) -> JointHistory {
        JointHistory {
            game: self.game.clone(),
            rounds: self.rounds[..t].to_vec(),
            horizon: self.horizon,
        }
    }
}

fn strategy_from_counts(counts: [u64; 2]) -> MixedStrategy {
    let t = counts[0] + counts[1];
    let first = counts[0] as f64 / t as f64;
    // The complement is taken from the counts as well; both divisions are
    // correctly rounded, so the pair sums to 1 up to one ulp.
    let second = counts[1] as f64 / t as f64;
    MixedStrategy { probs: vec![first, second] }
}

/// Empirical mixed strategy: `probs[k] = count(k) / t`.
pub fn empirical_mixed_strategy(
    history: &JointHistory,
    player: Player,
) -> Result<MixedStrategy, GameError> {
    if history.is_empty() {
        return Err(GameError::EmptyHistory);
    }
    let mut counts = [0u64; 2];
    for k in history.actions_of(player) {
        counts[k] += 1;
    }
    Ok(strategy_from_counts(counts))
}

/// Distance from an empirical profile to the closest equilibrium, and the
/// index of that equilibrium (first in order on ties).
pub fn distance_to_equilibria(
    mu_a: &MixedStrategy,
    mu_b: &MixedStrategy,
    equilibria: &Equilibria,
) -> Result<(f64, usize), GameError> {
    let mut best: Option<(f64, usize)> = None;
    for (idx, eq) in equilibria.profiles.iter().enumerate() {
        let sq: f64 = mu_a
            .probs
            .iter()
            .zip(&eq.strat_a.probs)
            .chain(mu_b.probs.iter().zip(&eq.strat_b.probs))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let d = sq.sqrt();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, idx));
        }
    }
    best.ok_or(GameError::NoEquilibria)
}

fn check_same_game(history: &JointHistory, equilibria: &Equilibria) -> Result<(), GameError> {
    if history.game != equilibria.game {
        return Err(GameError::GameMismatch {
            history: history.game.name.clone(),
            equilibria: equilibria.game.name.clone(),
        });
    }
    Ok(())
}

/// Nash distance of the whole history.
pub fn nash_distance(history: &JointHistory, equilibria: &Equilibria) -> Result<f64, GameError> {
    check_same_game(history, equilibria)?;
    let mu_a = empirical_mixed_strategy(history, Player::A)?;
    let mu_b = empirical_mixed_strategy(history, Player::B)?;
    distance_to_equilibria(&mu_a, &mu_b, equilibria).map(|(d, _)| d)
}

/// Nash distance after every prefix: element `t - 1` covers rounds `1..=t`.
pub fn nash_distance_series(
    history: &JointHistory,
    equilibria: &Equilibria,
) -> Result<Vec<f64>, GameError> {
    check_same_game(history, equilibria)?;
    if history.is_empty() {
        return Err(GameError::EmptyHistory);
    }
    let mut tracker = DistanceTracker::new(equilibria.clone())?;
    history
        .rounds
        .iter()
        .map(|&(a, b)| tracker.push(a, b))
        .collect()
}

/// Incremental Nash distance over a growing history.
#[derive(Debug, Clone)]
pub struct DistanceTracker {
    equilibria: Equilibria,
    counts_a: [u64; 2],
    counts_b: [u64; 2],
}

impl DistanceTracker {
    pub fn new(equilibria: Equilibria) -> Result<Self, GameError> {
        if equilibria.profiles.is_empty() {
            return Err(GameError::NoEquilibria);
        }
        Ok(DistanceTracker {
            equilibria,
            counts_a: [0; 2],
            counts_b: [0; 2],
        })
    }

    /// Records one round and returns the distance of the updated prefix.
    pub fn push(&mut self, a: usize, b: usize) -> Result<f64, GameError> {
        if a > 1 || b > 1 {
            return Err(GameError::InvalidAction { a, b });
        }
        self.counts_a[a] += 1;
        self.counts_b[b] += 1;
        let mu_a = strategy_from_counts(self.counts_a);
        let mu_b = strategy_from_counts(self.counts_b);
        distance_to_equilibria(&mu_a, &mu_b, &self.equilibria).map(|(d, _)| d)
    }
}
