#![allow(dead_code)]

pub mod planted;
pub mod wire;

use equilens::agents::{AgentSpec, ScriptedKind};
use equilens::engine::{run_match, MatchConfig, MatchRecord, PromptTemplate};
use equilens::game::{enumerate_equilibria, Game};
use equilens::agents::Mode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID_STEP: f64 = 1e-3;

fn labels(a: &str, b: &str) -> [String; 2] {
    [a.to_string(), b.to_string()]
}

/// Nondegenerate random games with integer payoffs in -5..=5.
pub fn random_games(n: usize, seed: u64) -> Vec<Game> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut cell = || (rng.random_range(-5..=5) as f64, rng.random_range(-5..=5) as f64);
        let table = vec![vec![cell(), cell()], vec![cell(), cell()]];
        let g = Game::custom(format!("rand{}", out.len()), labels("X", "Y"), labels("U", "V"), &table).unwrap();
        if !g.is_degenerate() {
            out.push(g);
        }
    }
    out
}

/// Largest pure-deviation gain at the profile where A plays action 0 with
/// probability `p` and B with probability `q`.
fn gain(g: &Game, p: f64, q: f64) -> f64 {
    let m = g.payoffs();
    let va0 = q * m[0][0].0 + (1.0 - q) * m[0][1].0;
    let va1 = q * m[1][0].0 + (1.0 - q) * m[1][1].0;
    let vb0 = p * m[0][0].1 + (1.0 - p) * m[1][0].1;
    let vb1 = p * m[0][1].1 + (1.0 - p) * m[1][1].1;
    let ga = va0.max(va1) - (p * va0 + (1.0 - p) * va1);
    let gb = vb0.max(vb1) - (q * vb0 + (1.0 - q) * vb1);
    ga.max(gb)
}

/// Grid points whose deviation gain is below the grid resolution times the
/// payoff scale.
pub fn grid_equilibria(g: &Game) -> Vec<(f64, f64)> {
    let scale = g
        .payoffs()
        .iter()
        .flatten()
        .flat_map(|&(a, b)| [a.abs(), b.abs()])
        .fold(1.0f64, f64::max);
    let tol = 2.0 * GRID_STEP * scale;
    let n = (1.0 / GRID_STEP).round() as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        let p = i as f64 * GRID_STEP;
        for j in 0..=n {
            let q = j as f64 * GRID_STEP;
            if gain(g, p, q) <= tol {
                out.push((p, q));
            }
        }
    }
    out
}

/// Checks enumeration against the grid oracle in both directions: every
/// enumerated profile has a grid ε-equilibrium next to it, and every grid
/// ε-equilibrium lies close to an enumerated profile.
pub fn oracle_agrees(g: &Game) -> Result<(), String> {
    let eqs = enumerate_equilibria(g);
    let exact: Vec<(f64, f64)> = eqs
        .profiles
        .iter()
        .map(|e| (e.strat_a.probs[0], e.strat_b.probs[0]))
        .collect();
    let grid = grid_equilibria(g);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs().max((a.1 - b.1).abs());
    for &e in &exact {
        if !grid.iter().any(|&x| dist(x, e) <= 2.0 * GRID_STEP) {
            return Err(format!("{}: enumerated {e:?} has no grid witness", g.name()));
        }
    }
    for &x in &grid {
        if !exact.iter().any(|&e| dist(x, e) <= 0.05) {
            return Err(format!("{}: grid point {x:?} far from every enumerated profile {exact:?}", g.name()));
        }
    }
    Ok(())
}

pub fn scripted(id: &str, kind: ScriptedKind) -> AgentSpec {
    AgentSpec::scripted(id, kind)
}

/// Plays a scripted match with the builtin template.
pub fn play(game: Game, a: ScriptedKind, b: ScriptedKind, rounds: usize, seed: u64) -> MatchRecord {
    let mut aa = scripted("a", a).build().unwrap();
    let mut bb = scripted("b", b).build().unwrap();
    let cfg = MatchConfig::new(game, Mode::Direct, seed, "a", "b").with_rounds(rounds);
    let template = PromptTemplate::builtin("v1").unwrap();
    run_match(aa.as_mut(), bb.as_mut(), &cfg, &template).unwrap()
}
