//! Planted-circuit fixtures and the measurements the interp suites check.

use equilens::game::{make_game, Game, Player};
use equilens::interp::sweep::{default_alpha_grid, default_clamp_grid, projection};
use equilens::interp::{
    ablation_experiment, clamp_sweep, collect_all, contrast_prompts, extract_direction, find_override_layer,
    logit_lens, probe_layers, random_prompts, score_opponent_heads, steering_sweep, top_heads, AblationTable,
    DirectionMethod, LensSeries, PositionRule, ProbeLabel, ProbeReport, SteeringVector, SweepResult,
};
use equilens::model::{build_synthetic_circuit, HookPlan, Model, ModelSpec, SyntheticCircuitConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const L_STAR: usize = 2;
pub const STEER_LAYERS: [usize; 3] = [0, 1, 2];
pub const STEER_TEMPERATURE: f64 = 0.7;
pub const CONTRAST_LEN: usize = 6;
/// Decision points of a 50-round match.
pub const PROBE_LENGTHS: std::ops::RangeInclusive<usize> = 1..=49;

pub fn pd() -> Game {
    make_game("pd").unwrap()
}

pub fn model(cfg: &SyntheticCircuitConfig, seed: u64) -> Model {
    build_synthetic_circuit(&ModelSpec::default(), cfg, seed).unwrap()
}

pub fn action_ids(m: &Model) -> [usize; 2] {
    m.tokenizer().action_ids(&pd(), Player::A).unwrap()
}

/// Token sequences of random PD transcripts.
pub fn prompts(m: &Model, n: usize, seed: u64) -> Vec<Vec<usize>> {
    random_prompts(&m.tokenizer(), &pd(), Player::A, n, 1..=20, seed)
        .unwrap()
        .into_iter()
        .map(|p| p.tokens)
        .collect()
}

pub struct ProbeSuite {
    pub real: ProbeReport,
    pub shuffled: ProbeReport,
}

/// Opponent-move probes on the consumption fixture (attenuation 0.5,
/// noise 0.3), plus the same traces with shuffled labels.
pub fn probe_suite(n: usize, seed: u64) -> ProbeSuite {
    let cfg = SyntheticCircuitConfig {
        attenuation: 0.5,
        noise_scale: 0.3,
        ..Default::default()
    };
    let m = model(&cfg, seed);
    let items = random_prompts(&m.tokenizer(), &pd(), Player::A, n, PROBE_LENGTHS, seed ^ 0x5eed).unwrap();
    let traces = collect_all(&m, &items, PositionRule::Decision).unwrap();
    let y: Vec<u8> = items.iter().map(|p| p.opp_last_move().unwrap()).collect();
    let real = probe_layers(&traces, &y, ProbeLabel::OppLastMove, 5, seed).unwrap();
    let mut ys = y;
    ys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
    let shuffled = probe_layers(&traces, &ys, ProbeLabel::OppLastMove, 5, seed).unwrap();
    ProbeSuite { real, shuffled }
}

/// Mean lens series over random prompts.
pub fn mean_lens(m: &Model, n: usize, seed: u64) -> LensSeries {
    let items = random_prompts(&m.tokenizer(), &pd(), Player::A, n, 1..=20, seed).unwrap();
    let ids = action_ids(m);
    let series: Vec<LensSeries> = collect_all(m, &items, PositionRule::Decision)
        .unwrap()
        .iter()
        .map(|t| logit_lens(t, &m.unembed, ids))
        .collect();
    LensSeries::mean(&series).unwrap()
}

/// Seeds in `seeds` on which the detected override layer equals the planted
/// one.
pub fn override_hits(noise_scale: f64, seeds: std::ops::Range<u64>) -> usize {
    let cfg = SyntheticCircuitConfig {
        noise_scale,
        ..Default::default()
    };
    seeds
        .filter(|&s| {
            let m = model(&cfg, s);
            find_override_layer(&mean_lens(&m, 20, s), 1) == Some(cfg.override_layer)
        })
        .count()
}

/// Top-5 opponent heads and their ablation table.
pub fn ablation(cfg: &SyntheticCircuitConfig, seed: u64) -> AblationTable {
    let m = model(cfg, seed);
    let ps = prompts(&m, 60, seed + 100);
    let tok = m.tokenizer();
    let positions: Vec<Vec<usize>> = ps.iter().map(|t| tok.opponent_positions(t)).collect();
    let heads = top_heads(&score_opponent_heads(&m, &ps, &positions).unwrap(), 5);
    ablation_experiment(&m, &heads, &ps, action_ids(&m), 1).unwrap()
}

pub fn directions(m: &Model, n: usize, seed: u64) -> Vec<SteeringVector> {
    let (c, d) = contrast_prompts(&m.tokenizer(), &pd(), Player::A, n, CONTRAST_LEN, seed).unwrap();
    let tc = collect_all(m, &c, PositionRule::Decision).unwrap();
    let td = collect_all(m, &d, PositionRule::Decision).unwrap();
    DirectionMethod::ALL
        .iter()
        .map(|&method| extract_direction(&tc, &td, L_STAR, method).unwrap())
        .collect()
}

/// Smallest pairwise |cosine| among the three methods.
pub fn min_pairwise_cosine(vs: &[SteeringVector]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            min = min.min(vs[i].cosine(&vs[j].direction).abs());
        }
    }
    min
}

pub struct SteeringSuite {
    pub sweep: SweepResult,
    /// Whether α = 0 reproduced the unhooked final state bitwise on every
    /// prompt.
    pub zero_is_baseline: bool,
}

pub fn steering(seed: u64) -> SteeringSuite {
    let m = model(&SyntheticCircuitConfig::default(), seed);
    let v = directions(&m, 100, seed + 1).remove(0);
    let ps = prompts(&m, 100, seed + 2);
    let sweep = steering_sweep(
        &m,
        &v.direction,
        &STEER_LAYERS,
        &default_alpha_grid(),
        &ps,
        STEER_TEMPERATURE,
        action_ids(&m),
        1,
    )
    .unwrap();
    let zero = STEER_LAYERS
        .iter()
        .fold(HookPlan::new(), |p, &l| p.inject(l, v.direction.clone(), 0.0));
    let zero_is_baseline = ps.iter().all(|t| {
        let a = m.forward(t, &HookPlan::default()).unwrap();
        let b = m.forward(t, &zero).unwrap();
        a.trace.layers == b.trace.layers && a.logits == b.logits
    });
    SteeringSuite { sweep, zero_is_baseline }
}

pub struct ClampSuite {
    pub sweep: SweepResult,
    /// Largest output change when every prompt is clamped to its own
    /// projection.
    pub identity_max_change: f64,
}

pub fn clamp(seed: u64) -> ClampSuite {
    let m = model(&SyntheticCircuitConfig::default(), seed);
    let v = directions(&m, 100, seed + 1).remove(0);
    let ps = prompts(&m, 100, seed + 2);
    let sweep = clamp_sweep(&m, &v.direction, L_STAR, &default_clamp_grid(), &ps, 1.0, action_ids(&m), 1).unwrap();
    let mut identity_max_change = 0.0f64;
    for t in &ps {
        let base = m.forward(t, &HookPlan::default()).unwrap();
        let c = projection(&base.trace.layers[L_STAR], &v.direction);
        let out = m.forward(t, &HookPlan::new().clamp(L_STAR, v.direction.clone(), c)).unwrap();
        for (x, y) in base.logits.iter().zip(&out.logits) {
            identity_max_change = identity_max_change.max((x - y).abs());
        }
    }
    ClampSuite {
        sweep,
        identity_max_change,
    }
}
