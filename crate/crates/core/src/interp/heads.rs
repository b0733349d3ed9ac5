//! Opponent-tracking head scores and zero-ablation effects on P(Nash).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lens::action_distribution;
use super::InterpError;
use crate::model::{HeadId, HookPlan, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    pub head: HeadId,
    pub score: f64,
}

/// Mean attention weight from the decision position (the last token) to
/// opponent-action positions, averaged over prompts. Sorted by descending
/// score, ties by (layer, head).
pub fn score_opponent_heads(
    model: &Model,
    prompts: &[Vec<usize>],
    opponent_positions: &[Vec<usize>],
) -> Result<Vec<HeadScore>, InterpError> {
    if prompts.len() != opponent_positions.len() {
        return Err(InterpError::LengthMismatch {
            left: prompts.len(),
            right: opponent_positions.len(),
        });
    }
    if prompts.is_empty() {
        return Err(InterpError::Empty);
    }
    if let Some(i) = opponent_positions.iter().position(Vec::is_empty) {
        return Err(InterpError::NoOpponentPositions(i));
    }
    let per_prompt = prompts
        .par_iter()
        .zip(opponent_positions)
        .map(|(tokens, positions)| -> Result<Vec<f64>, InterpError> {
            let patterns = model.attention_weights(tokens)?;
            let last = tokens.len() - 1;
            let mut out = Vec::new();
            for layer in &patterns {
                for m in layer {
                    out.push(positions.iter().map(|&p| m.get(last, p)).sum());
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n_heads = model.spec.n_heads;
    let n = prompts.len() as f64;
    let mut scores: Vec<HeadScore> = (0..per_prompt[0].len())
        .map(|k| HeadScore {
            head: HeadId::new(k / n_heads + 1, k % n_heads),
            score: per_prompt.iter().map(|v| v[k]).sum::<f64>() / n,
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.head.cmp(&b.head)));
    Ok(scores)
}

/// The first `k` heads of a ranking.
pub fn top_heads(scores: &[HeadScore], k: usize) -> Vec<HeadId> {
    scores.iter().take(k).map(|s| s.head).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `L{l}H{h}` for single heads, `joint` for all heads together.
    pub condition: String,
    pub heads: Vec<HeadId>,
    pub p_nash: f64,
    pub delta_p_nash: f64,
    /// ΔP(Nash) per prompt, in prompt order.
    pub per_prompt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub baseline_p_nash: f64,
    pub rows: Vec<AblationRow>,
}

fn p_nash(
    model: &Model,
    prompts: &[Vec<usize>],
    plan: &HookPlan,
    action_ids: [usize; 2],
    nash_action: usize,
) -> Result<Vec<f64>, InterpError> {
    prompts
        .par_iter()
        .map(|t| {
            let out = model.forward(t, plan)?;
            let h = out.trace.layers.last().expect("at least h_0");
            Ok(action_distribution(h, &model.unembed, action_ids, 1.0)[nash_action])
        })
        .collect()
}

/// ΔP(Nash) = mean P(Nash | ablated) − mean P(Nash | baseline), read from the
/// final-layer lens, for each head alone and for all heads jointly. An empty
/// head list yields a single `joint` row with ΔP = 0.
pub fn ablation_experiment(
    model: &Model,
    heads: &[HeadId],
    prompts: &[Vec<usize>],
    action_ids: [usize; 2],
    nash_action: usize,
) -> Result<AblationTable, InterpError> {
    if prompts.is_empty() {
        return Err(InterpError::Empty);
    }
    model.zero_ablate(heads)?;
    let base = p_nash(model, prompts, &HookPlan::default(), action_ids, nash_action)?;
    let base_mean = super::stats::mean(&base);
    let row = |condition: String, hs: Vec<HeadId>| -> Result<AblationRow, InterpError> {
        let plan = HookPlan::new().ablate(hs.iter().copied());
        let p = p_nash(model, prompts, &plan, action_ids, nash_action)?;
        let per_prompt = p.iter().zip(&base).map(|(a, b)| a - b).collect();
        let mean = super::stats::mean(&p);
        Ok(AblationRow {
            condition,
            heads: hs,
            p_nash: mean,
            delta_p_nash: mean - base_mean,
            per_prompt,
        })
    };
    let mut rows = Vec::new();
    for &h in heads {
        rows.push(row(h.to_string(), vec![h])?);
    }
    rows.push(row("joint".into(), heads.to_vec())?);
    Ok(AblationTable {
        baseline_p_nash: base_mean,
        rows,
    })
}
