//! Planted circuits: hand-set weights that reproduce, with known ground truth,
//! the opponent-encoding, consumption and late-override phenomena.
//!
//! Residual layout (width `d`):
//!
//! | axis            | content                                                  |
//! |-----------------|----------------------------------------------------------|
//! | `d - 1` carrier | constant `CARRIER` at every position                     |
//! | `d - 2` marker  | 1 on joint-outcome tokens (opponent-action positions)    |
//! | `d - 3` self    | ±1: the agent's own move in that round                   |
//! | `opp_axis`      | ±1: opponent move (+1 = action 1, the non-cooperative one)|
//! | `coop_axis`     | cooperative drive read by the unembedding                |
//! | the rest        | random positional features                               |
//!
//! The carrier dominates the RMS of every state, so each RMS norm divides by
//! (very nearly) the same constant and the planted blocks act linearly on the
//! small axes. Mechanisms per block `l`:
//!
//! * MLP: multiplies the opp axis by `attenuation`; adds `override_strength`
//!   to the coop axis when `l ≥ override_layer` (distributed site); subtracts
//!   `final_correction` in the last block.
//! * Block 1, head 0: uniform attention over the context writing
//!   `-history_gain · mean(opp)` to the coop axis.
//! * Head 1 in blocks `2..`: opponent trackers with zero output projection.
//! * Head 0 (blocks ≥ 2) and head 2: noise heads with random positional
//!   attention that copy `noise_scale · self` onto the coop and opp axes.
//! * Head 3 of `override_layer` (head site only): a copy head attending to
//!   opponent positions that writes the whole override in one step.
//!
//! Positional embeddings carry `-nash_prior` on the coop axis. The
//! unembedding maps the coop axis to `±readout_gain / 2` on action-0 and
//! action-1 tokens, so the action logit gap is `readout_gain · h[coop]`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{HeadId, LayerWeights, Model, ModelError, ModelSpec, Tokenizer};
use crate::game::{CanonicalGame, Game, Player};

/// Constant written on the carrier axis.
pub const CARRIER: f64 = 1.0e4;
const TRACKER_SHARPNESS: f64 = 8.0;
const COPY_SHARPNESS: f64 = 12.0;
const NOISE_SHARPNESS: f64 = 2.0;

/// Where the cooperative override is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideSite {
    /// Spread over the MLPs of every block from the override layer on.
    Distributed,
    /// Concentrated in a single attention head (a localized control).
    Head,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCircuitConfig {
    pub opp_axis: usize,
    pub coop_axis: usize,
    /// Per-block decay of the opp-axis content, in (0, 1].
    pub attenuation: f64,
    pub override_layer: usize,
    pub override_strength: f64,
    /// Subtracted from the coop axis in the final block; 0 disables it.
    pub final_correction: f64,
    pub noise_scale: f64,
    /// Baseline lean toward the non-cooperative action.
    pub nash_prior: f64,
    /// Weight of the opponent-history mean on the coop axis.
    pub history_gain: f64,
    /// Logit gap per unit of coop-axis content.
    pub readout_gain: f64,
    pub override_site: OverrideSite,
    /// Number of zero-output opponent-tracking heads.
    pub tracking_heads: usize,
}

impl Default for SyntheticCircuitConfig {
    fn default() -> Self {
        SyntheticCircuitConfig {
            opp_axis: 0,
            coop_axis: 1,
            attenuation: 0.7,
            override_layer: 5,
            override_strength: 12.0,
            final_correction: 48.0,
            noise_scale: 0.05,
            nash_prior: 6.0,
            history_gain: 2.0,
            readout_gain: 0.08,
            override_site: OverrideSite::Distributed,
            tracking_heads: 6,
        }
    }
}

impl SyntheticCircuitConfig {
    /// Late override with a partial correction in the final block.
    pub fn instruct_like() -> Self {
        Self::default()
    }

    /// Earlier override and no final correction: the output stays
    /// cooperative.
    pub fn base_like() -> Self {
        SyntheticCircuitConfig {
            override_layer: 3,
            final_correction: 0.0,
            ..Self::default()
        }
    }

    /// Same behaviour as the default, but the override lives in one head.
    pub fn localized() -> Self {
        SyntheticCircuitConfig {
            override_site: OverrideSite::Head,
            ..Self::default()
        }
    }

    /// Resolves the axis and head assignment for a model shape.
    pub fn layout(&self, spec: &ModelSpec) -> Result<PlantedLayout, ModelError> {
        spec.validate()?;
        let d = spec.d_model;
        let l = spec.n_layers;
        if d < 8 {
            return Err(ModelError::InvalidConfig("planted circuits need d_model >= 8".into()));
        }
        if spec.n_heads < 4 {
            return Err(ModelError::InvalidConfig("planted circuits need at least 4 heads".into()));
        }
        if spec.d_mlp < 3 {
            return Err(ModelError::InvalidConfig("planted circuits need d_mlp >= 3".into()));
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "attenuation {} outside (0, 1]",
                self.attenuation
            )));
        }
        if self.noise_scale < 0.0 || !self.noise_scale.is_finite() {
            return Err(ModelError::InvalidConfig("noise_scale must be >= 0".into()));
        }
        if self.override_layer >= l {
            return Err(ModelError::InvalidConfig(format!(
                "override layer {} must be below n_layers {}",
                self.override_layer, l
            )));
        }
        if self.override_site == OverrideSite::Head && self.override_layer == 0 {
            return Err(ModelError::InvalidConfig(
                "a head-site override needs override_layer >= 1".into(),
            ));
        }
        let carrier_axis = d - 1;
        let marker_axis = d - 2;
        let self_axis = d - 3;
        let reserved = [carrier_axis, marker_axis, self_axis];
        for (name, axis) in [("opp_axis", self.opp_axis), ("coop_axis", self.coop_axis)] {
            if axis >= d {
                return Err(ModelError::AxisCollision(format!("{name} {axis} >= d_model {d}")));
            }
            if reserved.contains(&axis) {
                return Err(ModelError::AxisCollision(format!(
                    "{name} {axis} is reserved (carrier/marker/self use the last three axes)"
                )));
            }
        }
        if self.opp_axis == self.coop_axis {
            return Err(ModelError::AxisCollision(format!(
                "opp_axis and coop_axis are both {}",
                self.opp_axis
            )));
        }
        let free_axes: Vec<usize> = (0..d)
            .filter(|a| !reserved.contains(a) && *a != self.opp_axis && *a != self.coop_axis)
            .collect();

        let mut tracker_heads = Vec::new();
        for layer in 2..=l {
            if tracker_heads.len() == self.tracking_heads {
                break;
            }
            tracker_heads.push(HeadId::new(layer, 1));
        }
        let mut noise_heads = Vec::new();
        for layer in 1..=l {
            if layer >= 2 {
                noise_heads.push((HeadId::new(layer, 0), self.coop_axis));
            }
            noise_heads.push((HeadId::new(layer, 2), self.opp_axis));
        }
        let copy_head = (self.override_site == OverrideSite::Head)
            .then(|| HeadId::new(self.override_layer, 3));

        Ok(PlantedLayout {
            carrier_axis,
            marker_axis,
            self_axis,
            opp_axis: self.opp_axis,
            coop_axis: self.coop_axis,
            free_axes,
            history_head: HeadId::new(1, 0),
            tracker_heads,
            noise_heads,
            copy_head,
        })
    }
}

/// Where each planted component lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLayout {
    pub carrier_axis: usize,
    pub marker_axis: usize,
    pub self_axis: usize,
    pub opp_axis: usize,
    pub coop_axis: usize,
    pub free_axes: Vec<usize>,
    pub history_head: HeadId,
    pub tracker_heads: Vec<HeadId>,
    /// Noise heads with the axis each one writes to.
    pub noise_heads: Vec<(HeadId, usize)>,
    pub copy_head: Option<HeadId>,
}

impl PlantedLayout {
    /// Unit vector along an axis.
    pub fn axis_vector(&self, d_model: usize, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; d_model];
        v[axis] = 1.0;
        v
    }
}

/// Action index (0 or 1) of a canonical action label.
fn action_index_table() -> HashMap<String, usize> {
    let mut table = HashMap::new();
    for id in CanonicalGame::ALL {
        let g = Game::canonical(id);
        for (i, label) in g.actions(Player::A).iter().enumerate() {
            table.insert(label.clone(), i);
        }
    }
    table
}

fn bit(index: usize) -> f64 {
    if index == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Builds a model whose weights implement the configured circuit exactly.
pub fn build_synthetic_circuit(
    spec: &ModelSpec,
    cfg: &SyntheticCircuitConfig,
    seed: u64,
) -> Result<Model, ModelError> {
    let layout = cfg.layout(spec)?;
    let tok = Tokenizer::new(spec.vocab.clone())?;
    let actions = action_index_table();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::zeros(spec.clone())?;
    let d = spec.d_model;
    let n_layers = spec.n_layers;
    let sqrt_d = (d as f64).sqrt();
    let sqrt_dh = (spec.d_head() as f64).sqrt();
    // Weight that turns a normalised coordinate back into raw units.
    let raw = CARRIER / sqrt_d;
    // Weight on the normalised carrier coordinate that yields the constant 1.
    let unit = 1.0 / sqrt_d;

    // Token embeddings: only joint-outcome tokens carry content.
    for (id, token) in tok.vocab().iter().enumerate() {
        if let Some((mine, theirs)) = token.split_once('|') {
            if let (Some(&m), Some(&t)) = (actions.get(mine), actions.get(theirs)) {
                let row = model.embed.row_mut(id);
                row[layout.opp_axis] = bit(t);
                row[layout.self_axis] = bit(m);
                row[layout.marker_axis] = 1.0;
            }
        }
    }

    // Positional embeddings: carrier, Nash prior and random features.
    for pos in 0..spec.max_context {
        let row = model.pos_embed.row_mut(pos);
        row[layout.carrier_axis] = CARRIER;
        row[layout.coop_axis] = -cfg.nash_prior;
        if cfg.override_layer == 0 {
            row[layout.coop_axis] += cfg.override_strength;
        }
        for &a in &layout.free_axes {
            row[a] = rng.sample(StandardNormal);
        }
    }

    let n_free = layout.free_axes.len() as f64;
    for l in 1..=n_layers {
        let layer: &mut LayerWeights = &mut model.layers[l - 1];

        // History head: uniform attention, reads opp, writes coop.
        if l == layout.history_head.layer {
            let h = &mut layer.heads[layout.history_head.head];
            h.w_v.set(0, layout.opp_axis, raw);
            h.w_o.set(layout.coop_axis, 0, -cfg.history_gain);
        }

        for &id in layout.tracker_heads.iter().filter(|h| h.layer == l) {
            let h = &mut layer.heads[id.head];
            h.w_q.set(0, layout.carrier_axis, TRACKER_SHARPNESS * sqrt_dh * unit);
            h.w_k.set(0, layout.marker_axis, raw);
        }

        for &(id, target) in layout.noise_heads.iter().filter(|(h, _)| h.layer == l) {
            let h = &mut layer.heads[id.head];
            h.w_q.set(0, layout.carrier_axis, NOISE_SHARPNESS * sqrt_dh * unit);
            for &a in &layout.free_axes {
                let r: f64 = rng.sample(StandardNormal);
                h.w_k.set(0, a, raw * r / n_free.sqrt());
            }
            h.w_v.set(0, layout.self_axis, raw);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            h.w_o.set(target, 0, sign * cfg.noise_scale);
        }

        if layout.copy_head.is_some_and(|c| c.layer == l) {
            let id = layout.copy_head.unwrap();
            let h = &mut layer.heads[id.head];
            h.w_q.set(0, layout.carrier_axis, COPY_SHARPNESS * sqrt_dh * unit);
            h.w_k.set(0, layout.marker_axis, raw);
            h.w_v.set(0, layout.carrier_axis, unit);
            let blocks = (n_layers - cfg.override_layer + 1) as f64;
            h.w_o.set(layout.coop_axis, 0, cfg.override_strength * blocks);
        }

        // MLP neuron 0/1: linear pass-through of the opp axis scaled by
        // (attenuation - 1). Neuron 2: constant 1 from the carrier.
        layer.mlp_in.set(0, layout.opp_axis, raw);
        layer.mlp_in.set(1, layout.opp_axis, -raw);
        layer.mlp_out.set(layout.opp_axis, 0, cfg.attenuation - 1.0);
        layer.mlp_out.set(layout.opp_axis, 1, 1.0 - cfg.attenuation);
        let mut coop_bias = 0.0;
        if cfg.override_site == OverrideSite::Distributed && l >= cfg.override_layer.max(1) {
            coop_bias += cfg.override_strength;
        }
        if l == n_layers {
            coop_bias -= cfg.final_correction;
        }
        if coop_bias != 0.0 {
            layer.mlp_in.set(2, layout.carrier_axis, unit);
            layer.mlp_out.set(layout.coop_axis, 2, coop_bias);
        }
    }

    for (id, token) in tok.vocab().iter().enumerate() {
        if let Some(&idx) = actions.get(token.as_str()) {
            let sign = if idx == 0 { 0.5 } else { -0.5 };
            model.unembed.set(id, layout.coop_axis, sign * cfg.readout_gain);
        }
    }

    Ok(model)
}
