//! A minimal pre-norm decoder-only transformer with full residual-stream
//! instrumentation.
//!
//! Architecture: token plus learned positional embeddings, `n_layers` blocks of
//! causal multi-head attention and a ReLU MLP (each behind an RMS norm), and a
//! separate unembedding `W_U` that reads the raw residual stream. Because no
//! final norm sits between `h_L` and `W_U`, the logit lens at the last layer
//! coincides with the model output.

mod circuit;
mod hooks;
mod io;
mod spec;
pub mod tensor;
mod tokenizer;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circuit::{build_synthetic_circuit, OverrideSite, SyntheticCircuitConfig, PlantedLayout};
pub use hooks::{Clamp, HeadId, HookPlan, HookScope, Injection};
pub use io::{load_model, save_model};
pub use spec::ModelSpec;
pub use tensor::Matrix;
pub use tokenizer::{compact_transcript, outcome_token, Tokenizer, BOS};

use tensor::{add_scaled, dot, rms_norm, softmax};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sequence of {len} tokens exceeds the model context of {max}")]
    ContextOverflow { len: usize, max: usize },
    #[error("empty token sequence")]
    EmptyInput,
    #[error("unknown token '{0}'")]
    UnknownToken(String),
    #[error("token id {0} outside the vocabulary")]
    TokenOutOfRange(usize),
    #[error("position {position} outside a sequence of {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("hook layer {layer} out of range 0..={max}")]
    InvalidHookLayer { layer: usize, max: usize },
    #[error("no attention head {head} in layer {layer}")]
    InvalidHead { layer: usize, head: usize },
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("clamp direction must be unit norm, got norm {0}")]
    NotUnitVector(f64),
    #[error("axis collision: {0}")]
    AxisCollision(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("weight file error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Weights of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    /// `d_head × d_model`
    pub w_q: Matrix,
    /// `d_head × d_model`
    pub w_k: Matrix,
    /// `d_head × d_model`
    pub w_v: Matrix,
    /// `d_model × d_head`
    pub w_o: Matrix,
}

impl HeadWeights {
    pub fn zeros(d_model: usize, d_head: usize) -> Self {
        HeadWeights {
            w_q: Matrix::zeros(d_head, d_model),
            w_k: Matrix::zeros(d_head, d_model),
            w_v: Matrix::zeros(d_head, d_model),
            w_o: Matrix::zeros(d_model, d_head),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_norm: Vec<f64>,
    pub heads: Vec<HeadWeights>,
    pub mlp_norm: Vec<f64>,
    /// `d_mlp × d_model`
    pub mlp_in: Matrix,
    /// `d_model × d_mlp`
    pub mlp_out: Matrix,
}

impl LayerWeights {
    pub fn zeros(spec: &ModelSpec) -> Self {
        LayerWeights {
            attn_norm: vec![1.0; spec.d_model],
            heads: (0..spec.n_heads)
                .map(|_| HeadWeights::zeros(spec.d_model, spec.d_head()))
                .collect(),
            mlp_norm: vec![1.0; spec.d_model],
            mlp_in: Matrix::zeros(spec.d_mlp, spec.d_model),
            mlp_out: Matrix::zeros(spec.d_model, spec.d_mlp),
        }
    }

    /// ReLU MLP applied to an already-normalised input.
    pub fn mlp(&self, normed: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self.mlp_in.matvec(normed).into_iter().map(|v| v.max(0.0)).collect();
        self.mlp_out.matvec(&hidden)
    }
}

/// Per-layer hidden states `h_0 … h_L` at one position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub layers: Vec<Vec<f64>>,
    pub position: usize,
    pub prompt_id: Option<String>,
}

impl ResidualTrace {
    pub fn layer(&self, l: usize) -> &[f64] {
        &self.layers[l]
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Full-vocabulary logits at the decision position.
    pub logits: Vec<f64>,
    pub trace: ResidualTrace,
}

/// Attention patterns, indexed `[layer - 1][head]`, each a lower-triangular
/// `n × n` row-stochastic matrix.
pub type AttentionPatterns = Vec<Vec<Matrix>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    /// `vocab × d_model`
    pub embed: Matrix,
    /// `max_context × d_model`
    pub pos_embed: Matrix,
    pub layers: Vec<LayerWeights>,
    /// `vocab × d_model`
    pub unembed: Matrix,
}

impl Model {
    /// A model with every weight zero and unit norm gains.
    pub fn zeros(spec: ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let v = spec.vocab.len();
        Ok(Model {
            embed: Matrix::zeros(v, spec.d_model),
            pos_embed: Matrix::zeros(spec.max_context, spec.d_model),
            layers: (0..spec.n_layers).map(|_| LayerWeights::zeros(&spec)).collect(),
            unembed: Matrix::zeros(v, spec.d_model),
            spec,
        })
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.spec.vocab.clone()).expect("validated vocabulary")
    }

    pub fn n_layers(&self) -> usize {
        self.spec.n_layers
    }

    /// Weights of block `l` (1-based).
    pub fn layer(&self, l: usize) -> &LayerWeights {
        &self.layers[l - 1]
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        if tokens.len() > self.spec.max_context {
            return Err(ModelError::ContextOverflow {
                len: tokens.len(),
                max: self.spec.max_context,
            });
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.spec.vocab.len()) {
            return Err(ModelError::TokenOutOfRange(bad));
        }
        Ok(())
    }

    /// `h_0` for every position: token plus positional embedding.
    pub fn embed_tokens(&self, tokens: &[usize]) -> Vec<Vec<f64>> {
        tokens
            .iter()
            .enumerate()
            .map(|(pos, &t)| {
                self.embed
                    .row(t)
                    .iter()
                    .zip(self.pos_embed.row(pos))
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect()
    }

    /// Forward pass with the decision position at the last token.
    pub fn forward(&self, tokens: &[usize], hooks: &HookPlan) -> Result<ForwardOutput, ModelError> {
        let position = tokens.len().saturating_sub(1);
        self.forward_at(tokens, position, hooks)
    }

    /// Forward pass reading logits and the trace at `position`.
    pub fn forward_at(
        &self,
        tokens: &[usize],
        position: usize,
        hooks: &HookPlan,
    ) -> Result<ForwardOutput, ModelError> {
        self.run(tokens, position, hooks, None)
    }

    /// Attention patterns for every head of every layer (no hooks).
    pub fn attention_weights(&self, tokens: &[usize]) -> Result<AttentionPatterns, ModelError> {
        let mut patterns = Vec::with_capacity(self.spec.n_layers);
        self.run(tokens, tokens.len().saturating_sub(1), &HookPlan::default(), Some(&mut patterns))?;
        Ok(patterns)
    }

    /// Logits `W_U · h` for an arbitrary residual vector.
    pub fn unembed_vector(&self, h: &[f64]) -> Vec<f64> {
        self.unembed.matvec(h)
    }

    /// A view whose forward pass zeroes the output of the given heads.
    pub fn zero_ablate(&self, heads: &[HeadId]) -> Result<AblatedModel<'_>, ModelError> {
        let plan = HookPlan::new().ablate(heads.iter().copied());
        plan.validate(self.spec.n_layers, self.spec.n_heads, self.spec.d_model)?;
        Ok(AblatedModel {
            model: self,
            heads: heads.iter().copied().collect(),
        })
    }

    fn apply_boundary_hooks(&self, layer: usize, hooks: &HookPlan, hidden: &mut [Vec<f64>], position: usize) {
        let targets: Vec<usize> = match hooks.scope {
            HookScope::Decision => vec![position],
            HookScope::AllPositions => (0..hidden.len()).collect(),
        };
        for inj in hooks.injections.iter().filter(|i| i.layer == layer) {
            for &p in &targets {
                add_scaled(&mut hidden[p], &inj.vector, inj.alpha);
            }
        }
        for c in hooks.clamps.iter().filter(|c| c.layer == layer) {
            for &p in &targets {
                let proj = dot(&hidden[p], &c.direction);
                add_scaled(&mut hidden[p], &c.direction, c.value - proj);
            }
        }
    }

    fn run(
        &self,
        tokens: &[usize],
        position: usize,
        hooks: &HookPlan,
        mut capture: Option<&mut AttentionPatterns>,
    ) -> Result<ForwardOutput, ModelError> {
        self.check_tokens(tokens)?;
        if position >= tokens.len() {
            return Err(ModelError::PositionOutOfRange {
                position,
                len: tokens.len(),
            });
        }
        let spec = &self.spec;
        hooks.validate(spec.n_layers, spec.n_heads, spec.d_model)?;
        let ablated: BTreeSet<HeadId> = hooks.ablations.iter().copied().collect();
        let n = tokens.len();
        let d_head = spec.d_head();
        let scale = 1.0 / (d_head as f64).sqrt();

        let mut hidden = self.embed_tokens(tokens);
        self.apply_boundary_hooks(0, hooks, &mut hidden, position);
        let mut trace = Vec::with_capacity(spec.n_layers + 1);
        trace.push(hidden[position].clone());

        for (li, layer) in self.layers.iter().enumerate() {
            let l = li + 1;
            let normed: Vec<Vec<f64>> = hidden.iter().map(|h| rms_norm(h, &layer.attn_norm)).collect();
            let mut attn_out = vec![vec![0.0; spec.d_model]; n];
            let mut layer_patterns = Vec::new();
            for (hi, head) in layer.heads.iter().enumerate() {
                let is_ablated = ablated.contains(&HeadId::new(l, hi));
                let skip_output = is_ablated || head.w_o.is_zero();
                if skip_output && capture.is_none() {
                    continue;
                }
                let q: Vec<Vec<f64>> = normed.iter().map(|x| head.w_q.matvec(x)).collect();
                let k: Vec<Vec<f64>> = normed.iter().map(|x| head.w_k.matvec(x)).collect();
                let v: Vec<Vec<f64>> = if skip_output {
                    Vec::new()
                } else {
                    normed.iter().map(|x| head.w_v.matvec(x)).collect()
                };
                let mut pattern = capture.as_ref().map(|_| Matrix::zeros(n, n));
                for i in 0..n {
                    let scores: Vec<f64> = (0..=i).map(|j| dot(&q[i], &k[j]) * scale).collect();
                    let weights = softmax(&scores);
                    if let Some(p) = pattern.as_mut() {
                        p.row_mut(i)[..=i].copy_from_slice(&weights);
                    }
                    if skip_output {
                        continue;
                    }
                    let mut mixed = vec![0.0; d_head];
                    for (j, w) in weights.iter().enumerate() {
                        add_scaled(&mut mixed, &v[j], *w);
                    }
                    let out = head.w_o.matvec(&mixed);
                    add_scaled(&mut attn_out[i], &out, 1.0);
                }
                if let Some(p) = pattern {
                    layer_patterns.push(p);
                }
            }
            if let Some(c) = capture.as_mut() {
                c.push(layer_patterns);
            }
            for (h, a) in hidden.iter_mut().zip(&attn_out) {
                add_scaled(h, a, 1.0);
            }
            for h in hidden.iter_mut() {
                let out = layer.mlp(&rms_norm(h, &layer.mlp_norm));
                add_scaled(h, &out, 1.0);
            }
            self.apply_boundary_hooks(l, hooks, &mut hidden, position);
            trace.push(hidden[position].clone());
        }

        Ok(ForwardOutput {
            logits: self.unembed.matvec(&hidden[position]),
            trace: ResidualTrace {
                layers: trace,
                position,
                prompt_id: None,
            },
        })
    }
}

/// A model whose forward pass zeroes the output of selected heads. The
/// underlying weights are untouched.
#[derive(Debug, Clone)]
pub struct AblatedModel<'a> {
    model: &'a Model,
    heads: BTreeSet<HeadId>,
}

impl AblatedModel<'_> {
    pub fn heads(&self) -> impl Iterator<Item = &HeadId> {
        self.heads.iter()
    }

    pub fn forward(&self, tokens: &[usize], hooks: &HookPlan) -> Result<ForwardOutput, ModelError> {
        let mut plan = hooks.clone();
        plan.ablations.extend(self.heads.iter().copied());
        self.model.forward(tokens, &plan)
    }
}

#[cfg(test)]
mod tests;
