//! Residual-stream interventions applied during a forward pass.
//!
//! At every layer boundary the hooks run in a fixed order: head ablations
//! (inside the block), then injections, then clamps. A clamp therefore sees
//! the post-injection state and its postcondition `h · v̂ = c` holds exactly
//! on the captured trace.

use serde::{Deserialize, Serialize};

use super::tensor::norm;

/// Identifies an attention head. Blocks are numbered `1..=n_layers`; block
/// `l` produces the residual state `h_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub fn new(layer: usize, head: usize) -> Self {
        HeadId { layer, head }
    }
}

impl std::fmt::Display for HeadId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}H{}", self.layer, self.head)
    }
}

/// Adds `alpha * vector` to `h_layer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub layer: usize,
    pub vector: Vec<f64>,
    pub alpha: f64,
}

/// Replaces the component of `h_layer` along `direction` with `value`:
/// `h ← h − (h·v̂)v̂ + c v̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub layer: usize,
    pub direction: Vec<f64>,
    pub value: f64,
}

/// Which token positions injections and clamps touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HookScope {
    /// Only the decision position.
    #[default]
    Decision,
    /// Every position in the context.
    AllPositions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HookPlan {
    pub injections: Vec<Injection>,
    pub clamps: Vec<Clamp>,
    pub ablations: Vec<HeadId>,
    #[serde(default)]
    pub scope: HookScope,
}

impl HookPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inject(mut self, layer: usize, vector: Vec<f64>, alpha: f64) -> Self {
        self.injections.push(Injection { layer, vector, alpha });
        self
    }

    pub fn clamp(mut self, layer: usize, direction: Vec<f64>, value: f64) -> Self {
        self.clamps.push(Clamp { layer, direction, value });
        self
    }

    pub fn ablate(mut self, heads: impl IntoIterator<Item = HeadId>) -> Self {
        self.ablations.extend(heads);
        self
    }

    pub fn scope(mut self, scope: HookScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.injections.is_empty() && self.clamps.is_empty() && self.ablations.is_empty()
    }

    pub(crate) fn validate(
        &self,
        n_layers: usize,
        n_heads: usize,
        d_model: usize,
    ) -> Result<(), super::ModelError> {
        use super::ModelError;
        for inj in &self.injections {
            if inj.layer > n_layers {
                return Err(ModelError::InvalidHookLayer { layer: inj.layer, max: n_layers });
            }
            if inj.vector.len() != d_model {
                return Err(ModelError::DimensionMismatch {
                    expected: d_model,
                    got: inj.vector.len(),
                });
            }
        }
        for c in &self.clamps {
            if c.layer > n_layers {
                return Err(ModelError::InvalidHookLayer { layer: c.layer, max: n_layers });
            }
            if c.direction.len() != d_model {
                return Err(ModelError::DimensionMismatch {
                    expected: d_model,
                    got: c.direction.len(),
                });
            }
            let n = norm(&c.direction);
            if (n - 1.0).abs() > 1e-9 {
                return Err(ModelError::NotUnitVector(n));
            }
        }
        for h in &self.ablations {
            if h.layer == 0 || h.layer > n_layers || h.head >= n_heads {
                return Err(ModelError::InvalidHead { layer: h.layer, head: h.head });
            }
        }
        Ok(())
    }
}
