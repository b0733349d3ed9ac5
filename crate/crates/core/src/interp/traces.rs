use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompts::PromptItem;
use crate::model::{HookPlan, Model, ModelError, ResidualTrace};

/// Which token position a trace is read at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionRule {
    /// The last token, immediately before the action would be generated.
    #[default]
    Decision,
    /// A fixed index.
    Index(usize),
    /// `k` tokens before the last one.
    FromEnd(usize),
}

impl PositionRule {
    pub fn resolve(self, len: usize) -> Result<usize, ModelError> {
        let pos = match self {
            PositionRule::Decision => len.checked_sub(1),
            PositionRule::Index(i) => Some(i),
            PositionRule::FromEnd(k) => len.checked_sub(1 + k),
        };
        pos.filter(|&p| p < len)
            .ok_or(ModelError::PositionOutOfRange {
                position: match self {
                    PositionRule::Index(i) => i,
                    _ => 0,
                },
                len,
            })
    }
}

/// One trace per prompt, each from a single forward pass. Failures are
/// reported per prompt; the output is in prompt order.
pub fn collect_traces(
    model: &Model,
    prompts: &[PromptItem],
    rule: PositionRule,
    hooks: &HookPlan,
) -> Vec<Result<ResidualTrace, ModelError>> {
    prompts
        .par_iter()
        .map(|p| {
            let pos = rule.resolve(p.tokens.len())?;
            let mut out = model.forward_at(&p.tokens, pos, hooks)?;
            out.trace.prompt_id = Some(p.id.clone());
            Ok(out.trace)
        })
        .collect()
}

/// Like [`collect_traces`] but failing on the first bad prompt.
pub fn collect_all(model: &Model, prompts: &[PromptItem], rule: PositionRule) -> Result<Vec<ResidualTrace>, ModelError> {
    collect_traces(model, prompts, rule, &HookPlan::default())
        .into_iter()
        .collect()
}
