use std::sync::Arc;

use rand::Rng;
use serde_json::json;

use super::{Agent, AgentDescriptor, AgentError, AgentRng, Decision, DecisionContext};
use crate::model::tensor::softmax2_first;
use crate::model::{compact_transcript, HookPlan, Model, Tokenizer};

/// Draws an action index from two action logits. Temperature 0 is argmax;
/// on equal logits the action whose token id is lower wins.
pub fn sample_action(
    logits: [f64; 2],
    token_ids: [usize; 2],
    temperature: f64,
    rng: &mut AgentRng,
) -> usize {
    if temperature == 0.0 {
        return if logits[0] > logits[1] {
            0
        } else if logits[1] > logits[0] {
            1
        } else if token_ids[0] <= token_ids[1] {
            0
        } else {
            1
        };
    }
    let p0 = softmax2_first(logits[0] / temperature, logits[1] / temperature);
    usize::from(rng.random::<f64>() >= p0)
}

/// Plays by reading the action-token logits of a toy model at the decision
/// position of the compact transcript.
#[derive(Debug, Clone)]
pub struct TransformerAgent {
    id: String,
    model: Arc<Model>,
    tok: Tokenizer,
}

impl TransformerAgent {
    pub fn new(id: impl Into<String>, model: Arc<Model>) -> Self {
        let tok = model.tokenizer();
        TransformerAgent { id: id.into(), model, tok }
    }

    fn action_logits(&self, ctx: &DecisionContext<'_>) -> Result<([f64; 2], [usize; 2]), AgentError> {
        let tok = &self.tok;
        let text = compact_transcript(ctx.history, ctx.role);
        let tokens = tok.encode(&text)?;
        let ids = tok.action_ids(ctx.game, ctx.role)?;
        let out = self.model.forward(&tokens, &HookPlan::default())?;
        Ok(([out.logits[ids[0]], out.logits[ids[1]]], ids))
    }
}

impl Agent for TransformerAgent {
    fn next_action(
        &mut self,
        ctx: &DecisionContext<'_>,
        rng: &mut AgentRng,
    ) -> Result<Decision, AgentError> {
        if ctx.temperature < 0.0 || !ctx.temperature.is_finite() {
            return Err(AgentError::Config(format!("temperature {} must be >= 0", ctx.temperature)));
        }
        let (logits, ids) = self.action_logits(ctx)?;
        Ok(Decision::silent(sample_action(logits, ids, ctx.temperature, rng)))
    }

    fn reset(&mut self) {}

    fn descriptor(&self) -> AgentDescriptor {
        let s = &self.model.spec;
        AgentDescriptor {
            id: self.id.clone(),
            kind: "transformer".into(),
            params: json!({
                "n_layers": s.n_layers,
                "d_model": s.d_model,
                "n_heads": s.n_heads,
                "max_context": s.max_context,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::agents::Mode;
    use crate::game::{make_game, JointHistory, Player};
    use crate::model::{build_synthetic_circuit, ModelError, ModelSpec, SyntheticCircuitConfig};

    #[test]
    fn argmax_at_zero_temperature() {
        let mut rng = AgentRng::seed_from_u64(1);
        assert_eq!(sample_action([2.0, 1.0], [5, 6], 0.0, &mut rng), 0);
        assert_eq!(sample_action([1.0, 2.0], [5, 6], 0.0, &mut rng), 1);
        assert_eq!(sample_action([1.0, 1.0], [5, 6], 0.0, &mut rng), 0);
        assert_eq!(sample_action([1.0, 1.0], [9, 6], 0.0, &mut rng), 1);
    }

    #[test]
    fn certain_distribution_is_deterministic() {
        let mut rng = AgentRng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(sample_action([0.0, 1e6], [0, 1], 0.7, &mut rng), 1);
        }
    }

    #[test]
    fn context_overflow_is_an_error() {
        let spec = ModelSpec {
            max_context: 8,
            ..ModelSpec::default()
        };
        let model = build_synthetic_circuit(&spec, &SyntheticCircuitConfig::default(), 0).unwrap();
        let mut agent = TransformerAgent::new("t", Arc::new(model));
        let g = make_game("pd").unwrap();
        let h = JointHistory::from_rounds(g.clone(), &[(0, 0); 10]).unwrap();
        let ctx = DecisionContext {
            game: &g,
            history: &h,
            role: Player::A,
            mode: Mode::Direct,
            round: 11,
            prompt: "",
            temperature: 0.7,
        };
        let err = agent.next_action(&ctx, &mut AgentRng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, AgentError::Model(ModelError::ContextOverflow { .. })));
    }
}
