//! Logit lens restricted to the two action tokens.

use serde::{Deserialize, Serialize};

use crate::model::tensor::{dot, softmax2_first};
use crate::model::{Matrix, ResidualTrace};

/// Per-layer two-action distributions `[P(action 0), P(action 1)]` for
/// layers `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensSeries {
    pub probs: Vec<[f64; 2]>,
}

impl LensSeries {
    /// Probability of `action` at every layer.
    pub fn of(&self, action: usize) -> Vec<f64> {
        self.probs.iter().map(|p| p[action]).collect()
    }

    /// Element-wise mean of several series of equal length.
    pub fn mean(series: &[LensSeries]) -> Option<LensSeries> {
        let first = series.first()?;
        let n = series.len() as f64;
        let probs = (0..first.probs.len())
            .map(|l| {
                let p0 = series.iter().map(|s| s.probs[l][0]).sum::<f64>() / n;
                [p0, 1.0 - p0]
            })
            .collect();
        Some(LensSeries { probs })
    }
}

/// Two-action distribution read from one hidden state.
pub fn action_distribution(h: &[f64], unembed: &Matrix, action_ids: [usize; 2], temperature: f64) -> [f64; 2] {
    let l0 = dot(unembed.row(action_ids[0]), h);
    let l1 = dot(unembed.row(action_ids[1]), h);
    let p0 = softmax2_first(l0 / temperature, l1 / temperature);
    [p0, 1.0 - p0]
}

/// Applies `W_U` to every `h_l` of the trace and renormalises over the two
/// action tokens.
pub fn logit_lens(trace: &ResidualTrace, unembed: &Matrix, action_ids: [usize; 2]) -> LensSeries {
    LensSeries {
        probs: trace
            .layers
            .iter()
            .map(|h| action_distribution(h, unembed, action_ids, 1.0))
            .collect(),
    }
}

/// First layer where the non-Nash action overtakes: `P(non-Nash) > 0.5` at
/// `l` and `≤ 0.5` at `l − 1` (layer 0 counts if it already favours the
/// non-Nash action).
pub fn find_override_layer(series: &LensSeries, nash_action: usize) -> Option<usize> {
    let other = 1 - nash_action;
    let p = series.of(other);
    (0..p.len()).find(|&l| p[l] > 0.5 && (l == 0 || p[l - 1] <= 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(p_coop: &[f64]) -> LensSeries {
        LensSeries {
            probs: p_coop.iter().map(|&p| [p, 1.0 - p]).collect(),
        }
    }

    #[test]
    fn override_layer_examples() {
        assert_eq!(find_override_layer(&series(&[0.4, 0.3, 0.2, 0.1]), 1), None);
        assert_eq!(find_override_layer(&series(&[0.4, 0.4, 0.6, 0.7, 0.2]), 1), Some(2));
        assert_eq!(find_override_layer(&series(&[0.9, 0.2, 0.7]), 1), Some(0));
        assert_eq!(find_override_layer(&series(&[0.5, 0.51]), 1), Some(1));
        // With action 0 as the Nash action the roles swap.
        assert_eq!(find_override_layer(&series(&[0.9, 0.4]), 0), Some(1));
    }

    #[test]
    fn aligned_state_is_confident() {
        let mut w = Matrix::zeros(3, 4);
        w.row_mut(1).copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        w.row_mut(2).copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
        let h: Vec<f64> = w.row(2).iter().map(|v| v * 10.0).collect();
        let trace = ResidualTrace {
            layers: vec![vec![0.0; 4], h],
            position: 0,
            prompt_id: None,
        };
        let lens = logit_lens(&trace, &w, [1, 2]);
        assert_eq!(lens.probs[0], [0.5, 0.5]);
        assert!(lens.probs[1][1] > 0.9999);
        for p in &lens.probs {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
