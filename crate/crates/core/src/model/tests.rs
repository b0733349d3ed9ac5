use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::game::{make_game, JointHistory, Player};

fn small_spec() -> ModelSpec {
    ModelSpec {
        n_layers: 3,
        d_model: 8,
        n_heads: 4,
        d_mlp: 12,
        max_context: 16,
        ..ModelSpec::default()
    }
}

/// A model with small random weights everywhere.
fn random_model(seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::zeros(small_spec()).unwrap();
    let mut fill = |mat: &mut Matrix| {
        for r in 0..mat.rows {
            for v in mat.row_mut(r) {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    };
    fill(&mut m.embed);
    fill(&mut m.pos_embed);
    fill(&mut m.unembed);
    for layer in &mut m.layers {
        for h in &mut layer.heads {
            fill(&mut h.w_q);
            fill(&mut h.w_k);
            fill(&mut h.w_v);
            fill(&mut h.w_o);
        }
        fill(&mut layer.mlp_in);
        fill(&mut layer.mlp_out);
    }
    m
}

fn pd_tokens(m: &Model, rounds: &[(usize, usize)]) -> Vec<usize> {
    let h = JointHistory::from_rounds(make_game("pd").unwrap(), rounds).unwrap();
    m.tokenizer().encode(&compact_transcript(&h, Player::A)).unwrap()
}

fn unit(d: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[axis] = 1.0;
    v
}

#[test]
fn input_errors() {
    let m = random_model(1);
    let none = HookPlan::default();
    assert!(matches!(m.forward(&[], &none), Err(ModelError::EmptyInput)));
    assert!(matches!(m.forward(&[0; 17], &none), Err(ModelError::ContextOverflow { len: 17, max: 16 })));
    let vocab = m.spec.vocab.len();
    assert!(matches!(m.forward(&[vocab], &none), Err(ModelError::TokenOutOfRange(_))));
    assert!(matches!(m.forward_at(&[0, 1], 2, &none), Err(ModelError::PositionOutOfRange { .. })));
}

#[test]
fn hook_validation() {
    let m = random_model(1);
    let t = pd_tokens(&m, &[(0, 1)]);
    let bad_layer = HookPlan::new().inject(4, vec![0.0; 8], 1.0);
    assert!(matches!(m.forward(&t, &bad_layer), Err(ModelError::InvalidHookLayer { .. })));
    let bad_dim = HookPlan::new().inject(0, vec![0.0; 7], 1.0);
    assert!(matches!(m.forward(&t, &bad_dim), Err(ModelError::DimensionMismatch { .. })));
    let not_unit = HookPlan::new().clamp(1, vec![2.0; 8], 0.0);
    assert!(matches!(m.forward(&t, &not_unit), Err(ModelError::NotUnitVector(_))));
    let bad_head = HookPlan::new().ablate([HeadId::new(0, 0)]);
    assert!(matches!(m.forward(&t, &bad_head), Err(ModelError::InvalidHead { .. })));
    assert!(m.zero_ablate(&[HeadId::new(3, 4)]).is_err());
}

#[test]
fn attention_is_causal() {
    let m = random_model(2);
    let a = pd_tokens(&m, &[(0, 1), (1, 1), (0, 0)]);
    let mut b = a.clone();
    *b.last_mut().unwrap() = a[3];
    let pa = m.forward_at(&a, 3, &HookPlan::default()).unwrap();
    let pb = m.forward_at(&b, 3, &HookPlan::default()).unwrap();
    assert_eq!(pa.trace, pb.trace);
    for layer in m.attention_weights(&a).unwrap() {
        for p in layer {
            for i in 0..a.len() {
                assert!(p.row(i)[i + 1..].iter().all(|&w| w == 0.0));
            }
        }
    }
}

#[test]
fn last_layer_injection_is_additive() {
    let m = random_model(3);
    let t = pd_tokens(&m, &[(1, 0)]);
    let base = m.forward(&t, &HookPlan::default()).unwrap();
    let v = unit(8, 2);
    let out = m.forward(&t, &HookPlan::new().inject(3, v.clone(), 2.5)).unwrap();
    for (i, (x, y)) in base.trace.layers[3].iter().zip(&out.trace.layers[3]).enumerate() {
        assert_eq!(*y, x + 2.5 * v[i]);
    }
    assert_eq!(base.trace.layers[..3], out.trace.layers[..3]);
}

#[test]
fn clamp_runs_after_injection() {
    let m = random_model(4);
    let t = pd_tokens(&m, &[(1, 0), (0, 0)]);
    let v = unit(8, 5);
    let plan = HookPlan::new().inject(1, v.clone(), 100.0).clamp(1, v.clone(), -3.0);
    let out = m.forward(&t, &plan).unwrap();
    assert!((out.trace.layers[1][5] + 3.0).abs() < 1e-12);
}

#[test]
fn scope_controls_other_positions() {
    let m = random_model(5);
    let t = pd_tokens(&m, &[(1, 0), (0, 0), (1, 1)]);
    let v = unit(8, 1);
    let decision = HookPlan::new().inject(0, v.clone(), 5.0);
    let all = decision.clone().scope(HookScope::AllPositions);
    // Reading an earlier position: only the all-positions plan touches it.
    let base = m.forward_at(&t, 2, &HookPlan::default()).unwrap();
    let d = m.forward_at(&t, 2, &decision).unwrap();
    let a = m.forward_at(&t, 2, &all).unwrap();
    assert_ne!(base.trace.layers[0], a.trace.layers[0]);
    assert_eq!(d.trace.layers[0][1], base.trace.layers[0][1] + 5.0);
}

#[test]
fn ablated_view_matches_ablation_hooks() {
    let m = random_model(6);
    let t = pd_tokens(&m, &[(0, 0), (0, 1)]);
    let heads = [HeadId::new(1, 0), HeadId::new(3, 2)];
    let view = m.zero_ablate(&heads).unwrap();
    let a = view.forward(&t, &HookPlan::default()).unwrap();
    let b = m.forward(&t, &HookPlan::new().ablate(heads)).unwrap();
    assert_eq!(a.logits, b.logits);
    assert_ne!(a.logits, m.forward(&t, &HookPlan::default()).unwrap().logits);
    assert_eq!(view.heads().count(), 2);
}

#[test]
fn weights_roundtrip_through_disk() {
    let m = random_model(7);
    let dir = std::env::temp_dir().join(format!("equilens-model-{}", std::process::id()));
    save_model(&m, &dir).unwrap();
    let back = load_model(&dir).unwrap();
    assert_eq!(back, m);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn planted_defaults() {
    let m = build_synthetic_circuit(&ModelSpec::default(), &SyntheticCircuitConfig::default(), 1).unwrap();
    let tok = m.tokenizer();
    let ids = tok.action_ids(&make_game("pd").unwrap(), Player::A).unwrap();
    let t = pd_tokens(&m, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
    let out = m.forward(&t, &HookPlan::default()).unwrap();
    let p_coop: Vec<f64> = out
        .trace
        .layers
        .iter()
        .map(|h| {
            let l = m.unembed_vector(h);
            tensor::softmax2_first(l[ids[0]], l[ids[1]])
        })
        .collect();
    assert!(p_coop[4] < 0.5 && p_coop[5] > 0.5, "{p_coop:?}");
    assert!(p_coop[8] < 0.5);
}

#[test]
fn planted_layout_rejects_collisions() {
    let spec = ModelSpec::default();
    let cfg = SyntheticCircuitConfig {
        coop_axis: 0,
        ..Default::default()
    };
    assert!(matches!(build_synthetic_circuit(&spec, &cfg, 0), Err(ModelError::AxisCollision(_))));
    let cfg = SyntheticCircuitConfig {
        opp_axis: spec.d_model - 1,
        ..Default::default()
    };
    assert!(matches!(build_synthetic_circuit(&spec, &cfg, 0), Err(ModelError::AxisCollision(_))));
    let cfg = SyntheticCircuitConfig {
        override_layer: spec.n_layers,
        ..Default::default()
    };
    assert!(build_synthetic_circuit(&spec, &cfg, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn attention_rows_are_distributions(rounds in prop::collection::vec((0usize..2, 0usize..2), 1..12), seed in 0u64..50) {
        let m = random_model(seed);
        let t = pd_tokens(&m, &rounds);
        for layer in m.attention_weights(&t).unwrap() {
            for p in layer {
                for i in 0..t.len() {
                    let s: f64 = p.row(i).iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_is_deterministic(rounds in prop::collection::vec((0usize..2, 0usize..2), 1..12)) {
        let m = random_model(9);
        let t = pd_tokens(&m, &rounds);
        prop_assert_eq!(m.forward(&t, &HookPlan::default()).unwrap().logits, m.forward(&t, &HookPlan::default()).unwrap().logits);
    }
}
