//! Repeated 2×2 game tournaments scored by Nash distance, and an
//! interpretability lab (probes, logit lens, head ablation, steering,
//! clamping) validated on toy transformers with planted circuits.

pub mod agents;
pub mod engine;
mod error;
pub mod game;
pub mod interp;
pub mod model;

pub use error::{Error, Result};
pub use game::{
    enumerate_equilibria, make_game, nash_distance, nash_distance_series, CanonicalGame,
    EquilibriumKind, EquilibriumProfile, Equilibria, Game, JointHistory, MixedStrategy, Player,
};
pub use model::{HookPlan, Model, ModelSpec, ResidualTrace, SyntheticCircuitConfig};
