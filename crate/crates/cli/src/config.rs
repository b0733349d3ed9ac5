//! Per-command config blocks. Files are TOML unless the extension is
//! `.json`; unknown keys are rejected.

use std::path::{Path, PathBuf};

use equilens::agents::{AgentSpec, Mode};
use equilens::engine::{GameRef, TournamentPlan};
use equilens::interp::{DirectionMethod, ProbeLabel};
use equilens::model::{build_synthetic_circuit, load_model, HeadId, Model, ModelSpec, SyntheticCircuitConfig};
use equilens::{Game, Player};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reads and validates a config file. Errors name the file and, for schema
/// errors, the key path inside it.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if json {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| schema_error(path, e.path().to_string(), e.inner()))
    } else {
        let de = toml::Deserializer::new(&text);
        serde_path_to_error::deserialize(de).map_err(|e| schema_error(path, e.path().to_string(), e.inner()))
    };
    parsed
}

fn schema_error(file: &Path, key: String, inner: &dyn std::fmt::Display) -> CliError {
    let msg = inner.to_string();
    let msg = msg.trim();
    if key == "." || key.is_empty() {
        CliError::Config(format!("{}: {msg}", file.display()))
    } else {
        CliError::Config(format!("{}: at `{key}`: {msg}", file.display()))
    }
}

/// Loads `path` when given, otherwise the defaults.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    path.map_or_else(|| Ok(T::default()), load)
}

pub fn require<T: DeserializeOwned>(path: Option<&Path>, command: &str) -> Result<T, CliError> {
    match path {
        Some(p) => load(p),
        None => Err(CliError::Config(format!("{command} needs --config"))),
    }
}

fn default_rounds() -> usize {
    50
}

fn default_temperature() -> f64 {
    0.7
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayConfig {
    pub game: GameRef,
    pub agent_a: AgentSpec,
    pub agent_b: AgentSpec,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub include_mixed_eq: bool,
}

fn default_mode() -> Mode {
    Mode::Direct
}

pub type TournamentConfig = TournamentPlan;

/// Where an interp command gets its model from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Planted {
        #[serde(default)]
        circuit: SyntheticCircuitConfig,
        /// Defaults to the run seed.
        #[serde(default)]
        weight_seed: Option<u64>,
    },
    Weights { path: PathBuf },
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Planted {
            circuit: SyntheticCircuitConfig::default(),
            weight_seed: None,
        }
    }
}

impl ModelSource {
    pub fn build(&self, seed: u64) -> Result<Model, CliError> {
        match self {
            ModelSource::Planted { circuit, weight_seed } => {
                build_synthetic_circuit(&ModelSpec::default(), circuit, weight_seed.unwrap_or(seed))
                    .map_err(|e| CliError::Config(format!("model.circuit: {e}")))
            }
            ModelSource::Weights { path } => {
                load_model(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
            }
        }
    }
}

/// Model, game and seat shared by every interp command.
#[derive(Debug, Clone)]
pub struct Subject {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
}

macro_rules! subject {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn subject(&self) -> Subject {
                Subject {
                    model: self.model.clone(),
                    game: self.game.clone(),
                    role: self.role,
                }
            }
        }
    )*};
}

subject!(ProbeConfig, LensConfig, AblateConfig, SteerConfig, ClampConfig);

impl Subject {
    pub fn game(&self) -> Result<Game, CliError> {
        self.game.resolve().map_err(|e| CliError::Config(format!("game: {e}")))
    }

    pub fn nash_action(&self, game: &Game) -> Result<usize, CliError> {
        game.nash_action(self.role).ok_or_else(|| {
            CliError::Config(format!("game: {} has no unique pure Nash action for {:?}", game.name(), self.role))
        })
    }
}

fn default_game() -> GameRef {
    GameRef::Id("pd".into())
}

fn default_role() -> Player {
    Player::A
}

/// History lengths `min..=max` of random prompts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lengths {
    pub min: usize,
    pub max: usize,
}

impl Lengths {
    fn new(min: usize, max: usize) -> Self {
        Lengths { min, max }
    }

    pub fn range(self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }

    fn check(self, key: &str) -> Result<(), CliError> {
        if self.min == 0 || self.min > self.max {
            return Err(CliError::Config(format!("{key}: need 1 <= min <= max, got {}..={}", self.min, self.max)));
        }
        Ok(())
    }
}

/// An evenly spaced grid `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(self, key: &str) -> Result<Vec<f64>, CliError> {
        let ok = self.step > 0.0 && self.start.is_finite() && self.stop.is_finite() && self.stop > self.start;
        if !ok {
            return Err(CliError::Config(format!(
                "{key}: need start < stop and step > 0, got {}..{} step {}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

fn positive(v: usize, key: &str) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{key}: must be at least 1")));
    }
    Ok(())
}

fn temperature(t: f64, key: &str) -> Result<(), CliError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::Config(format!("{key}: {t} must be a finite value >= 0")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
    pub seed: u64,
    pub n_prompts: usize,
    pub lengths: Lengths,
    pub labels: Vec<ProbeLabel>,
    pub folds: usize,
    /// Sampling temperature behind the `nash_action` label.
    pub temperature: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            model: ModelSource::default(),
            game: default_game(),
            role: default_role(),
            seed: 0,
            n_prompts: 400,
            lengths: Lengths::new(1, 49),
            labels: vec![ProbeLabel::OppLastMove],
            folds: 5,
            temperature: 0.7,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive(self.n_prompts, "n_prompts")?;
        self.lengths.check("lengths")?;
        if self.folds < 2 {
            return Err(CliError::Config("folds: must be at least 2".into()));
        }
        if self.labels.is_empty() {
            return Err(CliError::Config("labels: list at least one label".into()));
        }
        temperature(self.temperature, "temperature")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LensConfig {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
    pub seed: u64,
    pub n_prompts: usize,
    pub lengths: Lengths,
}

impl Default for LensConfig {
    fn default() -> Self {
        LensConfig {
            model: ModelSource::default(),
            game: default_game(),
            role: default_role(),
            seed: 0,
            n_prompts: 20,
            lengths: Lengths::new(1, 20),
        }
    }
}

impl LensConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive(self.n_prompts, "n_prompts")?;
        self.lengths.check("lengths")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
    pub seed: u64,
    pub n_prompts: usize,
    pub lengths: Lengths,
    /// Number of top-scoring opponent heads to ablate.
    pub top_k: usize,
    /// Explicit heads; replaces the top-k ranking when set.
    pub heads: Option<Vec<HeadId>>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            model: ModelSource::default(),
            game: default_game(),
            role: default_role(),
            seed: 0,
            n_prompts: 60,
            lengths: Lengths::new(1, 20),
            top_k: 5,
            heads: None,
        }
    }
}

impl AblateConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive(self.n_prompts, "n_prompts")?;
        self.lengths.check("lengths")
    }
}

/// How the steering direction is found.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectionConfig {
    pub method: DirectionMethod,
    pub layer: usize,
    pub n_contrast: usize,
    pub contrast_len: usize,
}

impl Default for DirectionConfig {
    fn default() -> Self {
        DirectionConfig {
            method: DirectionMethod::MeanDiff,
            layer: 2,
            n_contrast: 100,
            contrast_len: 6,
        }
    }
}

impl DirectionConfig {
    fn validate(&self) -> Result<(), CliError> {
        positive(self.n_contrast, "direction.n_contrast")?;
        positive(self.contrast_len, "direction.contrast_len")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteerConfig {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
    pub seed: u64,
    pub direction: DirectionConfig,
    /// Layers whose residual state receives `alpha * v`.
    pub layers: Vec<usize>,
    pub alpha: Grid,
    pub n_prompts: usize,
    pub lengths: Lengths,
    pub temperature: f64,
}

impl Default for SteerConfig {
    fn default() -> Self {
        SteerConfig {
            model: ModelSource::default(),
            game: default_game(),
            role: default_role(),
            seed: 0,
            direction: DirectionConfig::default(),
            layers: vec![0, 1, 2],
            alpha: Grid {
                start: -20.0,
                stop: 40.0,
                step: 5.0,
            },
            n_prompts: 100,
            lengths: Lengths::new(1, 20),
            temperature: 0.7,
        }
    }
}

impl SteerConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.direction.validate()?;
        positive(self.n_prompts, "n_prompts")?;
        self.lengths.check("lengths")?;
        if self.layers.is_empty() {
            return Err(CliError::Config("layers: list at least one layer".into()));
        }
        self.alpha.values("alpha")?;
        temperature(self.temperature, "temperature")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClampConfig {
    pub model: ModelSource,
    pub game: GameRef,
    pub role: Player,
    pub seed: u64,
    pub direction: DirectionConfig,
    /// Layer whose projection is clamped; defaults to the direction layer.
    pub layer: Option<usize>,
    pub c: Grid,
    pub n_prompts: usize,
    pub lengths: Lengths,
    pub temperature: f64,
}

impl Default for ClampConfig {
    fn default() -> Self {
        ClampConfig {
            model: ModelSource::default(),
            game: default_game(),
            role: default_role(),
            seed: 0,
            direction: DirectionConfig::default(),
            layer: None,
            c: Grid {
                start: -30.0,
                stop: 30.0,
                step: 5.0,
            },
            n_prompts: 100,
            lengths: Lengths::new(1, 20),
            temperature: 1.0,
        }
    }
}

impl ClampConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.direction.validate()?;
        positive(self.n_prompts, "n_prompts")?;
        self.lengths.check("lengths")?;
        self.c.values("c")?;
        temperature(self.temperature, "temperature")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(name: &str, text: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("equilens-cli-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn grid_counts_inclusive_points() {
        let g = Grid {
            start: -20.0,
            stop: 40.0,
            step: 1.0,
        };
        assert_eq!(g.values("alpha").unwrap().len(), 61);
        assert_eq!(SteerConfig::default().alpha.values("alpha").unwrap().len(), 13);
        let bad = Grid { step: 0.0, ..g };
        assert!(bad.values("alpha").is_err());
    }

    #[test]
    fn unknown_key_names_its_path() {
        let p = write("probe.toml", "n_prompts = 10\n[lengths]\nmin = 1\nmax = 5\nmaxx = 3\n");
        let err = load::<ProbeConfig>(&p).unwrap_err().to_string();
        assert!(err.contains("probe.toml") && err.contains("lengths"), "{err}");
    }

    #[test]
    fn json_and_toml_agree() {
        let t = write("lens.toml", "n_prompts = 7\nrole = \"B\"\n[model]\nsource = \"planted\"\nweight_seed = 3\n");
        let j = write("lens.json", r#"{"n_prompts": 7, "role": "B", "model": {"source": "planted", "weight_seed": 3}}"#);
        let a: LensConfig = load(&t).unwrap();
        let b: LensConfig = load(&j).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.n_prompts, 7);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load::<LensConfig>(Path::new("/nonexistent/plan.toml")).unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("/nonexistent/plan.toml")));
    }
}
