//! Dose-response sweeps: additive steering over α and direction clamping
//! over c.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lens::action_distribution;
use super::stats::{mean, pearson, spearman};
use super::InterpError;
use crate::model::tensor::{dot, norm};
use crate::model::{HookPlan, Model};

/// Default steering grid: −20 to 40 in steps of 5.
pub fn default_alpha_grid() -> Vec<f64> {
    (-4..=8).map(|k| 5.0 * k as f64).collect()
}

/// Default clamp grid: −30 to 30 in steps of 5.
pub fn default_clamp_grid() -> Vec<f64> {
    (-6..=6).map(|k| 5.0 * k as f64).collect()
}

pub fn check_grid(grid: &[f64]) -> Result<(), InterpError> {
    if grid.len() < 2 {
        return Err(InterpError::TooFewPoints(grid.len()));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(InterpError::GridNotIncreasing);
    }
    Ok(())
}

/// `h · v̂`.
pub fn projection(h: &[f64], direction: &[f64]) -> f64 {
    dot(h, direction) / norm(direction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub knob: f64,
    pub p_coop: f64,
    pub p_nash: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `alpha` or `c`.
    pub knob: String,
    pub temperature: f64,
    pub points: Vec<SweepPoint>,
    /// Spearman ρ between the knob and mean P(cooperate).
    pub spearman: f64,
    /// Pearson r over all (knob, per-prompt P(cooperate)) pairs. Clamp sweeps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
    /// Largest `|h · v̂ − c|` seen at the clamp layer. Clamp sweeps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clamp_error: Option<f64>,
}

impl SweepResult {
    pub fn knobs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.knob).collect()
    }

    pub fn p_coop(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_coop).collect()
    }

    pub fn p_nash(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_nash).collect()
    }
}

struct Run {
    p_coop: Vec<f64>,
    projections: Vec<f64>,
}

fn run_plan(
    model: &Model,
    prompts: &[Vec<usize>],
    plan: &HookPlan,
    temperature: f64,
    action_ids: [usize; 2],
    read_layer: usize,
    direction: &[f64],
) -> Result<Run, InterpError> {
    let rows = prompts
        .par_iter()
        .map(|t| -> Result<(f64, f64), InterpError> {
            let out = model.forward(t, plan)?;
            let h = out.trace.layers.last().expect("at least h_0");
            let p = action_distribution(h, &model.unembed, action_ids, temperature)[0];
            Ok((p, projection(&out.trace.layers[read_layer], direction)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (p_coop, projections) = rows.into_iter().unzip();
    Ok(Run { p_coop, projections })
}

fn point(knob: f64, p_coop: &[f64], nash_action: usize) -> SweepPoint {
    let pc = mean(p_coop);
    SweepPoint {
        knob,
        p_coop: pc,
        p_nash: if nash_action == 0 { pc } else { 1.0 - pc },
        n: p_coop.len(),
    }
}

fn validate_common(model: &Model, direction: &[f64], prompts: &[Vec<usize>], temperature: f64) -> Result<(), InterpError> {
    if prompts.is_empty() {
        return Err(InterpError::Empty);
    }
    if direction.len() != model.spec.d_model {
        return Err(InterpError::LengthMismatch {
            left: direction.len(),
            right: model.spec.d_model,
        });
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(InterpError::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    Ok(())
}

/// Adds `α·v` at each of `layers` for every α in the grid and reports the
/// mean output distribution at `temperature`.
#[allow(clippy::too_many_arguments)]
pub fn steering_sweep(
    model: &Model,
    direction: &[f64],
    layers: &[usize],
    alpha_grid: &[f64],
    prompts: &[Vec<usize>],
    temperature: f64,
    action_ids: [usize; 2],
    nash_action: usize,
) -> Result<SweepResult, InterpError> {
    validate_common(model, direction, prompts, temperature)?;
    check_grid(alpha_grid)?;
    if layers.is_empty() {
        return Err(InterpError::InvalidArgument("no steering layers".into()));
    }
    let read = layers[0];
    let mut points = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let plan = layers
            .iter()
            .fold(HookPlan::new(), |p, &l| p.inject(l, direction.to_vec(), alpha));
        let run = run_plan(model, prompts, &plan, temperature, action_ids, read, direction)?;
        points.push(point(alpha, &run.p_coop, nash_action));
    }
    let knobs: Vec<f64> = points.iter().map(|p| p.knob).collect();
    let pc: Vec<f64> = points.iter().map(|p| p.p_coop).collect();
    Ok(SweepResult {
        knob: "alpha".into(),
        temperature,
        spearman: spearman(&knobs, &pc)?,
        points,
        pearson: None,
        max_clamp_error: None,
    })
}

/// Clamps `h_layer · v̂ = c` for every c in the grid. `direction` must be
/// unit norm.
#[allow(clippy::too_many_arguments)]
pub fn clamp_sweep(
    model: &Model,
    direction: &[f64],
    layer: usize,
    grid: &[f64],
    prompts: &[Vec<usize>],
    temperature: f64,
    action_ids: [usize; 2],
    nash_action: usize,
) -> Result<SweepResult, InterpError> {
    validate_common(model, direction, prompts, temperature)?;
    check_grid(grid)?;
    if (norm(direction) - 1.0).abs() > 1e-9 {
        return Err(InterpError::NotUnitVector);
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut max_err = 0.0f64;
    for &c in grid {
        let plan = HookPlan::new().clamp(layer, direction.to_vec(), c);
        let run = run_plan(model, prompts, &plan, temperature, action_ids, layer, direction)?;
        for (&p, &proj) in run.p_coop.iter().zip(&run.projections) {
            xs.push(c);
            ys.push(p);
            max_err = max_err.max((proj - c).abs());
        }
        points.push(point(c, &run.p_coop, nash_action));
    }
    let knobs: Vec<f64> = points.iter().map(|p| p.knob).collect();
    let pc: Vec<f64> = points.iter().map(|p| p.p_coop).collect();
    Ok(SweepResult {
        knob: "c".into(),
        temperature,
        spearman: spearman(&knobs, &pc)?,
        pearson: Some(pearson(&xs, &ys)?),
        max_clamp_error: Some(max_err),
        points,
    })
}
