//! Linear probes: L2-regularised logistic regression fitted by full-batch
//! gradient descent, scored by stratified k-fold cross-validation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InterpError;
use crate::model::tensor::dot;
use crate::model::ResidualTrace;

pub const LAMBDA: f64 = 1e-3;
pub const MAX_ITERS: usize = 10_000;
pub const LOSS_TOL: f64 = 1e-8;
pub const DEFAULT_FOLDS: usize = 5;
pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeLabel {
    NashAction,
    OppLastMove,
    Cooperated,
}

impl ProbeLabel {
    pub fn id(self) -> &'static str {
        match self {
            ProbeLabel::NashAction => "nash_action",
            ProbeLabel::OppLastMove => "opp_last_move",
            ProbeLabel::Cooperated => "cooperated",
        }
    }
}

impl std::str::FromStr for ProbeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nash_action" => Ok(ProbeLabel::NashAction),
            "opp_last_move" => Ok(ProbeLabel::OppLastMove),
            "cooperated" => Ok(ProbeLabel::Cooperated),
            other => Err(format!("unknown probe label '{other}'")),
        }
    }
}

/// Residual vectors of one layer with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub layer: usize,
}

impl ProbeDataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, layer: usize) -> Result<Self, InterpError> {
        if x.len() != y.len() {
            return Err(InterpError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&v| v > 1) {
            return Err(InterpError::InvalidArgument(format!("label {bad} is not 0 or 1")));
        }
        let d = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != d) {
            return Err(InterpError::InvalidArgument("rows differ in width".into()));
        }
        let ones = y.iter().filter(|&&v| v == 1).count();
        if ones == 0 || ones == y.len() {
            return Err(InterpError::SingleClass);
        }
        Ok(ProbeDataset { x, y, layer })
    }

    /// Dataset for `layer` from traces and per-trace labels.
    pub fn from_traces(traces: &[ResidualTrace], labels: &[u8], layer: usize) -> Result<Self, InterpError> {
        let x = traces.iter().map(|t| t.layer(layer).to_vec()).collect();
        ProbeDataset::new(x, labels.to_vec(), layer)
    }

    fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&v| v == 1).count();
        [self.y.len() - ones, ones]
    }
}

/// A fitted probe in the original coordinates: `p(y=1|x) = σ(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(dot(&self.weights, x) + self.intercept > 0.0)
    }
}

/// `(σ(z), log(1 + e^z))` from a single exponential, stable for any `z`.
fn sigmoid_softplus(z: f64) -> (f64, f64) {
    let e = (-z.abs()).exp();
    let sig = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (sig, z.max(0.0) + e.ln_1p())
}

/// Fits `σ(w·(x − μ) + b)` on mean-centred features with full-batch gradient
/// descent on the mean log-loss plus `λ/2 ‖w‖²`. The step is `1/L` for the
/// smoothness bound `L = ¼·mean‖x − μ‖² + λ`.
pub fn fit_logistic(x: &[Vec<f64>], y: &[u8], lambda: f64) -> LogisticModel {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut mu = vec![0.0; d];
    for row in x {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let xc = DMatrix::from_fn(x.len(), d, |i, j| x[i][j] - mu[j]);
    let t = DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)));
    let sq = xc.norm_squared() / n;
    // The intercept behaves like a constant feature of value 1.
    let step = 1.0 / (0.25 * (sq + 1.0) + lambda);

    let mut w = DVector::zeros(d);
    let mut b = 0.0;
    let mut z = DVector::zeros(x.len());
    let mut err = DVector::zeros(x.len());
    let mut grad = DVector::zeros(d);
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=MAX_ITERS {
        iterations = it;
        // One pass yields both the loss at the current point and its gradient.
        z.gemv(1.0, &xc, &w, 0.0);
        let mut data = 0.0;
        for ((zi, ei), ti) in z.iter_mut().zip(err.iter_mut()).zip(t.iter()) {
            *zi += b;
            let (sig, sp) = sigmoid_softplus(*zi);
            data += sp - ti * *zi;
            *ei = sig - ti;
        }
        let cur = data / n + 0.5 * lambda * w.norm_squared();
        if (prev - cur).abs() < LOSS_TOL {
            break;
        }
        prev = cur;
        grad.gemv_tr(1.0 / n, &xc, &err, 0.0);
        grad.axpy(lambda, &w, 1.0);
        w.axpy(-step, &grad, 1.0);
        b -= step * err.sum() / n;
    }
    let w: Vec<f64> = w.iter().copied().collect();
    LogisticModel {
        intercept: b - dot(&w, &mu),
        weights: w,
        iterations,
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; y.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            assign[i] = k % folds;
        }
    }
    assign
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub layer: usize,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Normal of the probe fitted on the whole dataset.
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Cross-validated accuracy plus a probe fitted on all rows.
pub fn train_probe(data: &ProbeDataset, folds: usize, seed: u64) -> Result<ProbeResult, InterpError> {
    if folds < 2 {
        return Err(InterpError::InvalidArgument("need at least 2 folds".into()));
    }
    let counts = data.class_counts();
    let min = counts[0].min(counts[1]);
    if min < MIN_PER_CLASS.max(folds) {
        return Err(InterpError::TooFewRows { min_class: min });
    }
    let assign = stratified_folds(&data.y, folds, seed);
    let mut fold_accuracies = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut xt, mut yt, mut xv, mut yv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &a) in assign.iter().enumerate() {
            if a == f {
                xv.push(data.x[i].clone());
                yv.push(data.y[i]);
            } else {
                xt.push(data.x[i].clone());
                yt.push(data.y[i]);
            }
        }
        let m = fit_logistic(&xt, &yt, LAMBDA);
        let correct = xv.iter().zip(&yv).filter(|(x, &t)| m.predict(x) == t).count();
        fold_accuracies.push(correct as f64 / xv.len() as f64);
    }
    let full = fit_logistic(&data.x, &data.y, LAMBDA);
    Ok(ProbeResult {
        layer: data.layer,
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / folds as f64,
        fold_accuracies,
        weights: full.weights,
        intercept: full.intercept,
    })
}

/// Probe results for every layer of a set of traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub label: ProbeLabel,
    pub n: usize,
    pub layers: Vec<ProbeResult>,
}

impl ProbeReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.layers.iter().map(|r| r.mean_accuracy).collect()
    }
}

/// Trains one probe per layer `0..=L`. Layers are fitted in parallel; the
/// result is in layer order.
pub fn probe_layers(
    traces: &[ResidualTrace],
    labels: &[u8],
    label: ProbeLabel,
    folds: usize,
    seed: u64,
) -> Result<ProbeReport, InterpError> {
    use rayon::prelude::*;
    if traces.len() != labels.len() {
        return Err(InterpError::LengthMismatch {
            left: traces.len(),
            right: labels.len(),
        });
    }
    let n_layers = traces.first().ok_or(InterpError::Empty)?.n_layers();
    let layers = (0..=n_layers)
        .into_par_iter()
        .map(|l| train_probe(&ProbeDataset::from_traces(traces, labels, l)?, folds, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProbeReport {
        label,
        n: traces.len(),
        layers,
    })
}
