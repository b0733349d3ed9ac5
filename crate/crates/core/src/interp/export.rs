//! Tabular outputs and plot-ready series.
//!
//! A plot is written as a directory holding `series.csv` (long format:
//! `series,x,y`) and `meta.json` (kind, title, axis labels).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::heads::{AblationTable, HeadScore};
use super::lens::LensSeries;
use super::probe::ProbeReport;
use super::sweep::SweepResult;
use super::InterpError;

pub const SERIES_FILE: &str = "series.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    DistanceVsRound,
    ProbeAccuracyVsLayer,
    LensProbabilityVsLayer,
    PVsAlpha,
    PVsC,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::DistanceVsRound,
        PlotKind::ProbeAccuracyVsLayer,
        PlotKind::LensProbabilityVsLayer,
        PlotKind::PVsAlpha,
        PlotKind::PVsC,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PlotKind::DistanceVsRound => "distance-vs-round",
            PlotKind::ProbeAccuracyVsLayer => "probe-accuracy-vs-layer",
            PlotKind::LensProbabilityVsLayer => "lens-probability-vs-layer",
            PlotKind::PVsAlpha => "p-vs-alpha",
            PlotKind::PVsC => "p-vs-c",
        }
    }

    fn axes(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::DistanceVsRound => ("round", "nash distance"),
            PlotKind::ProbeAccuracyVsLayer => ("layer", "probe accuracy"),
            PlotKind::LensProbabilityVsLayer => ("layer", "P(action)"),
            PlotKind::PVsAlpha => ("alpha", "P(action)"),
            PlotKind::PVsC => ("c", "P(action)"),
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = InterpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| InterpError::UnknownPlotKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub title: String,
    pub series: Vec<Series>,
}

impl PlotData {
    pub fn new(kind: PlotKind, title: impl Into<String>) -> Self {
        PlotData {
            kind,
            title: title.into(),
            series: Vec::new(),
        }
    }

    pub fn with_series(mut self, name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self, InterpError> {
        if x.len() != y.len() {
            return Err(InterpError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        self.series.push(Series { name: name.into(), x, y });
        Ok(self)
    }

    pub fn meta(&self) -> PlotMeta {
        let (x, y) = self.kind.axes();
        PlotMeta {
            kind: self.kind,
            title: self.title.clone(),
            x_label: x.into(),
            y_label: y.into(),
            series: self.series.iter().map(|s| s.name.clone()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), InterpError> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(SERIES_FILE))?;
        w.write_record(["series", "x", "y"])?;
        for s in &self.series {
            for (x, y) in s.x.iter().zip(&s.y) {
                w.write_record([s.name.as_str(), &x.to_string(), &y.to_string()])?;
            }
        }
        w.flush()?;
        fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, InterpError> {
        let meta: PlotMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
        let mut series: Vec<Series> = meta
            .series
            .iter()
            .map(|n| Series {
                name: n.clone(),
                x: Vec::new(),
                y: Vec::new(),
            })
            .collect();
        let mut r = csv::Reader::from_path(dir.join(SERIES_FILE))?;
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, InterpError> {
                rec.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| InterpError::InvalidArgument(format!("bad number in {SERIES_FILE}")))
            };
            let name = rec.get(0).unwrap_or_default();
            let s = series
                .iter_mut()
                .find(|s| s.name == name)
                .ok_or_else(|| InterpError::InvalidArgument(format!("series '{name}' missing from {META_FILE}")))?;
            s.x.push(parse(1)?);
            s.y.push(parse(2)?);
        }
        Ok(PlotData {
            kind: meta.kind,
            title: meta.title,
            series,
        })
    }
}

fn layer_axis(n: usize) -> Vec<f64> {
    (0..n).map(|l| l as f64).collect()
}

pub fn probe_plot(reports: &[ProbeReport]) -> Result<PlotData, InterpError> {
    reports.iter().try_fold(
        PlotData::new(PlotKind::ProbeAccuracyVsLayer, "Probe accuracy by layer"),
        |p, r| {
            let acc = r.accuracies();
            let xs = r.layers.iter().map(|l| l.layer as f64).collect();
            p.with_series(r.label.id(), xs, acc)
        },
    )
}

pub fn lens_plot(series: &LensSeries, labels: [&str; 2]) -> Result<PlotData, InterpError> {
    let n = series.probs.len();
    PlotData::new(PlotKind::LensProbabilityVsLayer, "Logit lens")
        .with_series(labels[0], layer_axis(n), series.of(0))?
        .with_series(labels[1], layer_axis(n), series.of(1))
}

pub fn sweep_plot(result: &SweepResult) -> Result<PlotData, InterpError> {
    let kind = if result.knob == "c" { PlotKind::PVsC } else { PlotKind::PVsAlpha };
    PlotData::new(kind, format!("P vs {}", result.knob))
        .with_series("p_coop", result.knobs(), result.p_coop())?
        .with_series("p_nash", result.knobs(), result.p_nash())
}

pub fn distance_plot(runs: &[(String, Vec<f64>)]) -> Result<PlotData, InterpError> {
    runs.iter().try_fold(PlotData::new(PlotKind::DistanceVsRound, "Nash distance by round"), |p, (name, d)| {
        p.with_series(name.clone(), (1..=d.len()).map(|r| r as f64).collect(), d.clone())
    })
}

pub fn write_probe_csv(path: &Path, reports: &[ProbeReport]) -> Result<(), InterpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "layer", "mean_accuracy", "fold_accuracies"])?;
    for r in reports {
        for l in &r.layers {
            let folds: Vec<String> = l.fold_accuracies.iter().map(|a| format!("{a:.4}")).collect();
            w.write_record([
                r.label.id().to_string(),
                l.layer.to_string(),
                format!("{:.6}", l.mean_accuracy),
                folds.join(";"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_lens_csv(path: &Path, series: &LensSeries, labels: [&str; 2]) -> Result<(), InterpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["layer", labels[0], labels[1]])?;
    for (l, p) in series.probs.iter().enumerate() {
        w.write_record([l.to_string(), format!("{:.6}", p[0]), format!("{:.6}", p[1])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_head_scores_csv(path: &Path, scores: &[HeadScore]) -> Result<(), InterpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "head", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.head.to_string(), format!("{:.6}", s.score)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ablation_csv(path: &Path, table: &AblationTable) -> Result<(), InterpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "heads", "p_nash", "delta_p_nash"])?;
    w.write_record(["baseline", "", &format!("{:.6}", table.baseline_p_nash), "0.000000"])?;
    for r in &table.rows {
        let heads: Vec<String> = r.heads.iter().map(ToString::to_string).collect();
        w.write_record([
            r.condition.clone(),
            heads.join(";"),
            format!("{:.6}", r.p_nash),
            format!("{:.6}", r.delta_p_nash),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<(), InterpError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([result.knob.as_str(), "p_coop", "p_nash", "n"])?;
    for p in &result.points {
        w.write_record([p.knob.to_string(), format!("{:.6}", p.p_coop), format!("{:.6}", p.p_nash), p.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), InterpError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
