use std::path::{Path, PathBuf};

use equilens::agents::{sample_action, AgentError, AgentSpec};
use equilens::engine::{
    read_run, run_match, run_tournament, seat_rng, write_run, write_summary, MatchConfig, MatchRecord, PromptTemplate,
    Summary,
};
use equilens::interp::export::{
    distance_plot, lens_plot, probe_plot, sweep_plot, write_ablation_csv, write_head_scores_csv, write_json,
    write_lens_csv, write_probe_csv, write_sweep_csv, PlotData,
};
use equilens::interp::{
    ablation_experiment, clamp_sweep, collect_all, contrast_prompts, extract_direction, find_override_layer,
    logit_lens, probe_layers, random_prompts, score_opponent_heads, steering_sweep, top_heads, LensSeries,
    PositionRule, ProbeLabel, PromptItem, SteeringVector,
};
use equilens::model::Model;
use equilens::{Game, ResidualTrace};
use serde::Serialize;

use crate::config::{self, DirectionConfig, Subject};
use crate::manifest::Manifest;
use crate::{CliError, Common, ReportArgs};

pub const PLOTS_DIR: &str = "plots";
pub const REPORT_FILE: &str = "report.json";

fn out_dir(c: &Common, command: &str, seed: u64) -> Result<PathBuf, CliError> {
    let dir = match &c.out {
        Some(d) => d.clone(),
        None => {
            let root = std::env::var_os("EQUILENS_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{command}-{seed}"))
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn template(version: &str) -> Result<PromptTemplate, CliError> {
    let path = Path::new(version);
    let t = if path.is_file() { PromptTemplate::load(path) } else { PromptTemplate::builtin(version) };
    t.map_err(|e| CliError::Config(format!("--template-version: {e}")))
}

fn write_plot(dir: &Path, plot: &PlotData) -> Result<(), CliError> {
    plot.write(&dir.join(PLOTS_DIR).join(plot.kind.id())).map_err(CliError::runtime)
}

fn io_path(path: &Path) -> impl Fn(equilens::interp::InterpError) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn build_agent(spec: &AgentSpec, key: &str) -> Result<Box<dyn equilens::agents::Agent>, CliError> {
    spec.build().map_err(|e| match e {
        AgentError::Config(m) => CliError::Config(format!("{key}: {m}")),
        other => CliError::Runtime(format!("{key}: {other}")),
    })
}

fn distance_series(records: &[MatchRecord]) -> Vec<(String, Vec<f64>)> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.distance_series.is_empty())
        .map(|(n, r)| {
            let name = r.cell.as_ref().map_or_else(|| format!("match-{n}"), |c| c.id.clone());
            (name, r.distance_series.clone())
        })
        .collect()
}

fn write_records(dir: &Path, records: &[MatchRecord]) -> Result<Summary, CliError> {
    let summary = write_run(dir, records).map_err(CliError::runtime)?;
    write_plot(dir, &distance_plot(&distance_series(records)).map_err(CliError::runtime)?)?;
    Ok(summary)
}

pub fn play(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::PlayConfig = config::require(c.config.as_deref(), "play")?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.include_mixed_eq {
        cfg.include_mixed_eq = m;
    }
    let game = cfg.game.resolve().map_err(|e| CliError::Config(format!("game: {e}")))?;
    let mut mc = MatchConfig::new(game, cfg.mode, cfg.seed, cfg.agent_a.id(), cfg.agent_b.id()).with_rounds(cfg.rounds);
    mc.temperature = cfg.temperature;
    mc.include_mixed_eq = cfg.include_mixed_eq;
    mc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let template = template(&c.template_version)?;
    let mut a = build_agent(&cfg.agent_a, "agent_a")?;
    let mut b = build_agent(&cfg.agent_b, "agent_b")?;
    let record = run_match(a.as_mut(), b.as_mut(), &mc, &template).map_err(CliError::runtime)?;
    let dir = out_dir(c, "play", cfg.seed)?;
    write_records(&dir, std::slice::from_ref(&record))?;
    Manifest::new("play", cfg.seed, template.version(), &cfg)?.write(&dir)?;
    match record.final_distance {
        Some(d) if record.is_valid() => println!("final distance {d:.4}"),
        _ => println!("match invalid: {:?}", record.diagnostics.first().map(|d| &d.message)),
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn tournament(c: &Common) -> Result<(), CliError> {
    let mut plan: config::TournamentConfig = config::require(c.config.as_deref(), "tournament")?;
    if let Some(s) = c.seed {
        plan.base_seed = s;
    }
    if let Some(m) = c.include_mixed_eq {
        plan.include_mixed_eq = m;
    }
    plan.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let template = template(&c.template_version)?;
    let jobs = c.jobs.unwrap_or_else(rayon::current_num_threads);
    let records = run_tournament(&plan, &template, jobs).map_err(CliError::runtime)?;
    let dir = out_dir(c, "tournament", plan.base_seed)?;
    let summary = write_records(&dir, &records)?;
    Manifest::new("tournament", plan.base_seed, template.version(), &plan)?.write(&dir)?;
    print!("{}", summary.to_text());
    println!("wrote {} matches to {}", records.len(), dir.display());
    Ok(())
}

pub fn report(r: &ReportArgs) -> Result<(), CliError> {
    if !r.runs.is_dir() {
        return Err(CliError::Config(format!("{}: not a run directory", r.runs.display())));
    }
    let records = read_run(&r.runs).map_err(|e| CliError::Runtime(format!("{}: {e}", r.runs.display())))?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no match records found", r.runs.display())));
    }
    let summary = write_summary(&r.runs, &records).map_err(CliError::runtime)?;
    write_plot(&r.runs, &distance_plot(&distance_series(&records)).map_err(CliError::runtime)?)?;
    print!("{}", summary.to_text());
    Ok(())
}

/// Everything an interp command works on, built from its config.
struct Lab {
    subject: Subject,
    game: Game,
    model: Model,
    action_ids: [usize; 2],
    seed: u64,
    dir: PathBuf,
}

impl Lab {
    fn open(c: &Common, command: &str, subject: Subject, seed: u64) -> Result<Self, CliError> {
        let game = subject.game()?;
        let model = subject.model.build(seed)?;
        let action_ids = model
            .tokenizer()
            .action_ids(&game, subject.role)
            .map_err(|e| CliError::Config(format!("game: {e}")))?;
        let dir = out_dir(c, command, seed)?;
        Ok(Lab {
            subject,
            game,
            model,
            action_ids,
            seed,
            dir,
        })
    }

    fn prompts(&self, n: usize, lengths: config::Lengths, salt: u64) -> Result<Vec<PromptItem>, CliError> {
        let tok = self.model.tokenizer();
        random_prompts(&tok, &self.game, self.subject.role, n, lengths.range(), self.seed.wrapping_add(salt))
            .map_err(CliError::runtime)
    }

    fn traces(&self, items: &[PromptItem]) -> Result<Vec<ResidualTrace>, CliError> {
        collect_all(&self.model, items, PositionRule::Decision).map_err(CliError::runtime)
    }

    fn check_layer(&self, layer: usize, key: &str) -> Result<(), CliError> {
        let n = self.model.spec.n_layers;
        if layer > n {
            return Err(CliError::Config(format!("{key}: layer {layer} is outside 0..={n}")));
        }
        Ok(())
    }

    fn direction(&self, d: &DirectionConfig) -> Result<SteeringVector, CliError> {
        self.check_layer(d.layer, "direction.layer")?;
        let tok = self.model.tokenizer();
        let (coop, defect) =
            contrast_prompts(&tok, &self.game, self.subject.role, d.n_contrast, d.contrast_len, self.seed.wrapping_add(2))
                .map_err(CliError::runtime)?;
        let (tc, td) = (self.traces(&coop)?, self.traces(&defect)?);
        let v = extract_direction(&tc, &td, d.layer, d.method).map_err(CliError::runtime)?;
        write_json(&self.dir.join("direction.json"), &v).map_err(CliError::runtime)?;
        Ok(v)
    }

    fn finish<T: Serialize>(&self, command: &str, report: &impl Serialize, config: &T) -> Result<(), CliError> {
        write_json(&self.dir.join(REPORT_FILE), report).map_err(io_path(&self.dir))?;
        Manifest::new(command, self.seed, "none", config)?.write(&self.dir)?;
        println!("wrote {}", self.dir.display());
        Ok(())
    }
}

fn resolve_seed(c: &Common, from_config: &mut u64) -> u64 {
    if let Some(s) = c.seed {
        *from_config = s;
    }
    *from_config
}

pub fn probe(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::ProbeConfig = config::load_or_default(c.config.as_deref())?;
    let seed = resolve_seed(c, &mut cfg.seed);
    cfg.validate()?;
    let lab = Lab::open(c, "probe", cfg.subject(), seed)?;
    let nash = if cfg.labels.contains(&ProbeLabel::NashAction) {
        Some(lab.subject.nash_action(&lab.game)?)
    } else {
        None
    };
    let items = lab.prompts(cfg.n_prompts, cfg.lengths, 1)?;
    let traces = lab.traces(&items)?;
    let mut reports = Vec::new();
    for &label in &cfg.labels {
        let y: Vec<u8> = match label {
            ProbeLabel::OppLastMove => items.iter().map(|p| p.opp_last_move().unwrap_or(0)).collect(),
            ProbeLabel::Cooperated => items.iter().map(|p| p.cooperated().unwrap_or(0)).collect(),
            ProbeLabel::NashAction => {
                let nash = nash.expect("checked above");
                let mut rng = seat_rng(seed.wrapping_add(3), lab.subject.role);
                traces
                    .iter()
                    .map(|t| {
                        let l = lab.model.unembed_vector(t.layers.last().expect("at least h_0"));
                        let logits = [l[lab.action_ids[0]], l[lab.action_ids[1]]];
                        u8::from(sample_action(logits, lab.action_ids, cfg.temperature, &mut rng) == nash)
                    })
                    .collect()
            }
        };
        let report = probe_layers(&traces, &y, label, cfg.folds, seed)
            .map_err(|e| CliError::Runtime(format!("probe {}: {e}", label.id())))?;
        println!("{}: {}", label.id(), fmt_list(&report.accuracies()));
        reports.push(report);
    }
    write_probe_csv(&lab.dir.join("probe.csv"), &reports).map_err(CliError::runtime)?;
    write_plot(&lab.dir, &probe_plot(&reports).map_err(CliError::runtime)?)?;
    lab.finish("probe", &reports, &cfg)
}

#[derive(Serialize)]
struct LensReport {
    n_prompts: usize,
    override_layer: Option<usize>,
    mean: LensSeries,
}

pub fn lens(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::LensConfig = config::load_or_default(c.config.as_deref())?;
    let seed = resolve_seed(c, &mut cfg.seed);
    cfg.validate()?;
    let lab = Lab::open(c, "lens", cfg.subject(), seed)?;
    let items = lab.prompts(cfg.n_prompts, cfg.lengths, 1)?;
    let series: Vec<LensSeries> = lab
        .traces(&items)?
        .iter()
        .map(|t| logit_lens(t, &lab.model.unembed, lab.action_ids))
        .collect();
    let mean = LensSeries::mean(&series).ok_or_else(|| CliError::Runtime("no prompts".into()))?;
    let override_layer = lab.game.nash_action(lab.subject.role).and_then(|n| find_override_layer(&mean, n));
    let labels = lab.game.actions(lab.subject.role);
    let labels = [labels[0].as_str(), labels[1].as_str()];
    write_lens_csv(&lab.dir.join("lens.csv"), &mean, labels).map_err(CliError::runtime)?;
    write_plot(&lab.dir, &lens_plot(&mean, labels).map_err(CliError::runtime)?)?;
    match override_layer {
        Some(l) => println!("override layer {l}"),
        None => println!("no override layer"),
    }
    let report = LensReport {
        n_prompts: items.len(),
        override_layer,
        mean,
    };
    lab.finish("lens", &report, &cfg)
}

pub fn ablate(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::AblateConfig = config::load_or_default(c.config.as_deref())?;
    let seed = resolve_seed(c, &mut cfg.seed);
    cfg.validate()?;
    let lab = Lab::open(c, "ablate", cfg.subject(), seed)?;
    let nash = lab.subject.nash_action(&lab.game)?;
    let tok = lab.model.tokenizer();
    let prompts: Vec<Vec<usize>> = lab.prompts(cfg.n_prompts, cfg.lengths, 1)?.into_iter().map(|p| p.tokens).collect();
    let positions: Vec<Vec<usize>> = prompts.iter().map(|t| tok.opponent_positions(t)).collect();
    let scores = score_opponent_heads(&lab.model, &prompts, &positions).map_err(CliError::runtime)?;
    let heads = match &cfg.heads {
        Some(h) => {
            lab.model.zero_ablate(h).map_err(|e| CliError::Config(format!("heads: {e}")))?;
            h.clone()
        }
        None => top_heads(&scores, cfg.top_k),
    };
    let table = ablation_experiment(&lab.model, &heads, &prompts, lab.action_ids, nash).map_err(CliError::runtime)?;
    write_head_scores_csv(&lab.dir.join("head_scores.csv"), &scores).map_err(CliError::runtime)?;
    write_ablation_csv(&lab.dir.join("ablation.csv"), &table).map_err(CliError::runtime)?;
    println!("baseline P(Nash) {:.4}", table.baseline_p_nash);
    for row in &table.rows {
        println!("{}: dP(Nash) {:+.4}", row.condition, row.delta_p_nash);
    }
    lab.finish("ablate", &table, &cfg)
}

pub fn steer(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::SteerConfig = config::load_or_default(c.config.as_deref())?;
    let seed = resolve_seed(c, &mut cfg.seed);
    cfg.validate()?;
    let lab = Lab::open(c, "steer", cfg.subject(), seed)?;
    let nash = lab.subject.nash_action(&lab.game)?;
    for &l in &cfg.layers {
        lab.check_layer(l, "layers")?;
    }
    let grid = cfg.alpha.values("alpha")?;
    let v = lab.direction(&cfg.direction)?;
    let prompts: Vec<Vec<usize>> = lab.prompts(cfg.n_prompts, cfg.lengths, 1)?.into_iter().map(|p| p.tokens).collect();
    let sweep = steering_sweep(&lab.model, &v.direction, &cfg.layers, &grid, &prompts, cfg.temperature, lab.action_ids, nash)
        .map_err(CliError::runtime)?;
    write_sweep_csv(&lab.dir.join("sweep.csv"), &sweep).map_err(CliError::runtime)?;
    write_plot(&lab.dir, &sweep_plot(&sweep).map_err(CliError::runtime)?)?;
    println!("spearman {:.4} over {} alphas", sweep.spearman, sweep.points.len());
    lab.finish("steer", &sweep, &cfg)
}

pub fn clamp(c: &Common) -> Result<(), CliError> {
    let mut cfg: config::ClampConfig = config::load_or_default(c.config.as_deref())?;
    let seed = resolve_seed(c, &mut cfg.seed);
    cfg.validate()?;
    let lab = Lab::open(c, "clamp", cfg.subject(), seed)?;
    let nash = lab.subject.nash_action(&lab.game)?;
    let layer = cfg.layer.unwrap_or(cfg.direction.layer);
    lab.check_layer(layer, "layer")?;
    let grid = cfg.c.values("c")?;
    let v = lab.direction(&cfg.direction)?;
    let prompts: Vec<Vec<usize>> = lab.prompts(cfg.n_prompts, cfg.lengths, 1)?.into_iter().map(|p| p.tokens).collect();
    let sweep = clamp_sweep(&lab.model, &v.direction, layer, &grid, &prompts, cfg.temperature, lab.action_ids, nash)
        .map_err(CliError::runtime)?;
    write_sweep_csv(&lab.dir.join("sweep.csv"), &sweep).map_err(CliError::runtime)?;
    write_plot(&lab.dir, &sweep_plot(&sweep).map_err(CliError::runtime)?)?;
    println!(
        "pearson {:.4}, max clamp error {:.1e}",
        sweep.pearson.unwrap_or(f64::NAN),
        sweep.max_clamp_error.unwrap_or(f64::NAN)
    );
    lab.finish("clamp", &sweep, &cfg)
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}
