//! Trials, sweeps and the files they produce.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::format::{round_json, round_sig, sig};
use super::mnist::{run_mnist, MnistReport};
use crate::analysis::measure_gamma;
use crate::dynamics::overlap;
use crate::error::{Error, Result};
use crate::learning::{train_classes, Brain, PhaseTrace};
use crate::rng::{derive_seed, make_rng};
use crate::stimuli::{
    make_overlapping_class, make_stimulus_class, HalfspaceClass, StimulusClass, StimulusSource,
};

/// Measurements from one trained and evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    /// Support size per class.
    pub support: Vec<usize>,
    /// `|core_i ∩ core_j|` for every pair `i < j`, row-major.
    pub core_overlaps: Vec<usize>,
    /// Per class, the step after which no new neuron entered the cap.
    pub converge_step: Vec<Option<usize>>,
    /// Per class, the mean strengthening of stimulus-core synapses into the
    /// assembly. Empty for halfspaces.
    pub gamma: Vec<f64>,
    /// Mean fraction of an assembly that a test draw evokes: per class for
    /// stimulus classes, `[positive, negative]` for halfspaces.
    pub recall: Vec<f64>,
    #[serde(skip)]
    pub traces: Vec<PhaseTrace>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrialMetrics {
    pub fn mean_support(&self) -> f64 {
        if self.support.is_empty() {
            return 0.0;
        }
        self.support.iter().sum::<usize>() as f64 / self.support.len() as f64
    }

    /// Latest convergence step over classes; `None` if any class never settled.
    pub fn max_converge_step(&self) -> Option<usize> {
        self.converge_step
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TrialOutcome {
    Ok(TrialMetrics),
    Failed(TrialFailure),
}

impl TrialOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            Self::Ok(m) => m.seed,
            Self::Failed(f) => f.seed,
        }
    }

    pub fn trial(&self) -> usize {
        match self {
            Self::Ok(m) => m.trial,
            Self::Failed(f) => f.trial,
        }
    }

    pub fn metrics(&self) -> Option<&TrialMetrics> {
        match self {
            Self::Ok(m) => Some(m),
            Self::Failed(_) => None,
        }
    }
}

/// Accuracy statistics over the successful trials of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub failed: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Trials with accuracy exactly 1.
    pub perfect: usize,
}

impl Summary {
    pub fn of(outcomes: &[TrialOutcome]) -> Self {
        let acc: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.metrics())
            .map(|m| m.accuracy)
            .collect();
        let (mean, min, max) = if acc.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                acc.iter().sum::<f64>() / acc.len() as f64,
                acc.iter().copied().fold(f64::INFINITY, f64::min),
                acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        Self {
            trials: outcomes.len(),
            failed: outcomes.len() - acc.len(),
            mean,
            min,
            max,
            perfect: acc.iter().filter(|&&a| a == 1.0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: Summary,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentResult {
    Trials {
        summary: Summary,
        outcomes: Vec<TrialOutcome>,
    },
    Sweep(Vec<SweepPoint>),
    Mnist(MnistReport),
}

/// Seed of trial `trial` under base seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &format!("trial-{trial}"))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    match config.kind {
        ExperimentKind::Stimulus | ExperimentKind::FourClass | ExperimentKind::Halfspace => {
            let outcomes = run_trials(config);
            Ok(ExperimentResult::Trials {
                summary: Summary::of(&outcomes),
                outcomes,
            })
        }
        ExperimentKind::Sweep => run_sweep(config).map(ExperimentResult::Sweep),
        ExperimentKind::Mnist => run_mnist(config).map(ExperimentResult::Mnist),
    }
}

/// Runs every trial of a single-point experiment, in parallel, sorted by seed.
pub fn run_trials(config: &ExperimentConfig) -> Vec<TrialOutcome> {
    let mut outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect();
    outcomes.sort_by_key(|o| (o.seed(), o.trial()));
    outcomes
}

pub fn run_trial(config: &ExperimentConfig, trial: usize) -> TrialOutcome {
    let seed = trial_seed(config.seed, trial);
    let start = Instant::now();
    let result = match config.kind {
        ExperimentKind::Halfspace => halfspace_trial(config, trial, seed),
        ExperimentKind::Stimulus | ExperimentKind::FourClass => stimulus_trial(config, trial, seed),
        other => Err(Error::Config(format!(
            "'{other}' is not a single-trial experiment"
        ))),
    };
    match result {
        Ok(mut m) => {
            m.wall_time = start.elapsed();
            TrialOutcome::Ok(m)
        }
        Err(e) => TrialOutcome::Failed(TrialFailure {
            trial,
            seed,
            error: e.to_string(),
        }),
    }
}

/// Builds the classes of a stimulus trial, first to last.
pub fn make_classes(
    config: &ExperimentConfig,
    rng: &mut crate::rng::SimRng,
) -> Result<Vec<StimulusClass>> {
    let s = &config.stimulus;
    let (n, k) = (config.model.n, config.model.k);
    let first = make_stimulus_class(k, n, s.r, s.q, rng)?;
    let mut classes = vec![first];
    for _ in 1..s.classes {
        let next = match s.alpha {
            Some(alpha) => make_overlapping_class(&classes[0], alpha, s.r, s.q, rng)?,
            None => make_stimulus_class(k, n, s.r, s.q, rng)?,
        };
        classes.push(next);
    }
    Ok(classes)
}

fn stimulus_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialMetrics> {
    let brain = Brain::new(config.model.at_seed(seed)?)?;
    let mut rng = make_rng(seed, "stimuli");
    let classes = make_classes(config, &mut rng)?;
    let sources: Vec<&dyn StimulusSource> =
        classes.iter().map(|c| c as &dyn StimulusSource).collect();
    let model = train_classes(
        brain,
        &sources,
        &config.train.train_config(config.model.beta()),
        &mut rng,
    )?;

    let k = model.k() as f64;
    let mut test = make_rng(seed, "test");
    let mut correct = 0usize;
    let mut recall = vec![0.0; classes.len()];
    for (label, class) in classes.iter().enumerate() {
        for _ in 0..config.num_test {
            let x = class.draw(&mut test);
            let prediction = model.classify_overlap(&x)?;
            correct += (prediction.label == label) as usize;
            recall[label] += prediction.overlaps[label] as f64 / k;
        }
    }
    let total = (classes.len() * config.num_test).max(1) as f64;
    recall
        .iter_mut()
        .for_each(|r| *r /= config.num_test.max(1) as f64);

    let a = &model.assemblies;
    let mut core_overlaps = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            core_overlaps.push(overlap(&a[i].core_estimate, &a[j].core_estimate));
        }
    }
    Ok(TrialMetrics {
        trial,
        seed,
        accuracy: correct as f64 / total,
        support: a.iter().map(|r| r.support.len()).collect(),
        core_overlaps,
        converge_step: model
            .traces
            .iter()
            .map(PhaseTrace::convergence_step)
            .collect(),
        gamma: classes
            .iter()
            .zip(a)
            .map(|(c, r)| measure_gamma(&model, &c.core, &r.core_estimate))
            .collect(),
        recall,
        traces: model.traces.clone(),
        wall_time: Duration::ZERO,
    })
}

fn halfspace_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialMetrics> {
    let h = &config.halfspace;
    let (n, k) = (config.model.n, config.model.k);
    let brain = Brain::new(config.model.at_seed(seed)?)?;
    let mut rng = make_rng(seed, "stimuli");
    let class = HalfspaceClass::uniform_support(n, k, h.support, h.delta, &mut rng)?;
    let positives = class.positives();
    let model = train_classes(
        brain,
        &[&positives],
        &config.train.train_config(config.model.beta()),
        &mut rng,
    )?;

    let mut test = make_rng(seed, "test");
    let mut correct = 0usize;
    let mut recall = [0.0; 2];
    for _ in 0..config.num_test {
        for (slot, positive) in [true, false].into_iter().enumerate() {
            let x = class.sample(positive, &mut test).activation;
            let hits = model.halfspace_overlap(&x)?;
            let predicted = hits as f64 >= h.threshold * k as f64;
            correct += (predicted == positive) as usize;
            recall[slot] += hits as f64 / k as f64;
        }
    }
    let per_sign = config.num_test.max(1) as f64;
    let assembly = &model.assemblies[0];
    Ok(TrialMetrics {
        trial,
        seed,
        accuracy: correct as f64 / (2.0 * per_sign),
        support: vec![assembly.support.len()],
        core_overlaps: vec![],
        converge_step: model
            .traces
            .iter()
            .map(PhaseTrace::convergence_step)
            .collect(),
        gamma: vec![],
        recall: recall.iter().map(|r| r / per_sign).collect(),
        traces: model.traces.clone(),
        wall_time: Duration::ZERO,
    })
}

/// Runs the base experiment at every grid point. All (point, trial) pairs
/// run in parallel; trial `t` uses the same seed at every point.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep experiments need a [sweep] section".into()))?;
    let mut base = config.clone();
    base.kind = sweep.base;
    base.sweep = None;
    let jobs: Vec<(usize, usize)> = (0..sweep.values.len())
        .flat_map(|v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    let results: Vec<(usize, TrialOutcome)> = jobs
        .into_par_iter()
        .map(|(v, t)| {
            let point = base.with_param(sweep.param, sweep.values[v], sweep.k_fraction);
            let outcome = match point.validate() {
                Ok(()) => run_trial(&point, t),
                Err(e) => TrialOutcome::Failed(TrialFailure {
                    trial: t,
                    seed: trial_seed(point.seed, t),
                    error: e.to_string(),
                }),
            };
            (v, outcome)
        })
        .collect();
    let mut points: Vec<SweepPoint> = sweep
        .values
        .iter()
        .map(|&value| SweepPoint {
            value,
            summary: Summary::of(&[]),
            outcomes: Vec::with_capacity(config.trials),
        })
        .collect();
    for (v, outcome) in results {
        points[v].outcomes.push(outcome);
    }
    for point in &mut points {
        point.outcomes.sort_by_key(|o| (o.seed(), o.trial()));
        point.summary = Summary::of(&point.outcomes);
    }
    Ok(points)
}

/// Header line of the per-trial sweep CSV.
pub const SWEEP_HEADER: [&str; 7] = [
    "param",
    "value",
    "trial",
    "seed",
    "accuracy",
    "support",
    "converge_step",
];

/// Writes the run's files into `dir` and returns their paths.
pub fn emit(
    config: &ExperimentConfig,
    result: &ExperimentResult,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    match result {
        ExperimentResult::Trials { summary, outcomes } => {
            let doc = document(
                config,
                [
                    ("summary", to_value(summary)),
                    ("trials", to_value(outcomes)),
                ],
            );
            write(format!("{}.json", config.kind), pretty(&doc))?;
            write(
                format!("{}_traces.jsonl", config.kind),
                traces_jsonl(config, outcomes),
            )?;
        }
        ExperimentResult::Sweep(points) => {
            write("sweep.csv".into(), sweep_csv(config, points)?)?;
            write(
                "sweep_summary.csv".into(),
                sweep_summary_csv(config, points)?,
            )?;
        }
        ExperimentResult::Mnist(report) => {
            let doc = document(config, [("results", to_value(report))]);
            write("mnist.json".into(), pretty(&doc))?;
        }
    }
    Ok(written)
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("results serialize")
}

/// A JSON object holding the exact config plus result fields rounded to six
/// significant digits.
fn document<const N: usize>(
    config: &ExperimentConfig,
    fields: [(&str, serde_json::Value); N],
) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("config".into(), to_value(config));
    for (key, mut value) in fields {
        round_json(&mut value);
        map.insert(key.into(), value);
    }
    serde_json::Value::Object(map)
}

fn pretty(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

fn traces_jsonl(config: &ExperimentConfig, outcomes: &[TrialOutcome]) -> Vec<u8> {
    let mut out =
        serde_json::to_string(&serde_json::json!({ "config": config })).expect("configs serialize");
    out.push('\n');
    for m in outcomes.iter().filter_map(TrialOutcome::metrics) {
        for (class, trace) in m.traces.iter().enumerate() {
            for record in trace.records() {
                let line = serde_json::json!({
                    "trial": m.trial,
                    "seed": m.seed,
                    "class": class,
                    "step": record.step,
                    "first_timers": record.first_timers,
                    "overlap_with_previous": record.overlap_with_previous,
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
    }
    out.into_bytes()
}

/// The resolved config as `# `-prefixed comment lines.
fn config_comment(config: &ExperimentConfig) -> Vec<u8> {
    config
        .to_toml()
        .lines()
        .map(|l| format!("# {l}\n"))
        .collect::<String>()
        .into_bytes()
}

fn sweep_csv(config: &ExperimentConfig, points: &[SweepPoint]) -> Result<Vec<u8>> {
    let param = config.sweep.as_ref().map_or("", |s| s.param.name());
    let mut w = csv::Writer::from_writer(config_comment(config));
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for point in points {
        for outcome in &point.outcomes {
            let (accuracy, support, step) = match outcome.metrics() {
                Some(m) => (
                    sig(m.accuracy),
                    sig(m.mean_support()),
                    m.max_converge_step()
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                ),
                None => Default::default(),
            };
            w.write_record([
                param.to_string(),
                sig(point.value),
                outcome.trial().to_string(),
                outcome.seed().to_string(),
                accuracy,
                support,
                step,
            ])
            .map_err(csv_error)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn sweep_summary_csv(config: &ExperimentConfig, points: &[SweepPoint]) -> Result<Vec<u8>> {
    let param = config.sweep.as_ref().map_or("", |s| s.param.name());
    let mut w = csv::Writer::from_writer(config_comment(config));
    w.write_record(["param", "value", "trials", "failed", "mean", "min", "max"])
        .map_err(csv_error)?;
    for point in points {
        let s = &point.summary;
        w.write_record([
            param.to_string(),
            sig(point.value),
            s.trials.to_string(),
            s.failed.to_string(),
            sig(s.mean),
            sig(s.min),
            sig(s.max),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Recovers the resolved config embedded in an emitted file.
pub fn config_from_output(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('#') {
        let toml: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
            .map(|l| format!("{l}\n"))
            .collect();
        return ExperimentConfig::from_toml(&toml);
    }
    let first = if path.extension().is_some_and(|e| e == "jsonl") {
        text.lines().next().unwrap_or_default()
    } else {
        &text
    };
    let doc: serde_json::Value = serde_json::from_str(first).map_err(|e| {
        Error::Config(format!(
            "{} is not an emitted result file: {e}",
            path.display()
        ))
    })?;
    let config = doc
        .get("config")
        .ok_or_else(|| Error::Config(format!("{} embeds no config", path.display())))?;
    serde_json::from_value::<ExperimentConfig>(config.clone())
        .map_err(|e| Error::Config(format!("embedded config: {e}")))?
        .resolve()
}

/// Mean accuracy per grid value, in grid order.
pub fn sweep_means(points: &[SweepPoint]) -> Vec<(f64, f64)> {
    points
        .iter()
        .map(|p| (p.value, round_sig(p.summary.mean)))
        .collect()
}
