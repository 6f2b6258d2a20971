//! Batch experiments: scans over training settings with persisted,
//! resumable per-point records and aggregated summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{bars_vs_stripes, coarse_grain_binarize, generate_bas, load_mnist_idx, prepare_supervised};
use crate::datasets::{BasSpec, BinaryDataset};
use crate::error::{Error, Result};
use crate::ising::IsingProblem;
use crate::metrics::MetricRecord;
use crate::rng::derive_seed;
use crate::samplers::{default_sweep_grid, select_sweeps_matching_beta, Protocol, QuenchSpec};
use crate::trainer::{
    classical_repetition_train, config_hash, default_penalty_grid, evaluate_accuracy, evaluate_model,
    grid_search_penalties, init_model, train_with, trace_to_csv, Checkpoint, Pipeline, TrainConfig, TrainOptions,
};

pub const RECORD_FILE: &str = "record.json";
pub const EXPERIMENT_FILE: &str = "experiment.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Train,
    GridSearch,
    AlphaScan,
    SweepScan,
    QuenchScan,
    SweepMatch,
    Predict,
}

/// Where the training vectors come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Bas { d: usize, size: usize, seed: u64 },
    BarsVsStripes { size: usize, seed: u64 },
    /// Text dataset as written by `BinaryDataset::save`.
    File { path: PathBuf },
    /// MNIST IDX files, coarse-grained to 4x4 and labelled with digits 1 to 4.
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<BinaryDataset> {
        match self {
            DatasetSpec::Bas { d, size, seed } => generate_bas(&BasSpec {
                d: *d,
                size: *size,
                seed: *seed,
            }),
            DatasetSpec::BarsVsStripes { size, seed } => bars_vs_stripes(*size, *seed),
            DatasetSpec::File { path } => BinaryDataset::load(path),
            DatasetSpec::Mnist { images, labels, limit } => {
                let raw = load_mnist_idx(images, labels)?;
                let n = limit.unwrap_or(raw.images.len()).min(raw.images.len());
                let coarse = raw.images[..n]
                    .iter()
                    .map(|im| coarse_grain_binarize(im))
                    .collect::<Result<Vec<_>>>()?;
                prepare_supervised(&coarse, &raw.labels[..n])
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            DatasetSpec::File { path } => resolve_path(path, base),
            DatasetSpec::Mnist { images, labels, .. } => {
                resolve_path(images, base);
                resolve_path(labels, base);
            }
            _ => {}
        }
    }
}

/// Values swept by a scan. Empty lists are not swept.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Nesting level `C`.
    #[serde(default)]
    pub level: Vec<usize>,
    /// Annealing sweep count.
    #[serde(default)]
    pub sweeps: Vec<u64>,
    #[serde(default)]
    pub s_int: Vec<f64>,
    /// Classical repetition replicas.
    #[serde(default)]
    pub replicas: Vec<usize>,
    /// Quench length used with `s_int`.
    #[serde(default = "Axes::default_quench_sweeps")]
    pub quench_sweeps: u64,
}

impl Axes {
    fn default_quench_sweeps() -> u64 {
        QuenchSpec::DEFAULT_SWEEPS
    }

    /// Cartesian product in the order alpha, level, sweeps, s_int, replicas.
    pub fn points(&self) -> Vec<AxisPoint> {
        let mut points = vec![AxisPoint::default()];
        let mut extend = |name: &'static str, values: Vec<f64>| {
            if values.is_empty() {
                return;
            }
            points = points
                .iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.values.push((name.to_string(), v));
                        q
                    })
                })
                .collect();
        };
        extend("alpha", self.alpha.clone());
        extend("level", self.level.iter().map(|&v| v as f64).collect());
        extend("sweeps", self.sweeps.iter().map(|&v| v as f64).collect());
        extend("s_int", self.s_int.clone());
        extend("replicas", self.replicas.iter().map(|&v| v as f64).collect());
        points
    }
}

/// One combination of axis values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisPoint {
    pub values: Vec<(String, f64)>,
}

impl AxisPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Directory name, e.g. `alpha-0.1_level-2`.
    pub fn label(&self) -> String {
        if self.values.is_empty() {
            return "base".into();
        }
        self.values
            .iter()
            .map(|(n, v)| format!("{n}-{v}"))
            .collect::<Vec<_>>()
            .join("_")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    #[serde(default = "default_penalty_grid")]
    pub values: Vec<f64>,
    #[serde(default = "GridSettings::default_probe_epochs")]
    pub probe_epochs: usize,
}

impl GridSettings {
    fn default_probe_epochs() -> usize {
        1
    }
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            values: default_penalty_grid(),
            probe_epochs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMatchSettings {
    pub target_beta: f64,
    #[serde(default = "default_sweep_grid")]
    pub grid: Vec<u64>,
}

/// A batch experiment as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Master seed; run seeds derive from it and the realization index.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ExperimentConfig::default_realizations")]
    pub realizations: usize,
    /// Result directory. Not part of the experiment hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    pub dataset: Option<DatasetSpec>,
    /// Labelled vectors scored for accuracy.
    #[serde(default)]
    pub test_dataset: Option<DatasetSpec>,
    pub train: TrainConfig,
    #[serde(default)]
    pub axes: Axes,
    /// Checkpoint to evaluate instead of training a fresh model.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub sweep_match: Option<SweepMatchSettings>,
}

impl ExperimentConfig {
    fn default_realizations() -> usize {
        1
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "top level".into(),
            };
            Error::parse("experiment config", location, e.message().to_string())
        })?;
        Ok(cfg)
    }

    /// Parse a TOML file; relative paths inside resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { location, message, .. } => Error::parse(path.display().to_string(), location, message),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.dataset {
            d.resolve(base);
        }
        if let Some(d) = &mut self.test_dataset {
            d.resolve(base);
        }
        for p in [&mut self.output, &mut self.model, &mut self.train.embedding_file]
            .into_iter()
            .flatten()
        {
            resolve_path(p, base);
        }
        if let Some(anneal) = self.train.sampler.anneal_settings_mut() {
            if let Some(p) = &mut anneal.schedule_file {
                resolve_path(p, base);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        self.train.validate()?;
        need(self.realizations >= 1, "realizations must be at least 1")?;
        let a = &self.axes;
        need(
            a.alpha.iter().all(|&x| x > 0.0 && x <= 1.0),
            "axes.alpha values must lie in (0, 1]",
        )?;
        need(a.s_int.iter().all(|&x| x > 0.0 && x <= 1.0), "axes.s_int values must lie in (0, 1]")?;
        need(a.level.iter().all(|&c| c >= 1), "axes.level values must be at least 1")?;
        need(a.sweeps.iter().all(|&s| s >= 1), "axes.sweeps values must be at least 1")?;
        need(a.replicas.iter().all(|&m| m >= 1), "axes.replicas values must be at least 1")?;
        let annealer = self.train.sampler.anneal_settings().is_some();
        need(
            annealer || (a.sweeps.is_empty() && a.s_int.is_empty()),
            "axes.sweeps and axes.s_int need an sqa or svmc sampler",
        )?;
        need(
            a.replicas.is_empty() || (a.level.is_empty() && self.train.level == 1),
            "axes.replicas is the classical baseline and runs without nesting",
        )?;
        match self.kind {
            ExperimentKind::AlphaScan => need(!a.alpha.is_empty(), "alpha-scan needs axes.alpha")?,
            ExperimentKind::SweepScan => need(!a.sweeps.is_empty(), "sweep-scan needs axes.sweeps")?,
            ExperimentKind::QuenchScan => need(!a.s_int.is_empty(), "quench-scan needs axes.s_int")?,
            ExperimentKind::GridSearch => {
                need(!self.grid.values.is_empty(), "grid.values must not be empty")?;
                need(
                    self.grid.values.iter().all(|&g| g > 0.0 && g <= 1.0),
                    "grid.values must lie in (0, 1]",
                )?;
                need(self.grid.probe_epochs >= 1, "grid.probe_epochs must be at least 1")?;
                need(self.model.is_none(), "grid-search trains from scratch; remove `model`")?;
            }
            ExperimentKind::SweepMatch => {
                let sm = self
                    .sweep_match
                    .as_ref()
                    .ok_or_else(|| Error::Config("sweep-match needs a [sweep_match] table".into()))?;
                need(sm.target_beta > 0.0, "sweep_match.target_beta must be positive")?;
                need(!sm.grid.is_empty(), "sweep_match.grid must not be empty")?;
                need(annealer, "sweep-match needs an sqa or svmc sampler")?;
            }
            ExperimentKind::Predict => {
                need(self.model.is_some(), "predict needs `model`")?;
                need(
                    self.test_dataset.is_some() || self.dataset.is_some(),
                    "predict needs a labelled dataset",
                )?;
            }
            ExperimentKind::Train => {}
        }
        if self.kind != ExperimentKind::Predict {
            need(self.dataset.is_some(), "a [dataset] table is required")?;
        }
        Ok(())
    }

    /// Hash shared by every record of this experiment.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Training configuration at an axis point.
    pub fn config_at(&self, point: &AxisPoint, seed: u64) -> Result<TrainConfig> {
        let mut cfg = self.train.clone();
        cfg.seed = seed;
        if let Some(alpha) = point.get("alpha") {
            cfg.alpha = alpha;
        }
        if let Some(level) = point.get("level") {
            cfg.level = level as usize;
        }
        if let Some(sweeps) = point.get("sweeps") {
            cfg.sampler.set_sweeps(sweeps as u64)?;
        }
        if let Some(s_int) = point.get("s_int") {
            let anneal = cfg
                .sampler
                .anneal_settings_mut()
                .ok_or_else(|| Error::Config("s_int needs an sqa or svmc sampler".into()))?;
            anneal.protocol = Protocol::Anneal {
                quench: QuenchSpec::new(s_int, self.axes.quench_sweeps)?,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve_path(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

/// Where the seeds of a record came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub realization: usize,
    pub run: u64,
}

/// Output of one (axis point, realization).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub kind: ExperimentKind,
    pub point: String,
    pub axis: AxisPoint,
    pub realization: usize,
    pub seeds: SeedLineage,
    pub wall_time_secs: f64,
    /// Metric rows, one per update for training kinds.
    pub rows: Vec<MetricRecord>,
    /// Single-number results such as the selected penalties.
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
    /// Kind-specific detail such as a penalty heatmap.
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Continue in a directory that already holds records.
    pub resume: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
}

struct Inputs {
    data: Option<BinaryDataset>,
    test: Option<BinaryDataset>,
    model: Option<Checkpoint>,
}

/// Execute every (axis point, realization) of `exp` into `out`.
///
/// Records already present with the same experiment hash are skipped.
/// Points run to completion independently, so a failure leaves every
/// finished record in place; the first error is returned at the end.
pub fn run(exp: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<RunSummary> {
    exp.validate()?;
    let hash = exp.hash();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let marker = out.join(EXPERIMENT_FILE);
    if marker.exists() {
        let text = std::fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
        let stored: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::parse(marker.display().to_string(), "json", e.to_string()))?;
        if stored["config_hash"] != hash.as_str() {
            return Err(Error::Config(format!(
                "{} holds results of a different experiment",
                out.display()
            )));
        }
        if !opts.resume {
            return Err(Error::Config(format!(
                "{} already holds results; pass --resume to continue",
                out.display()
            )));
        }
    }
    let marker_json = serde_json::json!({ "config_hash": hash, "config": exp });
    write_atomic(&marker, &serde_json::to_string_pretty(&marker_json).expect("config serializes"))?;

    let inputs = Inputs {
        data: exp.dataset.as_ref().map(DatasetSpec::load).transpose()?,
        test: exp.test_dataset.as_ref().map(DatasetSpec::load).transpose()?,
        model: exp.model.as_deref().map(Checkpoint::load).transpose()?,
    };
    let tasks: Vec<(AxisPoint, usize)> = exp
        .axes
        .points()
        .into_iter()
        .flat_map(|p| (0..exp.realizations).map(move |r| (p.clone(), r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<bool>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(point, r)| run_task(exp, &hash, &inputs, out, point, *r))
            .collect()
    });
    let mut summary = RunSummary::default();
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(true) => summary.completed += 1,
            Ok(false) => summary.skipped += 1,
            Err(e) => {
                log::error!("{e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Returns `false` when the record already existed.
fn run_task(
    exp: &ExperimentConfig,
    hash: &str,
    inputs: &Inputs,
    out: &Path,
    point: &AxisPoint,
    realization: usize,
) -> Result<bool> {
    let dir = out.join(point.label()).join(format!("r{realization}"));
    let record_path = dir.join(RECORD_FILE);
    if record_path.exists() {
        let old = load_record(&record_path)?;
        if old.config_hash == hash {
            return Ok(false);
        }
        return Err(Error::Config(format!(
            "{} was written by a different experiment",
            record_path.display()
        )));
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let run_seed = derive_seed(exp.seed, &[realization as u64]);
    let started = Instant::now();
    let cfg = exp.config_at(point, run_seed)?;
    let mut record = ResultRecord {
        config_hash: hash.to_string(),
        kind: exp.kind,
        point: point.label(),
        axis: point.clone(),
        realization,
        seeds: SeedLineage {
            master: exp.seed,
            realization,
            run: run_seed,
        },
        wall_time_secs: 0.0,
        rows: Vec::new(),
        scalars: BTreeMap::new(),
        extra: serde_json::Value::Null,
    };
    let data = inputs.data.as_ref();
    let test = inputs.test.as_ref();
    let fixed_model = inputs.model.as_ref().map(Checkpoint::model).transpose()?;
    match exp.kind {
        ExperimentKind::Train | ExperimentKind::AlphaScan | ExperimentKind::SweepScan | ExperimentKind::QuenchScan => {
            let data = data.expect("validated");
            if let Some(model) = &fixed_model {
                record.rows.push(evaluate_model(&cfg, model, data, test, run_seed)?);
            } else {
                let state = match point.get("replicas") {
                    Some(m) => classical_repetition_train(&cfg, m as usize, data, false)?,
                    None => train_with(
                        &cfg,
                        data,
                        TrainOptions {
                            test,
                            ..TrainOptions::default()
                        },
                    )?,
                };
                Checkpoint::new(&state, &cfg, data.label_bits()).save(&dir.join("checkpoint.json"))?;
                write_atomic(&dir.join("trace.csv"), &trace_to_csv(&state.trace))?;
                record.rows = state.trace;
            }
        }
        ExperimentKind::GridSearch => {
            let result = grid_search_penalties(&cfg, data.expect("validated"), test, &exp.grid.values, exp.grid.probe_epochs)?;
            record.scalars.insert("gamma1".into(), result.gamma1);
            record.scalars.insert("gamma2".into(), result.gamma2);
            record.extra = serde_json::to_value(&result.heatmap).expect("heatmap serializes");
        }
        ExperimentKind::SweepMatch => {
            let data = data.expect("validated");
            let settings = exp.sweep_match.as_ref().expect("validated");
            let model = match fixed_model {
                Some(m) => m,
                None => init_model(data.width(), cfg.init_range, run_seed),
            };
            let mut trace = Vec::new();
            let chosen = select_sweeps_matching_beta(&settings.grid, settings.target_beta, |sweeps| {
                let mut c = cfg.clone();
                c.sampler.set_sweeps(sweeps)?;
                let m = evaluate_model(&c, &model, data, None, run_seed)?;
                let beta = m.beta_eff.ok_or_else(|| Error::domain("model too large to fit a temperature"))?;
                trace.push(serde_json::json!({ "sweeps": sweeps, "beta_eff": beta }));
                Ok(beta)
            })?;
            record.scalars.insert("sweeps".into(), chosen as f64);
            record.extra = serde_json::Value::Array(trace);
        }
        ExperimentKind::Predict => {
            let labelled = test.or(data).expect("validated");
            let model: &IsingProblem = fixed_model.as_ref().expect("validated");
            let pipeline = Pipeline::new(&cfg)?;
            let acc = evaluate_accuracy(model, &pipeline, labelled, cfg.predict_reads, run_seed)?;
            record.scalars.insert("acc".into(), acc);
        }
    }
    record.wall_time_secs = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    write_atomic(&record_path, &json)?;
    Ok(true)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_record(path: &Path) -> Result<ResultRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), format!("line {}", e.line()), e.to_string()))
}

/// Every record below `dir`, in path order.
pub fn collect_records(dir: &Path) -> Result<Vec<ResultRecord>> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(dir, e))?;
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(&path, found)?;
            } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
                found.push(path);
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths.iter().map(|p| load_record(p)).collect()
}

/// One aggregated cell: a metric at an axis point and epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub point: String,
    pub axis: BTreeMap<String, f64>,
    /// Epoch for per-epoch metrics, absent for scalar results.
    pub epoch: Option<usize>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Twice the sample standard deviation; 0 for a single value.
    pub two_sigma: f64,
}

/// Mean and twice the sample standard deviation.
pub fn mean_two_sigma(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 2.0 * var.sqrt())
}

fn metric_values(row: &MetricRecord) -> [(&'static str, Option<f64>); 7] {
    [
        ("beta_eff", row.beta_eff),
        ("beta_hat", row.beta_hat),
        ("tvd_gibbs", row.tvd_gibbs),
        ("d_data", row.d_data),
        ("emp_ll", row.emp_ll),
        ("acc", row.acc),
        ("exact_ll", row.exact_ll),
    ]
}

/// Aggregate records by axis point. Per-epoch metrics use the last row of
/// each epoch.
pub fn summarize(records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    let first = records
        .first()
        .ok_or_else(|| Error::domain("no records to summarize"))?;
    if let Some(other) = records.iter().find(|r| r.config_hash != first.config_hash) {
        return Err(Error::Config(format!(
            "records from different experiments: {} and {}",
            first.config_hash, other.config_hash
        )));
    }
    type Key = (String, Option<usize>, String);
    let mut groups: BTreeMap<String, (AxisPoint, BTreeMap<Key, Vec<f64>>)> = BTreeMap::new();
    for record in records {
        let (_, cells) = groups
            .entry(record.point.clone())
            .or_insert_with(|| (record.axis.clone(), BTreeMap::new()));
        let mut last_of_epoch: BTreeMap<usize, &MetricRecord> = BTreeMap::new();
        for row in &record.rows {
            last_of_epoch.insert(row.epoch, row);
        }
        for (epoch, row) in last_of_epoch {
            for (name, value) in metric_values(row) {
                if let Some(v) = value {
                    cells
                        .entry((String::new(), Some(epoch), name.to_string()))
                        .or_default()
                        .push(v);
                }
            }
        }
        for (name, &v) in &record.scalars {
            cells.entry((String::new(), None, name.clone())).or_default().push(v);
        }
    }
    let mut ordered: Vec<_> = groups.into_iter().collect();
    ordered.sort_by(|(la, (a, _)), (lb, (b, _))| {
        let va = a.values.iter().map(|(_, v)| *v);
        let vb = b.values.iter().map(|(_, v)| *v);
        va.zip(vb)
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| la.cmp(lb))
    });
    let mut rows = Vec::new();
    for (point, (axis, cells)) in ordered {
        for ((_, epoch, metric), values) in cells {
            let (mean, two_sigma) = mean_two_sigma(&values);
            rows.push(SummaryRow {
                point: point.clone(),
                axis: axis.values.iter().cloned().collect(),
                epoch,
                metric,
                n: values.len(),
                mean,
                two_sigma,
            });
        }
    }
    Ok(rows)
}

/// Tidy CSV: one row per (point, epoch, metric).
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let axis_names: Vec<String> = rows
        .iter()
        .flat_map(|r| r.axis.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["point".to_string()];
    header.extend(axis_names.iter().cloned());
    header.extend(["epoch", "metric", "n", "mean", "two_sigma"].map(String::from));
    writer.write_record(&header).expect("in-memory CSV");
    for r in rows {
        let mut line = vec![r.point.clone()];
        line.extend(axis_names.iter().map(|a| r.axis.get(a).map(|v| v.to_string()).unwrap_or_default()));
        line.push(r.epoch.map(|e| e.to_string()).unwrap_or_default());
        line.push(r.metric.clone());
        line.push(r.n.to_string());
        line.push(r.mean.to_string());
        line.push(r.two_sigma.to_string());
        writer.write_record(&line).expect("in-memory CSV");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}

/// Aggregate a result directory into `summary.csv` and `summary.json`.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let records = collect_records(dir)?;
    if records.is_empty() {
        return Err(Error::domain(format!("no records under {}", dir.display())));
    }
    let rows = summarize(&records)?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows))?;
    write_atomic(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&rows).expect("summary serializes"),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUICK: &str = r#"
        kind = "alpha-scan"
        seed = 5
        realizations = 2

        [dataset]
        source = "bas"
        d = 3
        size = 40
        seed = 1

        [train]
        epochs = 2
        batch_size = 20
        samples_per_update = 200
        sampler = { kind = "exact", beta = 1.0 }

        [axes]
        alpha = [0.5, 1.0]
    "#;

    #[test]
    fn axis_products() {
        let axes = Axes {
            alpha: vec![0.1, 1.0],
            level: vec![1, 2, 3],
            ..Axes::default()
        };
        let pts = axes.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].label(), "alpha-0.1_level-1");
        assert_eq!(pts[5].label(), "alpha-1_level-3");
        assert_eq!(Axes::default().points()[0].label(), "base");
        let quench = Axes {
            s_int: (1..=9).map(|k| k as f64 / 10.0).collect(),
            ..Axes::default()
        };
        assert_eq!(quench.points().len(), 9);
    }

    #[test]
    fn config_errors_name_the_problem() {
        let bad = QUICK.replace("alpha = [0.5, 1.0]", "alpha = [0.5, 1.5]");
        let err = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("alpha")));
        let typo = QUICK.replace("epochs = 2", "epochz = 2");
        match ExperimentConfig::from_toml(&typo).unwrap_err() {
            Error::Parse { location, message, .. } => {
                assert!(location.starts_with("line "));
                assert!(message.contains("epochz"));
            }
            e => panic!("unexpected {e}"),
        }
        let no_axis = QUICK.replace("alpha = [0.5, 1.0]", "");
        assert!(ExperimentConfig::from_toml(&no_axis).unwrap().validate().is_err());
        let sweeps_on_exact = QUICK.replace("alpha = [0.5, 1.0]", "alpha = [1.0]\nsweeps = [10]");
        assert!(ExperimentConfig::from_toml(&sweeps_on_exact).unwrap().validate().is_err());
    }

    #[test]
    fn run_resume_and_report() {
        let exp = ExperimentConfig::from_toml(QUICK).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let s = run(&exp, &out, RunOptions::default()).unwrap();
        assert_eq!(s, RunSummary { completed: 4, skipped: 0 });
        assert!(out.join("alpha-0.5/r1/record.json").exists());
        assert!(out.join("alpha-0.5/r1/checkpoint.json").exists());
        assert!(run(&exp, &out, RunOptions::default()).is_err());
        let again = run(&exp, &out, RunOptions { workers: 2, resume: true }).unwrap();
        assert_eq!(again, RunSummary { completed: 0, skipped: 4 });

        let rows = report(&out).unwrap();
        let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        assert!(csv.starts_with("point,alpha,epoch,metric,n,mean,two_sigma\n"));
        let ll: Vec<_> = rows
            .iter()
            .filter(|r| r.metric == "exact_ll" && r.epoch == Some(1))
            .collect();
        assert_eq!(ll.len(), 2);
        assert!(ll.iter().all(|r| r.n == 2 && r.two_sigma > 0.0));

        // Same config and seed elsewhere gives the same summary bytes.
        let other = dir.path().join("other");
        run(&exp, &other, RunOptions { workers: 1, resume: false }).unwrap();
        report(&other).unwrap();
        assert_eq!(std::fs::read_to_string(other.join("summary.csv")).unwrap(), csv);

        let changed = ExperimentConfig { seed: 6, ..exp };
        assert!(run(&changed, &out, RunOptions { workers: 1, resume: true }).is_err());
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let mk = |point: &str, r: usize, ll: f64| ResultRecord {
            config_hash: "h".into(),
            kind: ExperimentKind::Train,
            point: point.into(),
            axis: AxisPoint::default(),
            realization: r,
            seeds: SeedLineage { master: 0, realization: r, run: 0 },
            wall_time_secs: 0.0,
            rows: vec![
                MetricRecord { emp_ll: Some(-100.0), ..MetricRecord::empty(0, 0) },
                MetricRecord { emp_ll: Some(ll), ..MetricRecord::empty(0, 1) },
            ],
            scalars: BTreeMap::new(),
            extra: serde_json::Value::Null,
        };
        let records = [mk("base", 0, -3.0), mk("base", 1, -4.0), mk("base", 2, -8.0)];
        let rows = summarize(&records).unwrap();
        assert_eq!(rows.len(), 1);
        // mean -5, deviations 2, 1, -3, sample variance 14 / 2 = 7
        assert_eq!(rows[0].n, 3);
        assert!((rows[0].mean + 5.0).abs() < 1e-12);
        assert!((rows[0].two_sigma - 2.0 * 7f64.sqrt()).abs() < 1e-12);

        let single = summarize(&records[..1]).unwrap();
        assert_eq!(single[0].two_sigma, 0.0);

        let mut mixed = records.to_vec();
        mixed[1].config_hash = "g".into();
        assert!(summarize(&mixed).is_err());
        assert!(summarize(&[]).is_err());
    }
}
