//! Fully-visible Boltzmann machine training.

mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::BinaryDataset;
use crate::error::{check_width, Error, Result};
use crate::gibbs::{exact_log_likelihood, operator_norm, ENUMERATION_CAP};
use crate::ising::{IsingProblem, SpinVector};
use crate::metrics::{
    classification_accuracy, distance_from_data, empirical_log_likelihood, estimate_beta_eff, tvd_energy,
    EnergyHistogram, MetricRecord,
};
use crate::moments::Moments;
use crate::rng::{derive_seed, stream};

pub use config::{config_hash, BetaReference, DecodeModeSetting, HardwareSpec, TrainConfig};
pub use pipeline::{ModelDraw, Pipeline};

/// Model parameters and bookkeeping of a training run.
///
/// Biases live in the field slots of `model`, weights in its coupler slots.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: IsingProblem,
    pub epoch: usize,
    pub updates: usize,
    pub seed: u64,
    pub trace: Vec<MetricRecord>,
}

/// Positive-phase moments of a batch.
pub fn data_moments<'a, I>(batch: I) -> Result<Moments>
where
    I: IntoIterator<Item = &'a SpinVector>,
{
    let mut iter = batch.into_iter().peekable();
    let n = iter
        .peek()
        .map(|x| x.len())
        .ok_or_else(|| Error::domain("moments of an empty batch"))?;
    Moments::from_vectors(n, iter.map(SpinVector::as_slice))
}

/// One gradient step on the log-likelihood.
///
/// With `E = sum b x + sum w x x` and `P ∝ exp(-E)`, the gradient of the
/// log-likelihood with respect to a parameter is the model average of its
/// statistic minus the data average, so ascent subtracts
/// `eta * (<.>_data - <.>_model)`.
pub fn update_params(model: &IsingProblem, data: &Moments, model_moments: &Moments, eta: f64) -> Result<IsingProblem> {
    let n = model.n_vars();
    check_width(n, data.width())?;
    check_width(n, model_moments.width())?;
    let fields = (0..n)
        .map(|i| model.field(i) - eta * (data.first(i) - model_moments.first(i)))
        .collect();
    let couplers = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| {
        let w = model.coupler(i, j) - eta * (data.second(i, j) - model_moments.second(i, j));
        (i, j, w)
    });
    IsingProblem::from_parts(fields, couplers)
}

/// Complete model with parameters i.i.d. uniform in `[-range, range]`.
pub fn init_model(n: usize, range: f64, seed: u64) -> IsingProblem {
    let mut rng = stream(seed, &[0]);
    let mut draw = move || if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 };
    let fields = (0..n).map(|_| draw()).collect();
    IsingProblem::complete(fields, |_, _| draw())
}

/// Score used to pick among replicas: mean log-probability of the data.
fn draw_log_likelihood(draw: &ModelDraw, data: &BinaryDataset) -> Result<f64> {
    match draw {
        ModelDraw::Samples { logical, .. } => empirical_log_likelihood(logical, data.vectors()),
        ModelDraw::Exact(table) => table.log_likelihood(data.vectors()),
    }
}

fn measure(
    record: &mut MetricRecord,
    model: &IsingProblem,
    draw: &ModelDraw,
    data: &BinaryDataset,
    cfg: &TrainConfig,
) -> Result<()> {
    record.emp_ll = Some(draw_log_likelihood(draw, data)?);
    let reference = match cfg.beta_reference {
        BetaReference::Unscaled => model.clone(),
        BetaReference::Scaled => model.scale(cfg.alpha)?,
    };
    if model.n_vars() > ENUMERATION_CAP {
        return Ok(());
    }
    match draw {
        ModelDraw::Samples { logical, .. } => {
            if logical.is_empty() {
                return Ok(());
            }
            let est = estimate_beta_eff(logical, &reference)?;
            record.beta_eff = Some(est.beta_eff);
            record.beta_hat = Some(est.dimensionless);
            record.tvd_gibbs = Some(est.distance_at_min);
            record.d_data = Some(distance_from_data(logical, data.vectors(), model)?);
        }
        ModelDraw::Exact(table) => {
            let scale = match cfg.beta_reference {
                BetaReference::Unscaled => cfg.alpha,
                BetaReference::Scaled => 1.0,
            };
            let beta_eff = table.beta() * scale;
            record.beta_eff = Some(beta_eff);
            record.beta_hat = Some(beta_eff * operator_norm(&reference)?);
            record.tvd_gibbs = Some(0.0);
            let q = EnergyHistogram::from_weighted(
                table
                    .energies()
                    .iter()
                    .map(|e| e / cfg.alpha)
                    .zip(table.probabilities().iter().copied()),
            )?;
            let r = EnergyHistogram::from_dataset(data.vectors(), model)?;
            record.d_data = Some(tvd_energy(&q, &r));
        }
    }
    Ok(())
}

/// Extra inputs for a training run.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Labelled data scored for accuracy after each epoch.
    pub test: Option<&'a BinaryDataset>,
    /// Independent sample-and-update rounds per step; the best replica by
    /// data log-likelihood overwrites the others.
    pub replicas: usize,
    /// Give every replica the same seeds.
    pub identical_replica_seeds: bool,
    /// Start from these parameters instead of a random draw.
    pub initial: Option<&'a IsingProblem>,
}

/// Train on `data` with the configured pipeline.
pub fn train(cfg: &TrainConfig, data: &BinaryDataset) -> Result<TrainState> {
    train_with(cfg, data, TrainOptions::default())
}

/// Classical repetition baseline: `replicas` unencoded copies per step.
pub fn classical_repetition_train(
    cfg: &TrainConfig,
    replicas: usize,
    data: &BinaryDataset,
    identical_seeds: bool,
) -> Result<TrainState> {
    if cfg.level != 1 {
        return Err(Error::Config("classical repetition runs without nesting (level 1)".into()));
    }
    if replicas < 1 {
        return Err(Error::Config("at least one replica is required".into()));
    }
    train_with(
        cfg,
        data,
        TrainOptions {
            replicas,
            identical_replica_seeds: identical_seeds,
            ..TrainOptions::default()
        },
    )
}

pub fn train_with(cfg: &TrainConfig, data: &BinaryDataset, opts: TrainOptions<'_>) -> Result<TrainState> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    let pipeline = Pipeline::new(cfg)?;
    let n = data.width();
    let model = match opts.initial {
        Some(m) => {
            check_width(n, m.n_vars())?;
            m.clone()
        }
        None => init_model(n, cfg.init_range, cfg.seed),
    };
    let replicas = opts.replicas.max(1);
    let mut state = TrainState {
        model,
        epoch: 0,
        updates: 0,
        seed: cfg.seed,
        trace: Vec::new(),
    };
    let epoch_seed = derive_seed(cfg.seed, &[1]);
    for epoch in 0..cfg.epochs {
        let batches = if cfg.full_batch {
            vec![(0..data.len()).collect()]
        } else {
            data.minibatches(cfg.batch_size, epoch_seed, epoch)?
        };
        let last_batch = batches.len() - 1;
        for (b, batch) in batches.iter().enumerate() {
            let dm = data_moments(batch.iter().map(|&k| &data.vectors()[k]))?;
            let base = derive_seed(cfg.seed, &[2, state.updates as u64]);
            let mut best: Option<(f64, IsingProblem, ModelDraw)> = None;
            for r in 0..replicas {
                let seed = if r == 0 || opts.identical_replica_seeds {
                    base
                } else {
                    derive_seed(base, &[r as u64])
                };
                let draw = pipeline.draw(&state.model, cfg.samples_per_update, seed)?;
                let updated = update_params(&state.model, &dm, &draw.moments()?, cfg.eta)?;
                let score = if replicas > 1 {
                    draw_log_likelihood(&draw, data)?
                } else {
                    0.0
                };
                if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                    best = Some((score, updated, draw));
                }
            }
            let (_, updated, draw) = best.expect("at least one replica");

            let epoch_end = b == last_batch;
            let mut record = MetricRecord::empty(epoch, state.updates);
            let due = cfg.metrics_every > 0 && (state.updates + 1) % cfg.metrics_every == 0;
            if due || epoch_end {
                measure(&mut record, &state.model, &draw, data, cfg)?;
            }
            if epoch_end {
                if let Some(beta) = pipeline.exact_beta() {
                    if n <= ENUMERATION_CAP {
                        record.exact_ll =
                            Some(exact_log_likelihood(&updated.scale(cfg.alpha)?, beta, data.vectors())?);
                    }
                }
                if let Some(test) = opts.test {
                    let seed = derive_seed(cfg.seed, &[4, epoch as u64]);
                    record.acc = Some(evaluate_accuracy(&updated, &pipeline, test, cfg.predict_reads, seed)?);
                }
            }
            state.model = updated;
            state.updates += 1;
            state.trace.push(record);
        }
        state.epoch = epoch + 1;
    }
    Ok(state)
}

/// Metrics of a fixed model: one draw through the pipeline, no update.
pub fn evaluate_model(
    cfg: &TrainConfig,
    model: &IsingProblem,
    data: &BinaryDataset,
    test: Option<&BinaryDataset>,
    seed: u64,
) -> Result<MetricRecord> {
    cfg.validate()?;
    check_width(data.width(), model.n_vars())?;
    let pipeline = Pipeline::new(cfg)?;
    let draw = pipeline.draw(model, cfg.samples_per_update, derive_seed(seed, &[2]))?;
    let mut record = MetricRecord::empty(0, 0);
    measure(&mut record, model, &draw, data, cfg)?;
    if let Some(beta) = pipeline.exact_beta() {
        if model.n_vars() <= ENUMERATION_CAP {
            record.exact_ll = Some(exact_log_likelihood(&model.scale(cfg.alpha)?, beta, data.vectors())?);
        }
    }
    if let Some(test) = test {
        record.acc = Some(evaluate_accuracy(model, &pipeline, test, cfg.predict_reads, derive_seed(seed, &[4]))?);
    }
    Ok(record)
}

/// Outcome of a supervised prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// 1-based class id.
    pub class: usize,
    /// Frequency of +1 on each label bit.
    pub frequencies: Vec<f64>,
}

/// Clamp the pixel variables, read the label bits `reads` times through the
/// pipeline and pick the bit most often +1. Ties go to the lowest index.
pub fn predict_label(
    model: &IsingProblem,
    pipeline: &Pipeline,
    pixels: &[i8],
    label_bits: usize,
    reads: usize,
    seed: u64,
) -> Result<Prediction> {
    let n_pixels = model
        .n_vars()
        .checked_sub(label_bits)
        .ok_or_else(|| Error::domain("more label bits than variables"))?;
    check_width(n_pixels, pixels.len())?;
    if label_bits == 0 {
        return Err(Error::domain("model has no label bits"));
    }
    let assignment: BTreeMap<usize, i8> = pixels.iter().copied().enumerate().collect();
    let reduced = model.clamp(&assignment)?.problem;
    let frequencies = match pipeline.draw(&reduced, reads, seed)? {
        ModelDraw::Exact(table) => {
            let m = table.moments();
            (0..label_bits).map(|k| 0.5 * (1.0 + m.first(k))).collect::<Vec<_>>()
        }
        ModelDraw::Samples { logical, .. } => {
            let total = logical.n_total().max(1) as f64;
            (0..label_bits)
                .map(|k| logical.iter().filter(|(x, _)| x.get(k) == 1).map(|(_, c)| c as f64).sum::<f64>() / total)
                .collect()
        }
    };
    let position = frequencies
        .iter()
        .enumerate()
        .fold(0, |best, (k, &f)| if f > frequencies[best] { k } else { best });
    Ok(Prediction {
        class: position + 1,
        frequencies,
    })
}

/// Accuracy of [`predict_label`] over a labelled dataset.
pub fn evaluate_accuracy(
    model: &IsingProblem,
    pipeline: &Pipeline,
    test: &BinaryDataset,
    reads: usize,
    seed: u64,
) -> Result<f64> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::domain("accuracy needs a labelled dataset"))?;
    let n_pixels = test.n_pixels();
    let predictions = test
        .vectors()
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            predict_label(
                model,
                pipeline,
                &x.as_slice()[..n_pixels],
                test.label_bits(),
                reads,
                derive_seed(seed, &[k as u64]),
            )
            .map(|p| p.class)
        })
        .collect::<Result<Vec<_>>>()?;
    classification_accuracy(&predictions, labels)
}

/// Predict the class of every vector in `images` with a saved model. Only
/// the pixel part of each vector is read.
pub fn predict_dataset(checkpoint: &Checkpoint, images: &BinaryDataset, seed: u64) -> Result<Vec<Prediction>> {
    let model = checkpoint.model()?;
    let pipeline = Pipeline::new(&checkpoint.config)?;
    let n_pixels = model
        .n_vars()
        .checked_sub(checkpoint.label_bits)
        .ok_or_else(|| Error::domain("checkpoint has more label bits than variables"))?;
    if images.width() != n_pixels && images.width() != model.n_vars() {
        return Err(Error::Dimension {
            expected: n_pixels,
            actual: images.width(),
        });
    }
    images
        .vectors()
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            predict_label(
                &model,
                &pipeline,
                &x.as_slice()[..n_pixels],
                checkpoint.label_bits,
                checkpoint.config.predict_reads,
                derive_seed(seed, &[k as u64]),
            )
        })
        .collect()
}

/// Penalty grid from 0.2 to 1.0 in steps of 0.2.
pub fn default_penalty_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma1: f64,
    pub gamma2: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub gamma1: f64,
    pub gamma2: f64,
    pub heatmap: Vec<GridCell>,
}

/// Train `probe_epochs` at every penalty pair from the template's initial
/// parameters and keep the best final score: accuracy on `test` when given,
/// the data log-likelihood of the model samples otherwise. Without nesting
/// only `gamma2` is searched. Ties go to the smaller `gamma1`, then the
/// smaller `gamma2`.
pub fn grid_search_penalties(
    template: &TrainConfig,
    data: &BinaryDataset,
    test: Option<&BinaryDataset>,
    grid: &[f64],
    probe_epochs: usize,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("penalty grid must not be empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let gamma1s = if template.level == 1 {
        vec![template.gamma1]
    } else {
        sorted.clone()
    };
    let cells: Vec<(f64, f64)> = gamma1s
        .iter()
        .flat_map(|&g1| sorted.iter().map(move |&g2| (g1, g2)))
        .collect();
    let heatmap = cells
        .par_iter()
        .map(|&(gamma1, gamma2)| {
            let cfg = TrainConfig {
                gamma1,
                gamma2,
                epochs: probe_epochs,
                ..template.clone()
            };
            let state = train_with(
                &cfg,
                data,
                TrainOptions {
                    test,
                    ..TrainOptions::default()
                },
            )?;
            let last = state.trace.last().ok_or_else(|| Error::Config("probe_epochs must be at least 1".into()))?;
            let score = if test.is_some() { last.acc } else { last.emp_ll };
            Ok(GridCell {
                gamma1,
                gamma2,
                score: score.unwrap_or(f64::NEG_INFINITY),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = heatmap
        .iter()
        .fold(&heatmap[0], |best, c| if c.score > best.score { c } else { best });
    Ok(GridSearchResult {
        gamma1: best.gamma1,
        gamma2: best.gamma2,
        heatmap,
    })
}

/// Persisted parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub updates: usize,
    pub b: Vec<f64>,
    pub w: Vec<(usize, usize, f64)>,
    pub seed: u64,
    pub config_hash: String,
    pub config: TrainConfig,
    /// Label bits at the end of each vector for supervised models.
    #[serde(default)]
    pub label_bits: usize,
}

impl Checkpoint {
    pub fn new(state: &TrainState, cfg: &TrainConfig, label_bits: usize) -> Self {
        Checkpoint {
            epoch: state.epoch,
            updates: state.updates,
            b: state.model.fields().to_vec(),
            w: state.model.couplers().collect(),
            seed: state.seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            label_bits,
        }
    }

    pub fn model(&self) -> Result<IsingProblem> {
        IsingProblem::from_parts(self.b.clone(), self.w.iter().copied())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), format!("line {}", e.line()), e.to_string()))
    }
}

/// One CSV row per update.
pub fn trace_to_csv(trace: &[MetricRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in trace {
        writer.serialize(row).expect("in-memory CSV");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}
