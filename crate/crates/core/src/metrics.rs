//! Effective temperature, distribution distances, likelihood and accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::gibbs::{GibbsTable, Spectrum, ENERGY_TOLERANCE};
use crate::ising::{IsingProblem, SpinVector};
use crate::samples::SampleSet;

/// Bounds of the inverse-temperature search.
pub const BETA_MIN: f64 = 1e-3;
pub const BETA_MAX: f64 = 100.0;
pub const BETA_GRID_POINTS: usize = 200;

/// Probability mass per energy level.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyHistogram {
    levels: Vec<(f64, f64)>,
}

impl EnergyHistogram {
    /// Group `(energy, weight)` pairs into levels and normalize.
    pub fn from_weighted<I>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut items: Vec<(f64, f64)> = items.into_iter().collect();
        if items.iter().any(|&(e, w)| !e.is_finite() || !(w >= 0.0)) {
            return Err(Error::domain("histogram entries need finite energies and non-negative weights"));
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = items.iter().map(|x| x.1).sum();
        if !(total > 0.0) {
            return Err(Error::domain("histogram has no mass"));
        }
        let mut levels: Vec<(f64, f64)> = Vec::new();
        for (e, w) in items {
            match levels.last_mut() {
                Some(last) if e - last.0 <= ENERGY_TOLERANCE => last.1 += w,
                _ => levels.push((e, w)),
            }
        }
        levels.iter_mut().for_each(|l| l.1 /= total);
        Ok(EnergyHistogram { levels })
    }

    /// Sample frequencies binned by energy under `model`.
    pub fn from_samples(samples: &SampleSet, model: &IsingProblem) -> Result<Self> {
        check_width(model.n_vars(), samples.width())?;
        Self::from_weighted(
            samples
                .iter()
                .map(|(s, c)| (model.energy_of(s.as_slice()), c as f64)),
        )
    }

    /// Dataset vectors binned by energy under `model`.
    pub fn from_dataset(dataset: &[SpinVector], model: &IsingProblem) -> Result<Self> {
        for x in dataset {
            check_width(model.n_vars(), x.len())?;
        }
        Self::from_weighted(dataset.iter().map(|x| (model.energy_of(x.as_slice()), 1.0)))
    }

    pub fn from_gibbs(table: &GibbsTable) -> Self {
        EnergyHistogram {
            levels: table
                .energy_levels()
                .iter()
                .map(|(l, p)| (l.energy, *p))
                .collect(),
        }
    }

    /// `(energy, probability)` pairs in ascending energy.
    pub fn levels(&self) -> &[(f64, f64)] {
        &self.levels
    }
}

/// Half the L1 distance between two energy histograms, with levels matched
/// within the energy tolerance.
pub fn tvd_energy(q: &EnergyHistogram, p: &EnergyHistogram) -> f64 {
    let (a, b) = (&q.levels, &p.levels);
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0 - ENERGY_TOLERANCE);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0 - ENERGY_TOLERANCE);
        if take_a {
            sum += a[i].1;
            i += 1;
        } else if take_b {
            sum += b[j].1;
            j += 1;
        } else {
            sum += (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
        }
    }
    (0.5 * sum).min(1.0)
}

/// Fitted inverse temperature of a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta_eff: f64,
    /// Energy-level distance to the Gibbs distribution at `beta_eff`.
    pub distance_at_min: f64,
    /// `beta_eff` times the operator norm of the model.
    pub dimensionless: f64,
    /// Every `(beta, distance)` evaluated, grid first, then refinement.
    pub trace: Vec<(f64, f64)>,
}

/// Distance `d(beta)` between fixed sample frequencies and the model's
/// Gibbs distribution, evaluated per level of a precomputed spectrum.
struct LevelDistance<'a> {
    spectrum: &'a Spectrum,
    /// Sample mass on each spectrum level.
    q: Vec<f64>,
}

impl LevelDistance<'_> {
    fn at(&self, beta: f64) -> f64 {
        let p = self.spectrum.level_probabilities(beta);
        0.5 * self.q.iter().zip(&p).map(|(q, p)| (q - p).abs()).sum::<f64>()
    }
}

/// Find the `beta` whose Gibbs energy distribution is closest to the samples.
///
/// A 200-point log grid on `[1e-3, 100]` locates the best bracket, which is
/// refined by golden-section search. Among equal distances the lowest `beta`
/// wins.
pub fn estimate_beta_eff(samples: &SampleSet, model: &IsingProblem) -> Result<BetaEstimate> {
    check_width(model.n_vars(), samples.width())?;
    if samples.is_empty() {
        return Err(Error::domain("cannot fit a temperature to an empty sample set"));
    }
    let spectrum = Spectrum::new(model)?;
    estimate_beta_eff_with(samples, &spectrum)
}

/// As [`estimate_beta_eff`], reusing a spectrum of the model.
pub fn estimate_beta_eff_with(samples: &SampleSet, spectrum: &Spectrum) -> Result<BetaEstimate> {
    check_width(spectrum.n_vars(), samples.width())?;
    if samples.is_empty() {
        return Err(Error::domain("cannot fit a temperature to an empty sample set"));
    }
    // Integer counts keep q independent of the order states are visited.
    let mut counts = vec![0u64; spectrum.levels().len()];
    for (s, c) in samples.iter() {
        let idx = s.to_index().expect("width checked") as usize;
        let level = spectrum
            .find_level(spectrum.energies()[idx])
            .expect("every state energy lies on a level");
        counts[level] += c;
    }
    let total = samples.n_total() as f64;
    let q = counts.into_iter().map(|c| c as f64 / total).collect();
    let d = LevelDistance { spectrum, q };

    let (lo, hi) = (BETA_MIN.ln(), BETA_MAX.ln());
    let grid: Vec<f64> = (0..BETA_GRID_POINTS)
        .map(|k| (lo + (hi - lo) * k as f64 / (BETA_GRID_POINTS - 1) as f64).exp())
        .collect();
    let mut trace: Vec<(f64, f64)> = grid.iter().map(|&b| (b, d.at(b))).collect();
    let best = trace
        .iter()
        .enumerate()
        .fold(0, |best, (k, &(_, v))| if v < trace[best].1 { k } else { best });
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);

    // Golden-section search on [a, b].
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (d.at(x1), d.at(x2));
    trace.push((x1, f1));
    trace.push((x2, f2));
    while b - a > 1e-7 * b.max(1e-12) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = d.at(x1);
            trace.push((x1, f1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = d.at(x2);
            trace.push((x2, f2));
        }
    }
    let (beta_eff, distance_at_min) = trace
        .iter()
        .copied()
        .fold((f64::INFINITY, f64::INFINITY), |(bb, bd), (beta, dist)| {
            if dist < bd || (dist == bd && beta < bb) {
                (beta, dist)
            } else {
                (bb, bd)
            }
        });
    Ok(BetaEstimate {
        beta_eff,
        distance_at_min: distance_at_min.clamp(0.0, 1.0),
        dimensionless: beta_eff * spectrum.max_abs_energy(),
        trace,
    })
}

/// Floor applied to unseen states: one tenth of a single read.
pub fn frequency_floor(n_total: u64) -> f64 {
    1.0 / (10.0 * n_total as f64)
}

/// Mean log sample frequency of the dataset vectors.
pub fn empirical_log_likelihood(samples: &SampleSet, dataset: &[SpinVector]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("empirical log-likelihood of an empty sample set"));
    }
    if dataset.is_empty() {
        return Err(Error::domain("empirical log-likelihood of an empty dataset"));
    }
    let floor = frequency_floor(samples.n_total());
    let mut total = 0.0;
    for x in dataset {
        check_width(samples.width(), x.len())?;
        total += samples.frequency(x).max(floor).ln();
    }
    Ok(total / dataset.len() as f64)
}

/// Energy-level distance between samples and data, both binned under `model`.
pub fn distance_from_data(samples: &SampleSet, dataset: &[SpinVector], model: &IsingProblem) -> Result<f64> {
    if samples.is_empty() || dataset.is_empty() {
        return Err(Error::domain("distance from data needs samples and data"));
    }
    let q = EnergyHistogram::from_samples(samples, model)?;
    let r = EnergyHistogram::from_dataset(dataset, model)?;
    Ok(tvd_energy(&q, &r))
}

/// Fraction of exact matches.
pub fn classification_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::domain("accuracy of an empty prediction set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// One row of a training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub update: usize,
    pub beta_eff: Option<f64>,
    pub beta_hat: Option<f64>,
    pub tvd_gibbs: Option<f64>,
    pub d_data: Option<f64>,
    pub emp_ll: Option<f64>,
    pub acc: Option<f64>,
    /// Exact log-likelihood of the training data under the model at the
    /// sampler's nominal temperature.
    pub exact_ll: Option<f64>,
}

impl MetricRecord {
    pub fn empty(epoch: usize, update: usize) -> Self {
        MetricRecord {
            epoch,
            update,
            beta_eff: None,
            beta_hat: None,
            tvd_gibbs: None,
            d_data: None,
            emp_ll: None,
            acc: None,
            exact_ll: None,
        }
    }
}
