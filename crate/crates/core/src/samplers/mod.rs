//! Classical stand-ins for the annealer.

mod calibrate;
mod noise;
mod remote;
mod schedule;
mod sqa;
mod svmc;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingProblem;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::samples::{Level, SampleSet};

pub use calibrate::{default_sweep_grid, log_sweep_grid, select_sweeps_matching_beta};
pub use noise::{apply_noise, DEFAULT_NOISE_SIGMA};
pub use remote::{parse_reply, remote_sample, request_body, RemoteBackendConfig};
pub use schedule::{AnnealSchedule, Bath, EnergyUnits, Protocol, QuenchSpec, KB_OVER_H_GHZ_PER_K};
pub use sqa::{slice_coupling, sqa_sample, SqaConfig};
pub use svmc::{svmc_energy, svmc_sample, SvmcConfig};

/// Reads are generated in chunks of this many per task.
const READ_CHUNK: usize = 256;

fn check_problem(problem: &IsingProblem) -> Result<()> {
    let finite = problem.fields().iter().all(|h| h.is_finite())
        && problem.couplers().all(|(_, _, v)| v.is_finite());
    if finite {
        Ok(())
    } else {
        Err(Error::domain("problem parameters must be finite"))
    }
}

/// Run `kernel` once per read with the read's own sub-stream of `seed`.
/// The result depends only on the seed, never on the thread count.
fn collect_reads<F>(width: usize, n_reads: usize, seed: u64, kernel: F) -> Result<SampleSet>
where
    F: Fn(&mut StreamRng, &mut [i8]) + Sync,
{
    if n_reads == 0 {
        return Err(Error::domain("at least one read is required"));
    }
    let chunks: Vec<SampleSet> = (0..n_reads.div_ceil(READ_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut set = SampleSet::new(Level::Physical, width);
            let mut buf = vec![0i8; width];
            for r in c * READ_CHUNK..((c + 1) * READ_CHUNK).min(n_reads) {
                let mut rng = stream(seed, &[r as u64]);
                kernel(&mut rng, &mut buf);
                set.insert_raw(&buf, 1);
            }
            set
        })
        .collect();
    let mut all = SampleSet::new(Level::Physical, width);
    for chunk in &chunks {
        all.merge(chunk)?;
    }
    Ok(all)
}

/// Schedule, protocol and control noise shared by the Monte Carlo samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSettings {
    #[serde(default = "AnnealSettings::default_protocol")]
    pub protocol: Protocol,
    /// CSV schedule in GHz; the dimensionless linear schedule when absent.
    #[serde(default)]
    pub schedule_file: Option<PathBuf>,
    /// Standard deviation of Gaussian noise added to each programmed problem.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl AnnealSettings {
    fn default_protocol() -> Protocol {
        Protocol::Anneal {
            quench: QuenchSpec::full(),
        }
    }

    pub fn load_schedule(&self) -> Result<AnnealSchedule> {
        match &self.schedule_file {
            Some(path) => AnnealSchedule::from_csv_path(path, true),
            None => Ok(AnnealSchedule::linear()),
        }
    }
}

impl Default for AnnealSettings {
    fn default() -> Self {
        AnnealSettings {
            protocol: Self::default_protocol(),
            schedule_file: None,
            noise_sigma: 0.0,
        }
    }
}

/// Source of model samples for training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerChoice {
    /// Independent draws from the exact Gibbs distribution of the logical
    /// model; nesting and embedding are bypassed.
    Exact { beta: f64 },
    /// Exact Gibbs moments with no sampling noise.
    ExactMoments { beta: f64 },
    Sqa {
        config: SqaConfig,
        #[serde(default)]
        anneal: AnnealSettings,
    },
    Svmc {
        config: SvmcConfig,
        #[serde(default)]
        anneal: AnnealSettings,
    },
    Remote { config: RemoteBackendConfig },
}

impl SamplerChoice {
    /// Whether samples come from the encoded physical problem.
    pub fn is_physical(&self) -> bool {
        !matches!(self, SamplerChoice::Exact { .. } | SamplerChoice::ExactMoments { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerChoice::Exact { beta } | SamplerChoice::ExactMoments { beta } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::domain(format!("beta must be finite and non-negative, got {beta}")));
                }
                Ok(())
            }
            SamplerChoice::Sqa { config, anneal } => {
                config.validate()?;
                anneal.protocol.validate()
            }
            SamplerChoice::Svmc { config, anneal } => {
                config.validate()?;
                anneal.protocol.validate()
            }
            SamplerChoice::Remote { config } => {
                if config.endpoint.trim().is_empty() {
                    return Err(Error::domain("remote endpoint must not be empty"));
                }
                Ok(())
            }
        }
    }

    pub fn anneal_settings(&self) -> Option<&AnnealSettings> {
        match self {
            SamplerChoice::Sqa { anneal, .. } | SamplerChoice::Svmc { anneal, .. } => Some(anneal),
            _ => None,
        }
    }

    pub fn anneal_settings_mut(&mut self) -> Option<&mut AnnealSettings> {
        match self {
            SamplerChoice::Sqa { anneal, .. } | SamplerChoice::Svmc { anneal, .. } => Some(anneal),
            _ => None,
        }
    }

    /// Set the annealing sweep count of a Monte Carlo sampler.
    pub fn set_sweeps(&mut self, sweeps: u64) -> Result<()> {
        match self {
            SamplerChoice::Sqa { config, .. } => config.sweeps = sweeps,
            SamplerChoice::Svmc { config, .. } => config.sweeps = sweeps,
            _ => return Err(Error::Config("sweep count applies only to sqa and svmc samplers".into())),
        }
        Ok(())
    }

    /// Draw physical reads of `problem`, applying control noise first.
    /// `seed` replaces the seed stored in the sampler configuration.
    pub fn sample_physical(
        &self,
        problem: &IsingProblem,
        schedule: &AnnealSchedule,
        n_reads: usize,
        seed: u64,
    ) -> Result<SampleSet> {
        let noisy = |anneal: &AnnealSettings| apply_noise(problem, anneal.noise_sigma, derive_seed(seed, &[1]));
        match self {
            SamplerChoice::Sqa { config, anneal } => {
                let cfg = SqaConfig {
                    seed: derive_seed(seed, &[2]),
                    ..*config
                };
                sqa_sample(&noisy(anneal)?, schedule, anneal.protocol, &cfg, n_reads)
            }
            SamplerChoice::Svmc { config, anneal } => {
                let cfg = SvmcConfig {
                    seed: derive_seed(seed, &[2]),
                    ..*config
                };
                svmc_sample(&noisy(anneal)?, schedule, anneal.protocol, &cfg, n_reads)
            }
            SamplerChoice::Remote { config } => remote_sample(config, problem, n_reads),
            SamplerChoice::Exact { .. } | SamplerChoice::ExactMoments { .. } => Err(Error::domain(
                "exact samplers act on the logical model, not on physical problems",
            )),
        }
    }
}
