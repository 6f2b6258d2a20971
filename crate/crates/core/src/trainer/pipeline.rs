use crate::error::{check_width, Error, Result};
use crate::gibbs::{enumerate_gibbs, GibbsTable};
use crate::ising::IsingProblem;
use crate::moments::Moments;
use crate::nqac::{decode, nest, ChainBreakStats, DecodePolicy, Embedding, HardwareGraph, NestedProblem};
use crate::nqac::clique_chains;
use crate::rng::derive_seed;
use crate::samplers::{AnnealSchedule, SamplerChoice};
use crate::samples::SampleSet;

use super::config::TrainConfig;

/// Model samples for one gradient step.
#[derive(Clone, Debug)]
pub enum ModelDraw {
    /// Decoded logical reads.
    Samples {
        logical: SampleSet,
        stats: Option<ChainBreakStats>,
    },
    /// The exact distribution of the scaled model.
    Exact(Box<GibbsTable>),
}

impl ModelDraw {
    pub fn moments(&self) -> Result<Moments> {
        match self {
            ModelDraw::Samples { logical, .. } => logical.moments(),
            ModelDraw::Exact(table) => Ok(table.moments()),
        }
    }

    pub fn samples(&self) -> Option<&SampleSet> {
        match self {
            ModelDraw::Samples { logical, .. } => Some(logical),
            ModelDraw::Exact(_) => None,
        }
    }
}

/// scale by alpha → nest → embed → sample → decode.
pub struct Pipeline {
    alpha: f64,
    sampler: SamplerChoice,
    nesting: crate::nqac::NestingConfig,
    gamma2: f64,
    decode_mode: crate::nqac::DecodeMode,
    hw: HardwareGraph,
    chains: Option<Vec<Vec<usize>>>,
    schedule: AnnealSchedule,
}

impl Pipeline {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let schedule = match cfg.sampler.anneal_settings() {
            Some(a) => a.load_schedule()?,
            None => AnnealSchedule::linear(),
        };
        let chains = match &cfg.embedding_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(Embedding::chains_from_text(&text)?)
            }
            None => None,
        };
        Ok(Pipeline {
            alpha: cfg.alpha,
            sampler: cfg.sampler.clone(),
            nesting: cfg.nesting()?,
            gamma2: cfg.gamma2,
            decode_mode: cfg.decode.0,
            hw: cfg.hardware.build()?,
            chains,
            schedule,
        })
    }

    pub fn sampler(&self) -> &SamplerChoice {
        &self.sampler
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Nominal inverse temperature of the exact backends.
    pub fn exact_beta(&self) -> Option<f64> {
        match self.sampler {
            SamplerChoice::Exact { beta } | SamplerChoice::ExactMoments { beta } => Some(beta),
            _ => None,
        }
    }

    /// Nest and embed a logical problem.
    pub fn encode(&self, logical: &IsingProblem) -> Result<(NestedProblem, Embedding, IsingProblem)> {
        let nested = nest(logical, self.nesting)?;
        let chains = match &self.chains {
            Some(chains) => chains.clone(),
            None => clique_chains(nested.code_vars(), &self.hw)?,
        };
        let embedding = Embedding::new(chains, self.gamma2, &self.hw)?;
        let physical = embedding.physical_problem(nested.problem())?;
        Ok((nested, embedding, physical))
    }

    /// Draw `n_reads` model samples of an (unscaled) logical problem.
    pub fn draw(&self, model: &IsingProblem, n_reads: usize, seed: u64) -> Result<ModelDraw> {
        let scaled = model.scale(self.alpha)?;
        match &self.sampler {
            SamplerChoice::ExactMoments { beta } => Ok(ModelDraw::Exact(Box::new(enumerate_gibbs(&scaled, *beta)?))),
            SamplerChoice::Exact { beta } => Ok(ModelDraw::Samples {
                logical: enumerate_gibbs(&scaled, *beta)?.sample(n_reads, seed)?,
                stats: None,
            }),
            sampler => {
                let (nested, embedding, physical) = self.encode(&scaled)?;
                let reads = sampler.sample_physical(&physical, &self.schedule, n_reads, seed)?;
                let policy = DecodePolicy {
                    mode: self.decode_mode,
                    tie_seed: derive_seed(seed, &[3]),
                };
                let decoded = decode(&reads, &embedding, &nested, policy)?;
                Ok(ModelDraw::Samples {
                    logical: decoded.logical,
                    stats: Some(decoded.stats),
                })
            }
        }
    }

    /// Negative-phase moments `<x_i>`, `<x_i x_j>` of the model.
    pub fn model_moments(&self, model: &IsingProblem, n_reads: usize, seed: u64) -> Result<Moments> {
        let m = self.draw(model, n_reads, seed)?.moments()?;
        check_width(model.n_vars(), m.width())?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{AnnealSettings, Bath, Protocol, SvmcConfig};
    use crate::testutil::random_problem;

    fn svmc(beta: f64) -> SamplerChoice {
        SamplerChoice::Svmc {
            config: SvmcConfig {
                bath: Bath::Beta(beta),
                sweeps: 20,
                seed: 0,
            },
            anneal: AnnealSettings {
                protocol: Protocol::Hold { s: 1.0 },
                ..AnnealSettings::default()
            },
        }
    }

    #[test]
    fn near_uniform_exact_model_has_small_moments() {
        let cfg = TrainConfig::with_sampler(SamplerChoice::Exact { beta: 1e-6 });
        let p = Pipeline::new(&cfg).unwrap();
        let m = p.model_moments(&random_problem(6, 1), 20_000, 3).unwrap();
        for i in 0..6 {
            assert!(m.first(i).abs() < 0.03);
            for j in i + 1..6 {
                assert!(m.second(i, j).abs() < 0.03);
            }
        }
    }

    #[test]
    fn decoded_moments_have_logical_width() {
        for level in 1..=3 {
            let cfg = TrainConfig {
                level,
                gamma1: 0.5,
                gamma2: 0.8,
                hardware: crate::trainer::HardwareSpec {
                    rows: 4,
                    cols: 4,
                    ..Default::default()
                },
                ..TrainConfig::with_sampler(svmc(2.0))
            };
            let p = Pipeline::new(&cfg).unwrap();
            let m = p.model_moments(&random_problem(4, 2), 50, 1).unwrap();
            assert_eq!(m.width(), 4);
        }
    }

    #[test]
    fn capacity_errors_propagate() {
        let cfg = TrainConfig {
            level: 3,
            hardware: crate::trainer::HardwareSpec {
                rows: 2,
                cols: 2,
                ..Default::default()
            },
            ..TrainConfig::with_sampler(svmc(1.0))
        };
        let p = Pipeline::new(&cfg).unwrap();
        assert!(matches!(
            p.model_moments(&random_problem(4, 2), 10, 1),
            Err(Error::Capacity(_))
        ));
    }
}
