use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingProblem;
use crate::rng::StreamRng;
use crate::samples::SampleSet;

use super::schedule::{AnnealSchedule, Bath, Protocol};
use super::{check_problem, collect_reads};

/// Spin-vector Monte Carlo settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmcConfig {
    pub bath: Bath,
    pub sweeps: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SvmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < 1 {
            return Err(Error::domain("SVMC needs at least one sweep"));
        }
        Ok(())
    }
}

/// Rotor energy `-A sum sin(t) + B (sum h cos(t) + sum J cos(t_i) cos(t_j))`.
pub fn svmc_energy(problem: &IsingProblem, theta: &[f64], a: f64, b: f64) -> f64 {
    let cos: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let transverse: f64 = theta.iter().map(|t| t.sin()).sum();
    let fields: f64 = problem.fields().iter().zip(&cos).map(|(h, c)| h * c).sum();
    let couplers: f64 = problem.couplers().map(|(i, j, w)| w * cos[i] * cos[j]).sum();
    -a * transverse + b * (fields + couplers)
}

/// Anneal classical O(2) rotors confined to the x-z half plane.
///
/// Every rotor starts at `theta = pi/2`. Each sweep proposes a fresh
/// uniform angle for every site in turn and accepts it with the Metropolis
/// rule at the bath temperature. Spins are read out as the sign of
/// `cos(theta)`; a rotor left exactly at `pi/2` is read as a fair coin.
pub fn svmc_sample(
    problem: &IsingProblem,
    schedule: &AnnealSchedule,
    protocol: Protocol,
    cfg: &SvmcConfig,
    n_reads: usize,
) -> Result<SampleSet> {
    check_problem(problem)?;
    cfg.validate()?;
    protocol.validate()?;
    let beta = schedule.beta(cfg.bath)?;
    let adj = problem.adjacency();
    let h = problem.fields();
    let n = problem.n_vars();
    let total = protocol.total_sweeps(cfg.sweeps);

    collect_reads(n, n_reads, cfg.seed, |rng: &mut StreamRng, out: &mut [i8]| {
        let mut cos = vec![0.0f64; n];
        let mut sin = vec![1.0f64; n];
        for k in 0..total {
            let (a, b) = schedule.at(protocol.s_at(k, cfg.sweeps));
            for i in 0..n {
                let (sn, cn) = (rng.random::<f64>() * PI).sin_cos();
                let local = h[i] + adj.weighted_sum(i, &cos);
                let de = -a * (sn - sin[i]) + b * (cn - cos[i]) * local;
                if de <= 0.0 || rng.random::<f64>() < (-beta * de).exp() {
                    cos[i] = cn;
                    sin[i] = sn;
                }
            }
        }
        for (o, &c) in out.iter_mut().zip(&cos) {
            *o = if c > 0.0 {
                1
            } else if c < 0.0 {
                -1
            } else if rng.random::<bool>() {
                1
            } else {
                -1
            };
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::enumerate_gibbs;
    use crate::ising::SpinVector;
    use crate::testutil::random_problem;

    #[test]
    fn rotor_energy_reduces_to_ising_at_poles() {
        let p = random_problem(5, 3);
        for idx in 0..32u64 {
            let x = SpinVector::from_index(idx, 5);
            let theta: Vec<f64> = x.as_slice().iter().map(|&s| if s > 0 { 0.0 } else { PI }).collect();
            let e = svmc_energy(&p, &theta, 0.0, 1.0);
            assert!((e - p.energy(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_rotor_matches_quadrature() {
        // Equilibrium density of one rotor at A = 0 is exp(-beta h cos t) on
        // [0, pi]; integrate it with the midpoint rule.
        let (h, beta) = (0.7, 1.5);
        let m = 200_000;
        let (mut up, mut all) = (0.0, 0.0);
        for k in 0..m {
            let t = (k as f64 + 0.5) * PI / m as f64;
            let w = (-beta * h * t.cos()).exp();
            all += w;
            if t < PI / 2.0 {
                up += w;
            }
        }
        let oracle = up / all;
        let p = IsingProblem::from_parts(vec![h], []).unwrap();
        let cfg = SvmcConfig {
            bath: Bath::Beta(beta),
            sweeps: 20,
            seed: 5,
        };
        let n = 40_000;
        let s = svmc_sample(&p, &AnnealSchedule::linear(), Protocol::Hold { s: 1.0 }, &cfg, n).unwrap();
        let f = s.frequency(&SpinVector::new(vec![1]).unwrap());
        let sigma = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!((f - oracle).abs() < 4.0 * sigma, "{f} vs {oracle}");
        let ising = enumerate_gibbs(&p, beta).unwrap().probability(&SpinVector::new(vec![1]).unwrap()).unwrap();
        assert!(oracle > ising);
    }

    #[test]
    fn transverse_dominated_readout_is_uniform() {
        let p = random_problem(6, 8);
        let cfg = SvmcConfig {
            bath: Bath::Beta(1.0),
            sweeps: 50,
            seed: 1,
        };
        let n = 20_000;
        let s = svmc_sample(&p, &AnnealSchedule::linear(), Protocol::Hold { s: 0.0 }, &cfg, n).unwrap();
        let m = s.moments().unwrap();
        for i in 0..6 {
            assert!(m.first(i).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = random_problem(6, 2);
        let cfg = SvmcConfig {
            bath: Bath::Beta(2.0),
            sweeps: 30,
            seed: 9,
        };
        let protocol = Protocol::Anneal {
            quench: crate::samplers::QuenchSpec::new(0.5, 10).unwrap(),
        };
        let a = svmc_sample(&p, &AnnealSchedule::linear(), protocol, &cfg, 200).unwrap();
        let b = svmc_sample(&p, &AnnealSchedule::linear(), protocol, &cfg, 200).unwrap();
        assert_eq!(a, b);
        let zero = SvmcConfig { sweeps: 0, ..cfg };
        assert!(svmc_sample(&p, &AnnealSchedule::linear(), protocol, &zero, 1).is_err());
    }
}
