use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ising::IsingProblem;
use crate::rng::stream;

/// Scale of programming noise on hardware couplings.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.03;

/// Add i.i.d. Gaussian noise of standard deviation `sigma` to every field
/// and coupler (fields first, then couplers in pair order). Problems tagged
/// with hardware limits are clipped back into range.
pub fn apply_noise(problem: &IsingProblem, sigma: f64, seed: u64) -> Result<IsingProblem> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(problem.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = stream(seed, &[]);
    let mut noisy = problem.clone();
    for h in noisy.fields_mut() {
        *h += normal.sample(&mut rng);
    }
    for (_, v) in noisy.couplers_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(match problem.limits() {
        Some(limits) => noisy.clip_to_limits(limits).0,
        None => noisy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::HardwareLimits;
    use crate::testutil::random_problem;

    #[test]
    fn zero_sigma_is_identity() {
        let p = random_problem(5, 1);
        assert_eq!(apply_noise(&p, 0.0, 3).unwrap(), p);
        assert!(apply_noise(&p, -1.0, 3).is_err());
    }

    #[test]
    fn perturbation_statistics() {
        // 447 variables give ~10^5 couplers.
        let p = IsingProblem::complete(vec![0.0; 447], |_, _| 0.0);
        let noisy = apply_noise(&p, DEFAULT_NOISE_SIGMA, 7).unwrap();
        let draws: Vec<f64> = noisy
            .fields()
            .iter()
            .copied()
            .chain(noisy.couplers().map(|(_, _, v)| v))
            .collect();
        let n = draws.len() as f64;
        assert!(n >= 1e5);
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 * DEFAULT_NOISE_SIGMA / n.sqrt());
        assert!((var.sqrt() / DEFAULT_NOISE_SIGMA - 1.0).abs() < 0.02);
        assert_eq!(noisy, apply_noise(&p, DEFAULT_NOISE_SIGMA, 7).unwrap());
    }

    #[test]
    fn tagged_problems_stay_in_range() {
        let p = IsingProblem::from_parts(vec![2.0, -2.0], [(0, 1, 1.0)])
            .unwrap()
            .with_limits(HardwareLimits::default())
            .unwrap();
        let noisy = apply_noise(&p, 0.5, 1).unwrap();
        assert!(noisy.clone().with_limits(HardwareLimits::default()).is_ok());
        assert!(noisy.is_physical());
    }
}
