//! Brute-force Gibbs distributions for problems small enough to enumerate.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{check_width, Error, Result};
use crate::ising::{IsingProblem, SpinVector};
use crate::moments::Moments;
use crate::rng::stream;
use crate::samples::{Level, SampleSet};

/// Largest problem that will be enumerated.
pub const ENUMERATION_CAP: usize = 24;

/// Energies closer than this are treated as the same level.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

fn check_cap(n: usize) -> Result<()> {
    if n > ENUMERATION_CAP {
        Err(Error::Capacity(format!(
            "{n} variables exceeds the enumeration cap of {ENUMERATION_CAP}"
        )))
    } else {
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("inverse temperature must be finite and >= 0, got {beta}")))
    }
}

/// A group of states sharing one energy (within [`ENERGY_TOLERANCE`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    pub degeneracy: usize,
}

/// Every state energy of a problem, plus the sorted distinct levels.
#[derive(Clone, Debug)]
pub struct Spectrum {
    n: usize,
    energies: Vec<f64>,
    levels: Vec<EnergyLevel>,
}

impl Spectrum {
    pub fn new(problem: &IsingProblem) -> Result<Self> {
        let energies = all_energies(problem)?;
        let levels = group_levels(energies.iter().copied().map(|e| (e, 1usize)));
        Ok(Spectrum {
            n: problem.n_vars(),
            energies,
            levels,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    /// Energy of every state, indexed as in [`SpinVector::from_index`].
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn levels(&self) -> &[EnergyLevel] {
        &self.levels
    }

    pub fn ground_energy(&self) -> f64 {
        self.levels[0].energy
    }

    /// max |E(x)|.
    pub fn max_abs_energy(&self) -> f64 {
        let lo = self.levels[0].energy.abs();
        let hi = self.levels[self.levels.len() - 1].energy.abs();
        lo.max(hi)
    }

    /// Index of the level containing `energy`, if any.
    pub fn find_level(&self, energy: f64) -> Option<usize> {
        let k = self
            .levels
            .partition_point(|l| l.energy < energy - ENERGY_TOLERANCE);
        [k, k.saturating_sub(1)]
            .into_iter()
            .find(|&i| i < self.levels.len() && (self.levels[i].energy - energy).abs() <= ENERGY_TOLERANCE)
    }

    pub fn log_partition(&self, beta: f64) -> f64 {
        let e0 = self.ground_energy();
        let sum: f64 = self
            .levels
            .iter()
            .map(|l| l.degeneracy as f64 * (-beta * (l.energy - e0)).exp())
            .sum();
        -beta * e0 + sum.ln()
    }

    /// Gibbs probability of each level at inverse temperature `beta`.
    pub fn level_probabilities(&self, beta: f64) -> Vec<f64> {
        let e0 = self.ground_energy();
        let mut p: Vec<f64> = self
            .levels
            .iter()
            .map(|l| l.degeneracy as f64 * (-beta * (l.energy - e0)).exp())
            .collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
        p
    }
}

/// Energies of all `2^n` states in index order.
///
/// The variables are split into a low and a high half; the energy of each
/// half is tabulated directly and the cross term is a short dot product, so
/// every entry is an exact sum with no accumulated drift. In particular
/// `E(x) == E(-x)` bit for bit when all fields vanish.
pub fn all_energies(problem: &IsingProblem) -> Result<Vec<f64>> {
    let n = problem.n_vars();
    check_cap(n)?;
    let n_low = n / 2;
    let n_high = n - n_low;
    let fields = problem.fields();

    let half_energy = |offset: usize, width: usize, idx: usize| -> f64 {
        let spin = |k: usize| if (idx >> k) & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for k in 0..width {
            e += fields[offset + k] * spin(k);
        }
        for (i, j, w) in problem.couplers() {
            if i >= offset && j < offset + width {
                e += w * spin(i - offset) * spin(j - offset);
            }
        }
        e
    };
    let low: Vec<f64> = (0..1usize << n_low).map(|k| half_energy(0, n_low, k)).collect();
    let high: Vec<f64> = (0..1usize << n_high)
        .map(|k| half_energy(n_low, n_high, k))
        .collect();

    let cross: Vec<(usize, usize, f64)> = problem
        .couplers()
        .filter(|&(i, j, _)| i < n_low && j >= n_low)
        .collect();
    let mut energies = vec![0.0; 1usize << n];
    let mut c = vec![0.0; n_low];
    for (hi, &e_high) in high.iter().enumerate() {
        c.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, w) in &cross {
            let sj = if (hi >> (j - n_low)) & 1 == 1 { w } else { -w };
            c[i] += sj;
        }
        let base = hi << n_low;
        for (lo, &e_low) in low.iter().enumerate() {
            let mut dot = 0.0;
            for (k, &ck) in c.iter().enumerate() {
                dot += if (lo >> k) & 1 == 1 { ck } else { -ck };
            }
            energies[base | lo] = e_low + e_high + dot;
        }
    }
    Ok(energies)
}

/// Sort `(energy, weight)` pairs and merge those within tolerance of the
/// first energy of their group.
pub(crate) fn group_levels<I>(items: I) -> Vec<EnergyLevel>
where
    I: IntoIterator<Item = (f64, usize)>,
{
    let mut items: Vec<(f64, usize)> = items.into_iter().collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut levels: Vec<EnergyLevel> = Vec::new();
    for (e, d) in items {
        match levels.last_mut() {
            Some(last) if e - last.energy <= ENERGY_TOLERANCE => last.degeneracy += d,
            _ => levels.push(EnergyLevel {
                energy: e,
                degeneracy: d,
            }),
        }
    }
    levels
}

/// Exact Boltzmann distribution of a problem at one inverse temperature.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    beta: f64,
    n: usize,
    energies: Vec<f64>,
    probabilities: Vec<f64>,
    log_z: f64,
    levels: Vec<(EnergyLevel, f64)>,
}

impl GibbsTable {
    pub fn from_spectrum(spectrum: &Spectrum, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let e0 = spectrum.ground_energy();
        let mut probabilities: Vec<f64> = spectrum
            .energies
            .iter()
            .map(|&e| (-beta * (e - e0)).exp())
            .collect();
        let sum: f64 = probabilities.iter().sum();
        probabilities.iter_mut().for_each(|p| *p /= sum);
        let level_p = spectrum.level_probabilities(beta);
        Ok(GibbsTable {
            beta,
            n: spectrum.n,
            energies: spectrum.energies.clone(),
            probabilities,
            log_z: -beta * e0 + sum.ln(),
            levels: spectrum.levels.iter().copied().zip(level_p).collect(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    /// Probabilities of all states, indexed as in [`SpinVector::from_index`].
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn probability(&self, x: &SpinVector) -> Result<f64> {
        check_width(self.n, x.len())?;
        Ok(self.probabilities[x.to_index().expect("width checked") as usize])
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// Z itself; overflows to infinity for very cold, strongly coupled problems.
    pub fn partition_function(&self) -> f64 {
        self.log_z.exp()
    }

    /// Distinct energies with their aggregated probabilities, ascending.
    pub fn energy_levels(&self) -> &[(EnergyLevel, f64)] {
        &self.levels
    }

    pub fn moments(&self) -> Moments {
        let mut m = Moments::zeros(self.n);
        for (idx, &p) in self.probabilities.iter().enumerate() {
            if p > 0.0 {
                let x = SpinVector::from_index(idx as u64, self.n);
                m.accumulate(x.as_slice(), p);
            }
        }
        m
    }

    /// Mean log-probability of the dataset vectors.
    pub fn log_likelihood<'a, I>(&self, dataset: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a SpinVector>,
    {
        let mut total = 0.0;
        let mut count = 0usize;
        for x in dataset {
            check_width(self.n, x.len())?;
            let idx = x.to_index().expect("width checked") as usize;
            total += -self.beta * self.energies[idx] - self.log_z;
            count += 1;
        }
        if count == 0 {
            return Err(Error::domain("log-likelihood of an empty dataset"));
        }
        Ok(total / count as f64)
    }

    /// I.i.d. draws, deterministic for a given seed.
    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<SampleSet> {
        if n_samples == 0 {
            return Err(Error::domain("n_samples must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.probabilities.len());
        let mut acc = 0.0;
        for &p in &self.probabilities {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = stream(seed, &[]);
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        let last = cdf.len() - 1;
        for _ in 0..n_samples {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(last);
            *counts.entry(idx).or_insert(0) += 1;
        }
        let mut set = SampleSet::new(Level::Logical, self.n);
        for (idx, c) in counts {
            set.insert(SpinVector::from_index(idx as u64, self.n), c)?;
        }
        Ok(set)
    }
}

pub fn enumerate_gibbs(problem: &IsingProblem, beta: f64) -> Result<GibbsTable> {
    check_beta(beta)?;
    GibbsTable::from_spectrum(&Spectrum::new(problem)?, beta)
}

pub fn exact_sample(
    problem: &IsingProblem,
    beta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SampleSet> {
    enumerate_gibbs(problem, beta)?.sample(n_samples, seed)
}

/// Largest singular value of the diagonal problem Hamiltonian.
pub fn operator_norm(problem: &IsingProblem) -> Result<f64> {
    Ok(Spectrum::new(problem)?.max_abs_energy())
}

pub fn exact_log_likelihood(
    problem: &IsingProblem,
    beta: f64,
    dataset: &[SpinVector],
) -> Result<f64> {
    for x in dataset {
        check_width(problem.n_vars(), x.len())?;
    }
    enumerate_gibbs(problem, beta)?.log_likelihood(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_problem;
    use proptest::prelude::*;

    #[test]
    fn tabulated_energies_match_direct_evaluation() {
        let p = random_problem(12, 5);
        let e = all_energies(&p).unwrap();
        for (idx, &v) in e.iter().enumerate() {
            let direct = p.energy(&SpinVector::from_index(idx as u64, 12)).unwrap();
            assert!((v - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let t = enumerate_gibbs(&random_problem(6, 1), 0.0).unwrap();
        for &p in t.probabilities() {
            assert!((p - 1.0 / 64.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_spin_closed_form() {
        let p = IsingProblem::from_parts(vec![1.0], []).unwrap();
        let t = enumerate_gibbs(&p, 1.0).unwrap();
        let down = SpinVector::new(vec![-1]).unwrap();
        let expected = 1f64.exp() / (1f64.exp() + (-1f64).exp());
        assert!((t.probability(&down).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.88080).abs() < 1e-5);
        assert!((t.partition_function() - (1f64.exp() + (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn normalization_of_states_and_levels() {
        let t = enumerate_gibbs(&random_problem(10, 2), 1.3).unwrap();
        let s: f64 = t.probabilities().iter().sum();
        let l: f64 = t.energy_levels().iter().map(|(_, p)| p).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((l - 1.0).abs() < 1e-12);
        assert!(t.partition_function() > 0.0);
    }

    #[test]
    fn capacity_and_domain_errors() {
        assert!(matches!(
            enumerate_gibbs(&IsingProblem::new(25), 1.0),
            Err(Error::Capacity(_))
        ));
        assert!(enumerate_gibbs(&IsingProblem::new(2), f64::NAN).is_err());
        assert!(operator_norm(&IsingProblem::new(30)).is_err());
    }

    #[test]
    fn degenerate_levels_are_grouped() {
        // Zero problem: a single level holding every state.
        let t = enumerate_gibbs(&IsingProblem::new(4), 2.0).unwrap();
        assert_eq!(t.energy_levels().len(), 1);
        assert_eq!(t.energy_levels()[0].0.degeneracy, 16);
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&IsingProblem::new(3)).unwrap(), 0.0);
        let single = IsingProblem::from_parts(vec![1.0], []).unwrap();
        assert_eq!(operator_norm(&single).unwrap(), 1.0);
        let chain =
            IsingProblem::from_parts(vec![0.0; 16], (0..15).map(|i| (i, i + 1, -1.0))).unwrap();
        // Brute force over all 2^16 states.
        let brute = (0..1u64 << 16)
            .map(|k| chain.energy(&SpinVector::from_index(k, 16)).unwrap().abs())
            .fold(0.0, f64::max);
        assert_eq!(brute, 15.0);
        assert_eq!(operator_norm(&chain).unwrap(), brute);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = random_problem(5, 8);
        assert_eq!(exact_sample(&p, 1.0, 1000, 3).unwrap(), exact_sample(&p, 1.0, 1000, 3).unwrap());
        assert_ne!(exact_sample(&p, 1.0, 1000, 3).unwrap(), exact_sample(&p, 1.0, 1000, 4).unwrap());
        assert!(exact_sample(&p, 1.0, 0, 3).is_err());
    }

    #[test]
    fn uniform_sampling_within_multinomial_bounds() {
        let n = 100_000u64;
        let s = exact_sample(&random_problem(4, 1), 0.0, n as usize, 11).unwrap();
        let p = 1.0 / 16.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for k in 0..16u64 {
            let c = s.count(&SpinVector::from_index(k, 4)) as f64;
            assert!((c - n as f64 * p).abs() < 4.0 * sigma, "state {k}: {c}");
        }
    }

    #[test]
    fn sampled_distribution_close_to_exact() {
        let p = random_problem(8, 21);
        let t = enumerate_gibbs(&p, 1.0).unwrap();
        let s = t.sample(100_000, 5).unwrap();
        let tvd: f64 = (0..256u64)
            .map(|k| {
                let x = SpinVector::from_index(k, 8);
                (s.frequency(&x) - t.probability(&x).unwrap()).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tvd <= 0.02, "tvd = {tvd}");
    }

    #[test]
    fn uniform_model_log_likelihood() {
        let data = vec![SpinVector::uniform(16, 1), SpinVector::from_index(77, 16)];
        let ll = exact_log_likelihood(&random_problem(16, 3), 0.0, &data).unwrap();
        assert!((ll + 16.0 * 2f64.ln()).abs() < 1e-9);
        assert!((ll + 11.0904).abs() < 1e-4);
    }

    #[test]
    fn delta_limit_log_likelihood_approaches_zero() {
        // Unique ground state at all +1 for a ferromagnet with a field.
        let p = IsingProblem::complete(vec![-0.5; 4], |_, _| -1.0);
        let data = vec![SpinVector::uniform(4, 1)];
        let mut last = f64::NEG_INFINITY;
        for beta in [0.5, 1.0, 2.0, 6.0] {
            let ll = exact_log_likelihood(&p, beta, &data).unwrap();
            assert!(ll < 0.0 && ll > last, "{ll}");
            last = ll;
        }
        assert!(last > -1e-8, "{last}");
    }

    #[test]
    fn clamped_gibbs_equals_conditional_gibbs() {
        for seed in 0..5 {
            let p = random_problem(6, 100 + seed);
            let assignment = BTreeMap::from([(0usize, 1i8), (3, -1)]);
            let c = p.clamp(&assignment).unwrap();
            let reduced = enumerate_gibbs(&c.problem, 0.7).unwrap();
            // Conditional distribution by brute force over the original.
            let full = enumerate_gibbs(&p, 0.7).unwrap();
            let mut cond = vec![0.0; 16];
            let mut norm = 0.0;
            for idx in 0..64u64 {
                let x = SpinVector::from_index(idx, 6);
                if x.get(0) != 1 || x.get(3) != -1 {
                    continue;
                }
                let free: Vec<i8> = c.free_vars.iter().map(|&v| x.get(v)).collect();
                let k = SpinVector::new(free).unwrap().to_index().unwrap() as usize;
                let pr = full.probability(&x).unwrap();
                cond[k] += pr;
                norm += pr;
            }
            for k in 0..16 {
                assert!((cond[k] / norm - reduced.probabilities()[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_likelihood_maximized_at_generating_beta() {
        // Exact Gibbs ensemble as the dataset: weights are the probabilities,
        // so score the expected log-likelihood over a beta grid.
        let p = random_problem(6, 12);
        let truth = enumerate_gibbs(&p, 1.2).unwrap();
        let score = |beta: f64| {
            let t = enumerate_gibbs(&p, beta).unwrap();
            truth
                .probabilities()
                .iter()
                .zip(t.energies())
                .map(|(w, e)| w * (-beta * e - t.log_partition()))
                .sum::<f64>()
        };
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 0.1).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| score(*a).total_cmp(&score(*b)))
            .unwrap();
        assert!((best - 1.2).abs() < 1e-9, "best beta {best}");
    }

    proptest! {
        #[test]
        fn gibbs_scaling_identity(seed in 0u64..200, alpha in 0.1f64..2.0, beta in 0.1f64..2.0) {
            let p = random_problem(6, seed);
            let a = enumerate_gibbs(&p.scale(alpha).unwrap(), beta).unwrap();
            let b = enumerate_gibbs(&p, alpha * beta).unwrap();
            for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn spin_flip_symmetry_without_fields(seed in 0u64..200, beta in 0.0f64..3.0) {
            let mut p = random_problem(6, seed);
            for i in 0..6 {
                p.set_field(i, 0.0).unwrap();
            }
            let t = enumerate_gibbs(&p, beta).unwrap();
            for idx in 0..64u64 {
                let x = SpinVector::from_index(idx, 6);
                prop_assert_eq!(t.probability(&x).unwrap(), t.probability(&x.negated()).unwrap());
            }
        }
    }
}
