use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingProblem;

/// Repetition-code length `C` and code penalty `gamma1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingConfig {
    level: usize,
    code_penalty: f64,
}

impl NestingConfig {
    pub fn new(level: usize, code_penalty: f64) -> Result<Self> {
        if level < 1 {
            return Err(Error::domain("nesting level C must be at least 1"));
        }
        if !(code_penalty > 0.0 && code_penalty <= 1.0) {
            return Err(Error::domain(format!(
                "code penalty gamma1 must lie in (0, 1], got {code_penalty}"
            )));
        }
        Ok(NestingConfig {
            level,
            code_penalty,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn code_penalty(&self) -> f64 {
        self.code_penalty
    }
}

/// A logical problem encoded over `C * N` code qubits.
///
/// Code qubit `(i, c)` has id `i * C + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedProblem {
    problem: IsingProblem,
    logical_vars: usize,
    config: NestingConfig,
}

impl NestedProblem {
    pub fn problem(&self) -> &IsingProblem {
        &self.problem
    }

    pub fn config(&self) -> NestingConfig {
        self.config
    }

    pub fn logical_vars(&self) -> usize {
        self.logical_vars
    }

    pub fn code_vars(&self) -> usize {
        self.problem.n_vars()
    }

    pub fn code_qubit(&self, logical: usize, copy: usize) -> usize {
        debug_assert!(logical < self.logical_vars && copy < self.config.level);
        logical * self.config.level + copy
    }

    /// Logical variable owning a code qubit.
    pub fn logical_of(&self, code: usize) -> usize {
        code / self.config.level
    }

    pub fn is_intra_logical(&self, a: usize, b: usize) -> bool {
        self.logical_of(a) == self.logical_of(b)
    }
}

/// Replace every logical qubit by `C` ferromagnetically bound copies.
///
/// Inter-logical couplers are copied onto all `C^2` code pairs, fields are
/// multiplied by `C`, and each logical qubit gets `C(C-1)/2` couplers of
/// strength `-gamma1`. Aligned states then carry `C^2` times the logical
/// energy plus a constant.
pub fn nest(logical: &IsingProblem, cfg: NestingConfig) -> Result<NestedProblem> {
    let c = cfg.level;
    let n = logical.n_vars();
    let fields = (0..n * c).map(|q| c as f64 * logical.field(q / c)).collect();
    let mut couplers = Vec::with_capacity(logical.n_couplers() * c * c + n * c * (c - 1) / 2);
    for i in 0..n {
        for a in 0..c {
            for b in a + 1..c {
                couplers.push((i * c + a, i * c + b, -cfg.code_penalty));
            }
        }
    }
    for (i, j, w) in logical.couplers() {
        for a in 0..c {
            for b in 0..c {
                couplers.push((i * c + a, j * c + b, w));
            }
        }
    }
    Ok(NestedProblem {
        problem: IsingProblem::from_parts(fields, couplers)?,
        logical_vars: n,
        config: cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::all_energies;
    use crate::testutil::random_problem;

    #[test]
    fn config_validation() {
        assert!(NestingConfig::new(0, 0.5).is_err());
        assert!(NestingConfig::new(2, 0.0).is_err());
        assert!(NestingConfig::new(2, 1.5).is_err());
        assert!(NestingConfig::new(2, 1.0).is_ok());
    }

    #[test]
    fn level_one_is_verbatim() {
        let p = random_problem(5, 3);
        let nested = nest(&p, NestingConfig::new(1, 0.3).unwrap()).unwrap();
        assert_eq!(nested.problem(), &p);
    }

    #[test]
    fn two_by_two_example() {
        let p = IsingProblem::from_parts(vec![0.1, 0.2], [(0, 1, 0.3)]).unwrap();
        let nested = nest(&p, NestingConfig::new(2, 0.4).unwrap()).unwrap();
        let q = nested.problem();
        assert_eq!(q.n_vars(), 4);
        assert_eq!(q.fields(), &[0.2, 0.2, 0.4, 0.4]);
        let cross: Vec<_> = q.couplers().filter(|&(a, b, _)| !nested.is_intra_logical(a, b)).collect();
        assert_eq!(cross.len(), 4);
        assert!(cross.iter().all(|&(_, _, w)| w == 0.3));
        assert_eq!(q.coupler(0, 1), -0.4);
        assert_eq!(q.coupler(2, 3), -0.4);
        assert_eq!(q.n_couplers(), 6);
    }

    #[test]
    fn aligned_energy_is_scaled_logical_energy() {
        for c in 1..=3usize {
            let p = random_problem(4, 40 + c as u64);
            let gamma1 = 0.35;
            let nested = nest(&p, NestingConfig::new(c, gamma1).unwrap()).unwrap();
            let constant = -gamma1 * (4 * c * (c - 1) / 2) as f64;
            for (idx, e) in all_energies(&p).unwrap().into_iter().enumerate() {
                let x = crate::SpinVector::from_index(idx as u64, 4);
                let aligned: Vec<i8> = (0..4 * c).map(|q| x.get(q / c)).collect();
                let lhs = nested.problem().energy_of(&aligned);
                assert!((lhs - ((c * c) as f64 * e + constant)).abs() < 1e-12);
            }
        }
    }
}
