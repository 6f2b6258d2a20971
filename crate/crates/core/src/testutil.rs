use rand::Rng;

use crate::ising::IsingProblem;
use crate::rng::stream;

/// Complete graph with fields and couplers i.i.d. uniform in [-1, 1).
pub(crate) fn random_problem(n: usize, seed: u64) -> IsingProblem {
    let mut rng = stream(seed, &[0xfeed]);
    let fields = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    IsingProblem::complete(fields, |_, _| rng.random_range(-1.0..1.0))
}
