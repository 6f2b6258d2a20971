//! Ising problems: local fields, pairwise couplers and their energy.
//!
//! The same type carries a logical Boltzmann machine (biases in the field
//! slots, weights in the coupler slots), a nested code-level problem, and an
//! embedded physical problem. Only physical instances carry hardware limits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};

/// A configuration of ±1 spins.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::domain(format!(
                "spin {pos} has value {}, expected +1 or -1",
                spins[pos]
            )));
        }
        Ok(SpinVector(spins))
    }

    pub fn uniform(n: usize, value: i8) -> Self {
        debug_assert!(value == 1 || value == -1);
        SpinVector(vec![value; n])
    }

    /// Bit `i` of `index` set means spin `i` is +1.
    pub fn from_index(index: u64, n: usize) -> Self {
        SpinVector(
            (0..n)
                .map(|i| if (index >> i) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    /// Inverse of [`SpinVector::from_index`]; `None` above 64 spins.
    pub fn to_index(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(
            self.0
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == 1)
                .fold(0u64, |acc, (i, _)| acc | (1 << i)),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        SpinVector(self.0.iter().map(|s| -s).collect())
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

impl TryFrom<Vec<i8>> for SpinVector {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        SpinVector::new(v)
    }
}

impl std::borrow::Borrow<[i8]> for SpinVector {
    fn borrow(&self) -> &[i8] {
        &self.0
    }
}

impl From<SpinVector> for Vec<i8> {
    fn from(v: SpinVector) -> Self {
        v.0
    }
}

impl fmt::Display for SpinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_char(' ')?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Bounds enforced by annealing hardware on programmed parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareLimits {
    pub h_max: f64,
    pub j_max: f64,
}

impl Default for HardwareLimits {
    fn default() -> Self {
        HardwareLimits {
            h_max: 2.0,
            j_max: 1.0,
        }
    }
}

/// `E(x) = sum_i h_i x_i + sum_{i<j} J_ij x_i x_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingProblem {
    fields: Vec<f64>,
    couplers: BTreeMap<(usize, usize), f64>,
    limits: Option<HardwareLimits>,
}

/// Compressed adjacency used by the sampler kernels.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// `sum_j J_ij s_j` for any real-valued per-site quantity `s`.
    #[inline]
    pub fn weighted_sum<T: Copy + Into<f64>>(&self, i: usize, values: &[T]) -> f64 {
        let mut acc = 0.0;
        for k in self.offsets[i]..self.offsets[i + 1] {
            acc += self.weights[k] * values[self.neighbors[k]].into();
        }
        acc
    }
}

/// Result of fixing a subset of variables.
#[derive(Clone, Debug)]
pub struct Clamped {
    pub problem: IsingProblem,
    /// Energy of the terms that involve only clamped variables.
    pub offset: f64,
    /// Original index of each variable of the reduced problem.
    pub free_vars: Vec<usize>,
}

impl IsingProblem {
    /// All-zero problem on `n` variables.
    pub fn new(n: usize) -> Self {
        IsingProblem {
            fields: vec![0.0; n],
            couplers: BTreeMap::new(),
            limits: None,
        }
    }

    pub fn from_parts(
        fields: Vec<f64>,
        couplers: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut problem = IsingProblem {
            fields,
            couplers: BTreeMap::new(),
            limits: None,
        };
        for (i, j, v) in couplers {
            let key = problem.pair_key(i, j)?;
            if problem.couplers.insert(key, v).is_some() {
                return Err(Error::domain(format!("coupler ({i}, {j}) given twice")));
            }
        }
        Ok(problem)
    }

    /// Fully connected problem with every pair present, visited in row-major
    /// pair order.
    pub fn complete(fields: Vec<f64>, mut weight: impl FnMut(usize, usize) -> f64) -> Self {
        let n = fields.len();
        let couplers = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| ((i, j), weight(i, j)))
            .collect();
        IsingProblem {
            fields,
            couplers,
            limits: None,
        }
    }

    fn pair_key(&self, i: usize, j: usize) -> Result<(usize, usize)> {
        let n = self.n_vars();
        if i == j {
            return Err(Error::domain(format!("self coupler on variable {i}")));
        }
        if i >= n || j >= n {
            return Err(Error::domain(format!(
                "coupler ({i}, {j}) out of range for {n} variables"
            )));
        }
        Ok((i.min(j), i.max(j)))
    }

    pub fn n_vars(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> f64 {
        self.fields[i]
    }

    pub fn set_field(&mut self, i: usize, value: f64) -> Result<()> {
        let n = self.n_vars();
        let slot = self
            .fields
            .get_mut(i)
            .ok_or_else(|| Error::domain(format!("variable {i} out of range for {n}")))?;
        *slot = value;
        Ok(())
    }

    pub fn coupler(&self, i: usize, j: usize) -> f64 {
        self.couplers
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set_coupler(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let key = self.pair_key(i, j)?;
        self.couplers.insert(key, value);
        Ok(())
    }

    /// Canonical `(i, j, J_ij)` triples with `i < j`, in order.
    pub fn couplers(&self) -> impl ExactSizeIterator<Item = (usize, usize, f64)> + '_ {
        self.couplers.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn n_couplers(&self) -> usize {
        self.couplers.len()
    }

    pub(crate) fn couplers_mut(&mut self) -> impl Iterator<Item = (&(usize, usize), &mut f64)> {
        self.couplers.iter_mut()
    }

    pub(crate) fn fields_mut(&mut self) -> &mut [f64] {
        &mut self.fields
    }

    pub fn limits(&self) -> Option<HardwareLimits> {
        self.limits
    }

    pub fn is_physical(&self) -> bool {
        self.limits.is_some()
    }

    /// Tag as a physical-layer instance, validating every parameter.
    pub fn with_limits(mut self, limits: HardwareLimits) -> Result<Self> {
        self.check_limits(&limits)?;
        self.limits = Some(limits);
        Ok(self)
    }

    fn check_limits(&self, limits: &HardwareLimits) -> Result<()> {
        if let Some((i, h)) = self
            .fields
            .iter()
            .enumerate()
            .find(|(_, h)| h.abs() > limits.h_max)
        {
            return Err(Error::domain(format!(
                "field h_{i} = {h} exceeds hardware limit {}",
                limits.h_max
            )));
        }
        if let Some((i, j, v)) = self.couplers().find(|(_, _, v)| v.abs() > limits.j_max) {
            return Err(Error::domain(format!(
                "coupler J_{i},{j} = {v} exceeds hardware limit {}",
                limits.j_max
            )));
        }
        Ok(())
    }

    /// Clip every parameter into `limits` and tag the result. Returns the
    /// number of parameters that had to be clipped.
    pub fn clip_to_limits(mut self, limits: HardwareLimits) -> (Self, usize) {
        let mut clipped = 0;
        for h in self.fields.iter_mut() {
            if h.abs() > limits.h_max {
                *h = h.clamp(-limits.h_max, limits.h_max);
                clipped += 1;
            }
        }
        for v in self.couplers.values_mut() {
            if v.abs() > limits.j_max {
                *v = v.clamp(-limits.j_max, limits.j_max);
                clipped += 1;
            }
        }
        self.limits = Some(limits);
        (self, clipped)
    }

    pub fn energy(&self, x: &SpinVector) -> Result<f64> {
        check_width(self.n_vars(), x.len())?;
        Ok(self.energy_of(x.as_slice()))
    }

    /// Energy of a raw spin slice; the caller guarantees the width.
    pub fn energy_of(&self, x: &[i8]) -> f64 {
        let local: f64 = self
            .fields
            .iter()
            .zip(x)
            .map(|(h, &s)| h * f64::from(s))
            .sum();
        let pair: f64 = self
            .couplers
            .iter()
            .map(|(&(i, j), v)| v * f64::from(x[i] * x[j]))
            .sum();
        local + pair
    }

    /// Multiply every field and coupler by `alpha > 0`.
    pub fn scale(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("scale factor must be positive, got {alpha}")));
        }
        let mut out = self.clone();
        out.fields.iter_mut().for_each(|h| *h *= alpha);
        out.couplers.values_mut().for_each(|v| *v *= alpha);
        if let Some(limits) = out.limits {
            out.check_limits(&limits)?;
        }
        Ok(out)
    }

    /// Fix the variables in `assignment` and fold them into the fields of
    /// the remaining ones. The reduced problem keeps the original relative
    /// order of the free variables.
    pub fn clamp(&self, assignment: &BTreeMap<usize, i8>) -> Result<Clamped> {
        let n = self.n_vars();
        for (&var, &value) in assignment {
            if var >= n {
                return Err(Error::domain(format!("clamped variable {var} out of range for {n}")));
            }
            if value != 1 && value != -1 {
                return Err(Error::domain(format!("clamped value {value} is not a spin")));
            }
        }
        let free_vars: Vec<usize> = (0..n).filter(|v| !assignment.contains_key(v)).collect();
        let mut new_index = vec![usize::MAX; n];
        for (k, &v) in free_vars.iter().enumerate() {
            new_index[v] = k;
        }

        let mut fields: Vec<f64> = free_vars.iter().map(|&v| self.fields[v]).collect();
        let mut offset: f64 = assignment
            .iter()
            .map(|(&v, &s)| self.fields[v] * f64::from(s))
            .sum();
        let mut couplers = Vec::new();
        for (&(i, j), &w) in &self.couplers {
            match (assignment.get(&i), assignment.get(&j)) {
                (None, None) => couplers.push((new_index[i], new_index[j], w)),
                (Some(&si), None) => fields[new_index[j]] += w * f64::from(si),
                (None, Some(&sj)) => fields[new_index[i]] += w * f64::from(sj),
                (Some(&si), Some(&sj)) => offset += w * f64::from(si * sj),
            }
        }
        Ok(Clamped {
            problem: IsingProblem::from_parts(fields, couplers)?,
            offset,
            free_vars,
        })
    }

    pub fn adjacency(&self) -> Adjacency {
        let n = self.n_vars();
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in &self.couplers {
            lists[i].push((j, w));
            lists[j].push((i, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in lists {
            for (j, w) in list {
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Adjacency {
            offsets,
            neighbors,
            weights,
        }
    }

    /// Serialize to the plain-text problem format: a header line with `N`,
    /// then `i i h_i` for every field and `i j J_ij` for every coupler.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n_vars());
        for (i, h) in self.fields.iter().enumerate() {
            let _ = writeln!(out, "{i} {i} {h:?}");
        }
        for (&(i, j), v) in &self.couplers {
            let _ = writeln!(out, "{i} {j} {v:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const SRC: &str = "problem text";
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(SRC, "line 1", "missing header"))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::parse(SRC, format!("line {line_no}"), "header must be N"))?;
        let mut problem = IsingProblem::new(n);
        let mut seen_fields = vec![false; n];
        for (line_no, line) in lines {
            let loc = || format!("line {line_no}");
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::parse(SRC, loc(), "expected `i j value`"));
            }
            let i: usize = parts[0]
                .parse()
                .map_err(|_| Error::parse(SRC, loc(), "bad index"))?;
            let j: usize = parts[1]
                .parse()
                .map_err(|_| Error::parse(SRC, loc(), "bad index"))?;
            let v: f64 = parts[2]
                .parse()
                .map_err(|_| Error::parse(SRC, loc(), "bad value"))?;
            if i >= n || j >= n {
                return Err(Error::parse(SRC, loc(), "index out of range"));
            }
            if i == j {
                if std::mem::replace(&mut seen_fields[i], true) {
                    return Err(Error::parse(SRC, loc(), "duplicate field"));
                }
                problem.fields[i] = v;
            } else {
                if i > j {
                    return Err(Error::parse(SRC, loc(), "coupler indices must satisfy i < j"));
                }
                if problem.couplers.insert((i, j), v).is_some() {
                    return Err(Error::parse(SRC, loc(), "duplicate coupler"));
                }
            }
        }
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::testutil::random_problem;
    use proptest::prelude::*;
    use rand::Rng;

    fn double_loop_energy(p: &IsingProblem, x: &[i8]) -> f64 {
        let n = p.n_vars();
        let mut e = 0.0;
        for i in 0..n {
            e += p.field(i) * x[i] as f64;
            for j in 0..n {
                if i < j {
                    e += p.coupler(i, j) * (x[i] as f64) * (x[j] as f64);
                }
            }
        }
        e
    }

    #[test]
    fn energy_direct_arithmetic() {
        let p = IsingProblem::from_parts(vec![1.0, -1.0], [(0, 1, 0.5)]).unwrap();
        let x = SpinVector::new(vec![1, 1]).unwrap();
        assert_eq!(p.energy(&x).unwrap(), 0.5);
    }

    #[test]
    fn zero_problem_has_zero_energy() {
        let p = IsingProblem::new(5);
        assert_eq!(p.energy(&SpinVector::from_index(13, 5)).unwrap(), 0.0);
    }

    #[test]
    fn energy_matches_double_loop_oracle() {
        let p = random_problem(16, 3);
        let mut rng = stream(4, &[]);
        for _ in 0..1000 {
            let x = SpinVector::from_index(rng.random_range(0..1u64 << 16), 16);
            let e = p.energy(&x).unwrap();
            assert!((e - double_loop_energy(&p, x.as_slice())).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_wrong_width() {
        let p = IsingProblem::new(3);
        assert!(matches!(
            p.energy(&SpinVector::uniform(2, 1)),
            Err(Error::Dimension { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn spin_vector_rejects_non_spins() {
        assert!(SpinVector::new(vec![1, 0, -1]).is_err());
    }

    #[test]
    fn self_coupler_rejected() {
        assert!(IsingProblem::from_parts(vec![0.0; 2], [(1, 1, 0.3)]).is_err());
        assert!(IsingProblem::from_parts(vec![0.0; 2], [(0, 1, 0.3), (1, 0, 0.1)]).is_err());
    }

    #[test]
    fn scale_examples() {
        let p = IsingProblem::from_parts(vec![1.0], []).unwrap();
        assert_eq!(p.scale(1.0).unwrap(), p);
        assert!((p.scale(0.03).unwrap().field(0) - 0.03).abs() < 1e-15);
        assert!(p.scale(0.0).is_err());
        assert!(p.scale(-1.0).is_err());
    }

    #[test]
    fn hardware_limits_validated_only_when_tagged() {
        let p = IsingProblem::from_parts(vec![3.0, 0.0], [(0, 1, -1.5)]).unwrap();
        assert!(p.clone().with_limits(HardwareLimits::default()).is_err());
        let (clipped, count) = p.clip_to_limits(HardwareLimits::default());
        assert_eq!(count, 2);
        assert_eq!(clipped.field(0), 2.0);
        assert_eq!(clipped.coupler(0, 1), -1.0);
    }

    #[test]
    fn clamp_nothing_is_identity() {
        let p = random_problem(4, 1);
        let c = p.clamp(&BTreeMap::new()).unwrap();
        assert_eq!(c.problem, p);
        assert_eq!(c.offset, 0.0);
    }

    #[test]
    fn clamp_folds_coupler_into_field() {
        let p = IsingProblem::from_parts(vec![0.0, 0.0], [(0, 1, 0.7)]).unwrap();
        let c = p.clamp(&BTreeMap::from([(1, 1)])).unwrap();
        assert_eq!(c.problem.n_vars(), 1);
        assert!((c.problem.field(0) - 0.7).abs() < 1e-15);
        assert_eq!(c.free_vars, vec![0]);
        assert!(p.clamp(&BTreeMap::from([(2, 1)])).is_err());
    }

    #[test]
    fn clamped_energy_plus_offset_is_original_energy() {
        let p = random_problem(6, 9);
        let assignment = BTreeMap::from([(1, -1i8), (4, 1i8)]);
        let c = p.clamp(&assignment).unwrap();
        for idx in 0..(1u64 << 4) {
            let free = SpinVector::from_index(idx, 4);
            let mut full = vec![0i8; 6];
            for (k, &v) in c.free_vars.iter().enumerate() {
                full[v] = free.get(k);
            }
            for (&v, &s) in &assignment {
                full[v] = s;
            }
            let lhs = c.problem.energy(&free).unwrap() + c.offset;
            assert!((lhs - p.energy_of(&full)).abs() < 1e-12);
        }
    }

    #[test]
    fn text_format_parses_comments_and_rejects_duplicates() {
        let p = IsingProblem::from_text("2 # two spins\n0 0 1.5\n0 1 -0.25\n").unwrap();
        assert_eq!(p.field(0), 1.5);
        assert_eq!(p.coupler(0, 1), -0.25);
        assert!(IsingProblem::from_text("2\n0 1 1\n0 1 2\n").is_err());
        assert!(IsingProblem::from_text("2\n1 0 1\n").is_err());
        assert!(IsingProblem::from_text("").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            n in 1usize..7,
            vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 28),
        ) {
            let fields = vals[..n].to_vec();
            let p = IsingProblem::complete(fields, |i, j| vals[7 + i * 3 + j % 3]);
            let back = IsingProblem::from_text(&p.to_text()).unwrap();
            prop_assert_eq!(back.fields().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            p.fields().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            for ((i, j, a), (k, l, b)) in back.couplers().zip(p.couplers()) {
                prop_assert_eq!((i, j, a.to_bits()), (k, l, b.to_bits()));
            }
        }

        #[test]
        fn energy_is_linear_under_scaling(seed in 0u64..500, alpha in 0.01f64..3.0) {
            let p = random_problem(8, seed);
            let q = p.scale(alpha).unwrap();
            for idx in 0..256u64 {
                let x = SpinVector::from_index(idx, 8);
                let lhs = q.energy(&x).unwrap();
                let rhs = alpha * p.energy(&x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn scale_composes(seed in 0u64..500, a in 0.05f64..2.0, b in 0.05f64..2.0) {
            let p = random_problem(5, seed);
            let ab = p.scale(a).unwrap().scale(b).unwrap();
            let direct = p.scale(a * b).unwrap();
            for (x, y) in ab.fields().iter().zip(direct.fields()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
            for ((_, _, x), (_, _, y)) in ab.couplers().zip(direct.couplers()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
