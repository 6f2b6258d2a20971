use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::ising::SpinVector;
use crate::moments::Moments;

/// Which layer of the encoding a set of spins lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Physical,
    Code,
    Logical,
}

/// Multiset of spin configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    level: Level,
    width: usize,
    states: BTreeMap<SpinVector, u64>,
    n_total: u64,
}

impl SampleSet {
    pub fn new(level: Level, width: usize) -> Self {
        SampleSet {
            level,
            width,
            states: BTreeMap::new(),
            n_total: 0,
        }
    }

    pub fn from_states<I>(level: Level, width: usize, states: I) -> Result<Self>
    where
        I: IntoIterator<Item = SpinVector>,
    {
        let mut set = SampleSet::new(level, width);
        for s in states {
            set.insert(s, 1)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, state: SpinVector, count: u64) -> Result<()> {
        check_width(self.width, state.len())?;
        if count == 0 {
            return Err(Error::domain("sample counts must be positive"));
        }
        *self.states.entry(state).or_insert(0) += count;
        self.n_total += count;
        Ok(())
    }

    /// Add `count` copies of a raw spin slice known to be valid.
    pub(crate) fn insert_raw(&mut self, spins: &[i8], count: u64) {
        debug_assert_eq!(spins.len(), self.width);
        // Lookup by slice avoids an allocation for repeated states.
        if let Some(c) = self.states.get_mut(spins) {
            *c += count;
        } else {
            self.states.insert(SpinVector::new(spins.to_vec()).expect("spins"), count);
        }
        self.n_total += count;
    }

    pub fn merge(&mut self, other: &SampleSet) -> Result<()> {
        check_width(self.width, other.width)?;
        for (s, &c) in &other.states {
            *self.states.entry(s.clone()).or_insert(0) += c;
        }
        self.n_total += other.n_total;
        Ok(())
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn n_distinct(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }

    pub fn count(&self, state: &SpinVector) -> u64 {
        self.states.get(state).copied().unwrap_or(0)
    }

    pub fn frequency(&self, state: &SpinVector) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.count(state) as f64 / self.n_total as f64
        }
    }

    /// Distinct states with their counts, in lexicographic state order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&SpinVector, u64)> {
        self.states.iter().map(|(s, &c)| (s, c))
    }

    pub fn moments(&self) -> Result<Moments> {
        if self.is_empty() {
            return Err(Error::domain("moments of an empty sample set"));
        }
        let mut acc = Moments::zeros(self.width);
        for (s, c) in self.iter() {
            acc.accumulate(s.as_slice(), c as f64);
        }
        acc.normalize(self.n_total as f64);
        Ok(acc)
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = (&'a SpinVector, u64);
    type IntoIter = Box<dyn ExactSizeIterator<Item = (&'a SpinVector, u64)> + 'a>;

    fn into_iter(self) -> Self::IntoIter {
        Box::new(self.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_total_stay_consistent() {
        let mut s = SampleSet::new(Level::Logical, 2);
        s.insert(SpinVector::new(vec![1, -1]).unwrap(), 3).unwrap();
        s.insert_raw(&[1, -1], 2);
        s.insert_raw(&[-1, -1], 1);
        assert_eq!(s.n_total(), 6);
        assert_eq!(s.n_distinct(), 2);
        assert_eq!(s.iter().map(|(_, c)| c).sum::<u64>(), s.n_total());
        assert!(s.insert(SpinVector::uniform(2, 1), 0).is_err());
        assert!(s.insert(SpinVector::uniform(3, 1), 1).is_err());
    }
}
