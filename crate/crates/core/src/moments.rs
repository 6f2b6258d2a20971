use serde::{Deserialize, Serialize};

use crate::error::{check_width, Result};

/// First and second moments `<x_i>` and `<x_i x_j>` of a spin distribution.
///
/// The second moments are stored as a dense symmetric matrix; the diagonal
/// is identically one for spins and is kept only so that indexing is plain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    n: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            n,
            first: vec![0.0; n],
            second: vec![0.0; n * n],
        }
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn first(&self, i: usize) -> f64 {
        self.first[i]
    }

    pub fn first_all(&self) -> &[f64] {
        &self.first
    }

    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.second[i * self.n + j]
    }

    /// Add `weight` times the outer statistics of `x`.
    pub(crate) fn accumulate(&mut self, x: &[i8], weight: f64) {
        let n = self.n;
        for i in 0..n {
            let xi = f64::from(x[i]) * weight;
            self.first[i] += xi;
            let row = &mut self.second[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += xi * f64::from(x[j]);
            }
        }
    }

    pub(crate) fn normalize(&mut self, total: f64) {
        self.first.iter_mut().for_each(|v| *v /= total);
        self.second.iter_mut().for_each(|v| *v /= total);
    }

    pub fn from_vectors<'a, I>(n: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [i8]>,
    {
        let mut m = Moments::zeros(n);
        let mut count = 0usize;
        for v in vectors {
            check_width(n, v.len())?;
            m.accumulate(v, 1.0);
            count += 1;
        }
        if count == 0 {
            return Err(crate::Error::domain("moments of an empty batch"));
        }
        m.normalize(count as f64);
        Ok(m)
    }
}
