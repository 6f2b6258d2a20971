use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::SpinVector;
use crate::rng::stream;

use super::BinaryDataset;

/// Bars-and-stripes images of side `d`, `size` draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasSpec {
    pub d: usize,
    pub size: usize,
    pub seed: u64,
}

impl BasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.size < 1 {
            return Err(Error::domain("BAS needs d >= 2 and size >= 1"));
        }
        if self.d * self.d > 64 {
            return Err(Error::domain("BAS side too large"));
        }
        Ok(())
    }
}

fn image(d: usize, rows: bool, bits: u64) -> SpinVector {
    let spins = (0..d * d)
        .map(|p| {
            let line = if rows { p / d } else { p % d };
            if bits >> line & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect();
    SpinVector::new(spins).expect("spins")
}

/// Each draw picks rows or columns with probability 1/2, then sets every
/// row (or column) on with probability 1/2. Images are flattened row-major.
pub fn generate_bas(spec: &BasSpec) -> Result<BinaryDataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, &[]);
    let vectors = (0..spec.size)
        .map(|_| {
            let rows = rng.random::<bool>();
            let bits = rng.random::<u64>() & ((1u64 << spec.d) - 1);
            image(spec.d, rows, bits)
        })
        .collect();
    BinaryDataset::new(spec.d * spec.d, vectors)
}

/// The `2^(d+1) - 2` distinct images, sorted.
pub fn bas_images(d: usize) -> Vec<SpinVector> {
    let mut all: Vec<SpinVector> = [true, false]
        .into_iter()
        .flat_map(|rows| (0..1u64 << d).map(move |bits| image(d, rows, bits)))
        .collect();
    all.sort();
    all.dedup();
    all
}

pub fn is_bas_image(x: &SpinVector, d: usize) -> bool {
    let s = x.as_slice();
    s.len() == d * d
        && ((0..d).all(|r| (0..d).all(|c| s[r * d + c] == s[r * d]))
            || (0..d).all(|c| (0..d).all(|r| s[r * d + c] == s[c])))
}

/// Generating distribution: uniform images get `2 p0`, the rest `p0`,
/// with `p0 = 2^-(d+1)`.
pub fn ideal_bas_distribution(d: usize) -> Vec<(SpinVector, f64)> {
    let p0 = 0.5f64.powi(d as i32 + 1);
    bas_images(d)
        .into_iter()
        .map(|x| {
            let uniform = x.as_slice().iter().all(|&s| s == x.get(0));
            let p = if uniform { 2.0 * p0 } else { p0 };
            (x, p)
        })
        .collect()
}

/// Log-likelihood of the generating distribution scored against itself.
pub fn ideal_bas_ll(d: usize) -> f64 {
    let p0 = 0.5f64.powi(d as i32 + 1);
    let others = 2f64.powi(d as i32 + 1) - 4.0;
    p0 * (4.0 * (2.0 * p0).ln() + others * p0.ln())
}
