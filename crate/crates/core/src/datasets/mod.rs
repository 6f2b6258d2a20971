//! Training data: bars-and-stripes, MNIST ingestion, supervised layouts.

mod bas;
mod mnist;
mod supervised;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{check_width, Error, Result};
use crate::ising::SpinVector;
use crate::rng::stream;

pub use bas::{bas_images, generate_bas, ideal_bas_distribution, ideal_bas_ll, is_bas_image, BasSpec};
pub use mnist::{
    coarse_grain_binarize, load_mnist_idx, parse_idx_images, parse_idx_labels, MnistRaw, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use supervised::{
    bars_vs_stripes, prepare_supervised, with_label_bits, CORNERS, MNIST_CLASSES, PIXELS_AFTER_CORNERS,
};

/// ±1 vectors of one width, optionally labelled.
///
/// Supervised datasets end with `label_bits` one-hot label spins; class id
/// `k` (1-based) sets label bit `k - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    width: usize,
    vectors: Vec<SpinVector>,
    labels: Option<Vec<usize>>,
    label_bits: usize,
}

impl BinaryDataset {
    pub fn new(width: usize, vectors: Vec<SpinVector>) -> Result<Self> {
        for v in &vectors {
            check_width(width, v.len())?;
        }
        Ok(BinaryDataset {
            width,
            vectors,
            labels: None,
            label_bits: 0,
        })
    }

    pub fn labeled(width: usize, vectors: Vec<SpinVector>, labels: Vec<usize>, label_bits: usize) -> Result<Self> {
        let mut d = Self::new(width, vectors)?;
        if labels.len() != d.vectors.len() {
            return Err(Error::Dimension {
                expected: d.vectors.len(),
                actual: labels.len(),
            });
        }
        if label_bits > width || labels.iter().any(|&l| l == 0 || l > label_bits) {
            return Err(Error::domain(format!(
                "labels must lie in 1..={label_bits} and fit within the vector width"
            )));
        }
        d.labels = Some(labels);
        d.label_bits = label_bits;
        Ok(d)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[SpinVector] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label_bits(&self) -> usize {
        self.label_bits
    }

    /// Number of leading non-label variables.
    pub fn n_pixels(&self) -> usize {
        self.width - self.label_bits
    }

    /// Index batches for one epoch: a permutation drawn from sub-stream
    /// `epoch` of `epoch_seed`, cut into runs of `batch_size`. The last
    /// batch may be shorter.
    pub fn minibatches(&self, batch_size: usize, epoch_seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
        minibatches(self.len(), batch_size, epoch_seed, epoch)
    }

    /// One vector per line, spins separated by spaces. Labelled datasets
    /// prefix each line with `label:` and start with `# label_bits K`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.labels.is_some() {
            let _ = writeln!(out, "# label_bits {}", self.label_bits);
        }
        for (k, v) in self.vectors.iter().enumerate() {
            if let Some(labels) = &self.labels {
                let _ = write!(out, "{}: ", labels[k]);
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const SRC: &str = "dataset file";
        let mut label_bits = None;
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let loc = format!("line {}", k + 1);
            if let Some(rest) = raw.trim().strip_prefix("# label_bits") {
                label_bits = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(SRC, &loc, "bad label_bits header"))?,
                );
                continue;
            }
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let spins_text = match line.split_once(':') {
                Some((label, rest)) => {
                    labels.push(
                        label
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| Error::parse(SRC, &loc, "bad label"))?,
                    );
                    rest
                }
                None => line,
            };
            let spins = spins_text
                .split_whitespace()
                .map(|t| t.parse::<i8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(SRC, &loc, "spins must be integers"))?;
            let v = SpinVector::new(spins).map_err(|_| Error::parse(SRC, &loc, "spins must be +1 or -1"))?;
            if let Some(first) = vectors.first() {
                let first: &SpinVector = first;
                if first.len() != v.len() {
                    return Err(Error::parse(SRC, &loc, "inconsistent vector width"));
                }
            }
            vectors.push(v);
        }
        let width = vectors.first().map_or(0, SpinVector::len);
        match (label_bits, labels.len()) {
            (None, 0) => Self::new(width, vectors),
            (Some(bits), n) if n == vectors.len() => Self::labeled(width, vectors, labels, bits),
            _ => Err(Error::parse(SRC, "end of file", "labels must be given for every vector, with a label_bits header")),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Shuffled index batches over `n` items for one epoch.
pub fn minibatches(n: usize, batch_size: usize, epoch_seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(epoch_seed, &[epoch as u64]));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minibatch_contract() {
        let batches = minibatches(5000, 50, 7, 0).unwrap();
        assert_eq!(batches.len(), 100);
        let mut seen: Vec<usize> = batches.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..5000).collect::<Vec<_>>());
        assert_ne!(batches, minibatches(5000, 50, 7, 1).unwrap());
        assert_eq!(batches, minibatches(5000, 50, 7, 0).unwrap());
        let ragged = minibatches(105, 50, 1, 0).unwrap();
        assert_eq!(ragged.iter().map(Vec::len).collect::<Vec<_>>(), vec![50, 50, 5]);
        assert!(minibatches(10, 0, 1, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let bas = generate_bas(&BasSpec { d: 3, size: 20, seed: 2 }).unwrap();
        assert_eq!(BinaryDataset::from_text(&bas.to_text()).unwrap(), bas);
        let bvs = bars_vs_stripes(30, 4).unwrap();
        assert_eq!(BinaryDataset::from_text(&bvs.to_text()).unwrap(), bvs);
        assert!(BinaryDataset::from_text("1 -1\n1\n").is_err());
        assert!(BinaryDataset::from_text("1 0\n").is_err());
        assert!(BinaryDataset::from_text("1: 1 -1\n").is_err());
    }
}
