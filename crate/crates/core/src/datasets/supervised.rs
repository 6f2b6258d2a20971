use rand::Rng;

use crate::error::{Error, Result};
use crate::ising::SpinVector;
use crate::rng::stream;

use super::BinaryDataset;

/// Corner pixels of a 4x4 image, row-major.
pub const CORNERS: [usize; 4] = [0, 3, 12, 15];
pub const PIXELS_AFTER_CORNERS: usize = 12;
/// MNIST digits kept for the supervised task.
pub const MNIST_CLASSES: [u8; 4] = [1, 2, 3, 4];

/// Drop the corners of a 4x4 image and append one-hot label spins: bit
/// `position` is +1, the other `n_classes - 1` are -1.
pub fn with_label_bits(image: &SpinVector, position: usize, n_classes: usize) -> Result<SpinVector> {
    if image.len() != 16 {
        return Err(Error::Dimension {
            expected: 16,
            actual: image.len(),
        });
    }
    if position >= n_classes {
        return Err(Error::domain(format!("label position {position} out of range")));
    }
    let spins = (0..16)
        .filter(|p| !CORNERS.contains(p))
        .map(|p| image.get(p))
        .chain((0..n_classes).map(|k| if k == position { 1 } else { -1 }))
        .collect();
    SpinVector::new(spins)
}

/// Keep digits 1 to 4, in input order, and encode them as 12 pixels plus
/// four label bits.
pub fn prepare_supervised(images: &[SpinVector], labels: &[u8]) -> Result<BinaryDataset> {
    if images.len() != labels.len() {
        return Err(Error::Dimension {
            expected: images.len(),
            actual: labels.len(),
        });
    }
    let mut vectors = Vec::new();
    let mut classes = Vec::new();
    for (image, &label) in images.iter().zip(labels) {
        if let Some(position) = MNIST_CLASSES.iter().position(|&c| c == label) {
            vectors.push(with_label_bits(image, position, MNIST_CLASSES.len())?);
            classes.push(position + 1);
        }
    }
    BinaryDataset::labeled(PIXELS_AFTER_CORNERS + MNIST_CLASSES.len(), vectors, classes, MNIST_CLASSES.len())
}

/// Two-class task on 4x4 bars-and-stripes images: class 1 has constant
/// rows, class 2 constant columns. All-black and all-white images belong to
/// both and are skipped.
pub fn bars_vs_stripes(size: usize, seed: u64) -> Result<BinaryDataset> {
    let mut rng = stream(seed, &[]);
    let mut vectors = Vec::with_capacity(size);
    let mut classes = Vec::with_capacity(size);
    while vectors.len() < size {
        let rows = rng.random::<bool>();
        let bits = rng.random::<u8>() & 0xf;
        if bits == 0 || bits == 0xf {
            continue;
        }
        let image = SpinVector::new(
            (0..16)
                .map(|p| {
                    let line = if rows { p / 4 } else { p % 4 };
                    if bits >> line & 1 == 1 {
                        1
                    } else {
                        -1
                    }
                })
                .collect(),
        )?;
        let position = usize::from(!rows);
        vectors.push(with_label_bits(&image, position, 2)?);
        classes.push(position + 1);
    }
    BinaryDataset::labeled(PIXELS_AFTER_CORNERS + 2, vectors, classes, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supervised_layout() {
        let images: Vec<SpinVector> = (0..10u64).map(|k| SpinVector::from_index(k * 977, 16)).collect();
        let labels: Vec<u8> = (0..10).collect();
        let d = prepare_supervised(&images, &labels).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.width(), 16);
        assert_eq!(d.labels().unwrap(), &[1, 2, 3, 4]);
        assert_eq!(&d.vectors()[0].as_slice()[12..], &[1, -1, -1, -1]);
        let kept: Vec<i8> = (0..16).filter(|p| !CORNERS.contains(p)).map(|p| images[1].get(p)).collect();
        assert_eq!(&d.vectors()[0].as_slice()[..12], &kept[..]);
        assert_eq!(prepare_supervised(&images, &labels).unwrap(), d);
    }

    #[test]
    fn bars_vs_stripes_layout() {
        let d = bars_vs_stripes(200, 3).unwrap();
        assert_eq!(d.width(), 14);
        for (x, &label) in d.vectors().iter().zip(d.labels().unwrap()) {
            let bits = &x.as_slice()[12..];
            assert_eq!(bits[label - 1], 1);
            assert_eq!(bits.iter().filter(|&&b| b == 1).count(), 1);
            assert!(x.as_slice()[..12].iter().any(|&s| s != x.get(0)));
        }
    }
}
