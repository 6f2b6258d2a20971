use std::path::Path;

use crate::error::{Error, Result};
use crate::ising::SpinVector;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX image and label files.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistRaw {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, one vector per image.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.source,
                format!("offset {}", self.pos),
                format!("truncated file: {what} needs {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32("magic number")?;
        if found != expected {
            return Err(Error::parse(
                self.source,
                "offset 0",
                format!("bad magic number {found:#010x}, expected {expected:#010x}"),
            ));
        }
        Ok(())
    }
}

/// Big-endian IDX image file: magic, count, rows, cols, then `u8` pixels.
pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let mut c = Cursor { bytes, pos: 0, source };
    c.magic(IDX_IMAGES_MAGIC)?;
    let count = c.u32("image count")? as usize;
    let rows = c.u32("row count")? as usize;
    let cols = c.u32("column count")? as usize;
    let images = (0..count)
        .map(|k| c.take(rows * cols, &format!("image {k}")).map(<[u8]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, cols, images))
}

/// Big-endian IDX label file: magic, count, then `u8` labels.
pub fn parse_idx_labels(bytes: &[u8], source: &str) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, pos: 0, source };
    c.magic(IDX_LABELS_MAGIC)?;
    let count = c.u32("label count")? as usize;
    Ok(c.take(count, "labels")?.to_vec())
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<MnistRaw> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    let (rows, cols, images) = parse_idx_images(&read(images_path)?, &images_path.display().to_string())?;
    let labels = parse_idx_labels(&read(labels_path)?, &labels_path.display().to_string())?;
    if images.len() != labels.len() {
        return Err(Error::parse(
            labels_path.display().to_string(),
            "offset 4",
            format!("count mismatch: {} images but {} labels", images.len(), labels.len()),
        ));
    }
    Ok(MnistRaw {
        rows,
        cols,
        images,
        labels,
    })
}

/// 28x28 pixels to a 4x4 ±1 image: mean of each 7x7 block, thresholded at
/// 127.5.
pub fn coarse_grain_binarize(image: &[u8]) -> Result<SpinVector> {
    if image.len() != 28 * 28 {
        return Err(Error::Dimension {
            expected: 28 * 28,
            actual: image.len(),
        });
    }
    let spins = (0..16)
        .map(|k| {
            let (br, bc) = (k / 4, k % 4);
            let sum: u32 = (0..7)
                .flat_map(|r| (0..7).map(move |c| (br * 7 + r) * 28 + bc * 7 + c))
                .map(|p| image[p] as u32)
                .sum();
            if sum as f64 / 49.0 > 127.5 {
                1
            } else {
                -1
            }
        })
        .collect();
    SpinVector::new(spins)
}
