//! IDX image/label files (the MNIST container format).
//!
//! Images use magic `0x00000803`: count, rows, cols as big-endian u32, then
//! one byte per pixel. Labels use magic `0x00000801`: count, then one byte
//! per label. Pixels are scaled into `[0, 1]` on load; the writer inverts the
//! scaling, so load -> save reproduces the input files byte for byte.

use std::fs;
use std::path::Path;

use super::{DataError, LabeledDataset, Provenance};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        if self.offset + n > self.bytes.len() {
            return Err(DataError::Truncated {
                path: self.path.display().to_string(),
                expected: self.offset + n,
                found: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32, DataError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(self) -> Result<(), DataError> {
        if self.offset != self.bytes.len() {
            return Err(DataError::TrailingBytes {
                path: self.path.display().to_string(),
                found: self.bytes.len() - self.offset,
            });
        }
        Ok(())
    }
}

fn check_magic(cursor: &mut Cursor, expected: u32) -> Result<(), DataError> {
    let found = cursor.read_u32()?;
    if found != expected {
        return Err(DataError::MagicMismatch {
            path: cursor.path.display().to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Loads an IDX image file and its label file into one dataset.
///
/// Each image becomes a row of `rows * cols` features in `[0, 1]`; labels
/// become the targets. The image shape is kept in the provenance so
/// [`save_idx`] can reproduce the files.
pub fn load_idx(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<LabeledDataset, DataError> {
    let image_path = images.as_ref();
    let label_path = labels.as_ref();

    let image_bytes = fs::read(image_path)?;
    let mut cur = Cursor { bytes: &image_bytes, offset: 0, path: image_path };
    check_magic(&mut cur, IMAGE_MAGIC)?;
    let count = cur.read_u32()? as usize;
    let rows = cur.read_u32()? as usize;
    let cols = cur.read_u32()? as usize;
    let pixel_count = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| DataError::InvalidSpec("image dimensions overflow".into()))?;
    let pixels = cur.take(pixel_count)?;
    let features: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    cur.finish()?;

    let label_bytes = fs::read(label_path)?;
    let mut cur = Cursor { bytes: &label_bytes, offset: 0, path: label_path };
    check_magic(&mut cur, LABEL_MAGIC)?;
    let label_count = cur.read_u32()? as usize;
    let raw_labels = cur.take(label_count)?;
    let targets: Vec<f64> = raw_labels.iter().map(|&l| l as f64).collect();
    cur.finish()?;

    if count != label_count {
        return Err(DataError::CountMismatch {
            images: image_path.display().to_string(),
            labels: label_path.display().to_string(),
            image_count: count,
            label_count,
        });
    }

    let mut provenance = Provenance::new(format!(
        "{} + {}",
        image_path.display(),
        label_path.display()
    ));
    provenance.image_shape = Some((rows, cols));
    LabeledDataset::from_flat(features, count, rows * cols, targets, provenance)
}

/// Writes a dataset back out as an IDX image/label pair.
///
/// Features are scaled by 255 and rounded to bytes; targets are rounded to
/// byte labels. The image shape comes from the provenance when present,
/// otherwise each row is written as a single-row image.
pub fn save_idx(
    data: &LabeledDataset,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<(), DataError> {
    let (rows, cols) = match data.provenance().image_shape {
        Some(shape) => shape,
        None => (1, data.dim()),
    };
    if rows * cols != data.dim() {
        return Err(DataError::InvalidSpec(format!(
            "image shape {rows}x{cols} does not match {} features",
            data.dim()
        )));
    }

    let n = data.len();
    let mut image_bytes = Vec::with_capacity(16 + n * data.dim());
    image_bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for i in 0..n {
        for &v in data.row(i) {
            image_bytes.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(images.as_ref(), image_bytes)?;

    let mut label_bytes = Vec::with_capacity(8 + n);
    label_bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    for i in 0..n {
        label_bytes.push(data.target(i).round().clamp(0.0, 255.0) as u8);
    }
    fs::write(labels.as_ref(), label_bytes)?;
    Ok(())
}
