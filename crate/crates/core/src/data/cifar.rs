use std::fs;
use std::path::Path;

use ndarray::Array4;

use super::{DataError, LabeledImageSet, Result};

/// One label byte followed by a 32×32 image stored as three 1024-byte planes (R, G, B).
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;

pub const CIFAR10_CLASSES: [&str; 10] =
    ["airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"];

/// Decode a run of CIFAR-10 binary records into `N×32×32×3` intensities and labels.
pub fn decode_cifar10_records(bytes: &[u8]) -> Result<(Array4<f32>, Vec<usize>)> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        return Err(DataError::MalformedRecord(format!(
            "{} bytes is not a positive multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut images = Array4::<f32>::zeros((n, SIDE, SIDE, 3));
    let mut labels = Vec::with_capacity(n);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        let label = record[0] as usize;
        if label >= CIFAR10_CLASSES.len() {
            return Err(DataError::InvalidLabel { index: i, label, classes: CIFAR10_CLASSES.len() });
        }
        labels.push(label);
        let planes = &record[1..];
        for c in 0..3 {
            for p in 0..PLANE {
                images[[i, p / SIDE, p % SIDE, c]] = planes[c * PLANE + p] as f32 / 255.0;
            }
        }
    }
    Ok((images, labels))
}

/// Inverse of [`decode_cifar10_records`] for intensities that are multiples of 1/255.
pub fn encode_cifar10_records(images: &Array4<f32>, labels: &[usize]) -> Result<Vec<u8>> {
    let (n, h, w, c) = images.dim();
    if (h, w, c) != (SIDE, SIDE, 3) || labels.len() != n {
        return Err(DataError::MalformedRecord(format!("cannot encode {n}x{h}x{w}x{c} with {} labels", labels.len())));
    }
    let mut out = Vec::with_capacity(n * CIFAR_RECORD_LEN);
    for (i, &label) in labels.iter().enumerate() {
        out.push(u8::try_from(label).map_err(|_| DataError::MalformedRecord(format!("label {label}")))?);
        for c in 0..3 {
            for p in 0..PLANE {
                out.push((images[[i, p / SIDE, p % SIDE, c]] * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(out)
}

/// Load the five training batches `data_batch_{1..5}.bin` from `dir`.
pub fn load_cifar10_binary(dir: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let dir = dir.as_ref();
    let mut parts = Vec::new();
    for b in 1..=5 {
        let path = dir.join(format!("data_batch_{b}.bin"));
        let bytes = fs::read(&path)?;
        parts.push(
            decode_cifar10_records(&bytes)
                .map_err(|e| DataError::MalformedRecord(format!("{}: {e}", path.display())))?,
        );
    }
    let n: usize = parts.iter().map(|(im, _)| im.dim().0).sum();
    let views: Vec<_> = parts.iter().map(|(im, _)| im.view()).collect();
    let images = ndarray::concatenate(ndarray::Axis(0), &views).expect("batches share 32x32x3 shape");
    let labels: Vec<usize> = parts.into_iter().flat_map(|(_, l)| l).collect();
    debug_assert_eq!(labels.len(), n);
    LabeledImageSet::new("cifar10", images, labels, CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect())
}
