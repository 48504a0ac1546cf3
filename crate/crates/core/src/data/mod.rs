//! Loading, generating and characterizing labeled image datasets.

mod augment;
mod cifar;
mod generate;
mod idx;
mod imagedir;
mod manifest;
mod resize;

use ndarray::{Array2, Array4, ArrayView3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use augment::{augment, box_blur3, hsv_to_rgb, rgb_to_hsv, AugmentationParams, SampledAugmentation};
pub use cifar::{decode_cifar10_records, encode_cifar10_records, load_cifar10_binary, CIFAR10_CLASSES, CIFAR_RECORD_LEN};
pub use generate::{generate_blobs, generate_gaussian, generate_replicated, GaussianDataset};
pub use idx::{load_idx, load_idx_with_classes, read_idx, write_idx, write_idx_file, IdxArray, IdxData};
pub use imagedir::{load_image_directory, DirectoryLoadReport};
pub use manifest::{load_manifest, save_dataset, DatasetManifest};
pub use resize::resize_bilinear;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed IDX header: {0}")]
    MalformedHeader(String),
    #[error("image count {images} does not match label count {labels}")]
    LengthMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is outside [0, {classes})")]
    InvalidLabel { index: usize, label: usize, classes: usize },
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("malformed CIFAR-10 record data: {0}")]
    MalformedRecord(String),
    #[error("class directory {0:?} holds no usable images")]
    EmptyClass(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("expected an RGB image, got {channels} channel(s)")]
    NotRgb { channels: usize },
    #[error("pixel intensity {value} at flat index {index} is not a finite value in [0, 1]")]
    InvalidIntensity { index: usize, value: f32 },
    #[error("invalid augmentation parameters: {0}")]
    InvalidParams(String),
    #[error("dataset of {n} samples is too small for a {fraction} validation split")]
    TooSmall { n: usize, fraction: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// N images of identical H×W×C shape with intensities in [0, 1] and class labels.
///
/// Sets built through [`LabeledImageSet::new`] cover every class at least once.
/// Subsets produced by [`LabeledImageSet::subset`] and [`split_train_val`] keep the
/// parent's class list and may leave classes empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    id: String,
    images: Array4<f32>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledImageSet {
    pub fn new(
        id: impl Into<String>,
        images: Array4<f32>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, h, w, c) = images.dim();
        if n == 0 || h == 0 || w == 0 {
            return Err(DataError::InvalidShape(format!("empty image array {n}x{h}x{w}x{c}")));
        }
        if c != 1 && c != 3 {
            return Err(DataError::InvalidShape(format!("{c} channels, expected 1 or 3")));
        }
        if labels.len() != n {
            return Err(DataError::LengthMismatch { images: n, labels: labels.len() });
        }
        let classes = class_names.len();
        let mut seen = vec![false; classes];
        for (index, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(DataError::InvalidLabel { index, label, classes });
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::MissingClass(missing));
        }
        if let Some((index, &value)) =
            images.iter().enumerate().find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(DataError::InvalidIntensity { index, value });
        }
        Ok(Self { id: id.into(), images, labels, class_names })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn images(&self) -> &Array4<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.images.dim().1
    }

    pub fn width(&self) -> usize {
        self.images.dim().2
    }

    pub fn channels(&self) -> usize {
        self.images.dim().3
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Flattened length of one image (H·W·C).
    pub fn feature_dim(&self) -> usize {
        self.height() * self.width() * self.channels()
    }

    pub fn image(&self, i: usize) -> ArrayView3<'_, f32> {
        self.images.index_axis(Axis(0), i)
    }

    /// N × (H·W·C) row-major copy of the pixels, channel fastest.
    pub fn flattened(&self) -> Array2<f32> {
        let n = self.len();
        let d = self.feature_dim();
        let data: Vec<f32> = self.images.iter().copied().collect();
        Array2::from_shape_vec((n, d), data).expect("image array is contiguous in logical order")
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn class_distribution(&self) -> Result<ClassDistribution> {
        ClassDistribution::from_counts(self.class_counts())
    }

    /// Rows `indices` of this set, in the given order.
    pub fn subset(&self, indices: &[usize], id: impl Into<String>) -> Self {
        let images = self.images.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self { id: id.into(), images, labels, class_names: self.class_names.clone() }
    }

    /// Every image resampled to `height`×`width` with [`resize_bilinear`].
    pub fn resized(&self, height: usize, width: usize) -> Self {
        if height == self.height() && width == self.width() {
            return self.clone();
        }
        let mut images = Array4::zeros((self.len(), height, width, self.channels()));
        for (i, mut out) in images.axis_iter_mut(Axis(0)).enumerate() {
            out.assign(&resize_bilinear(self.image(i), height, width));
        }
        Self { id: self.id.clone(), images, labels: self.labels.clone(), class_names: self.class_names.clone() }
    }

    /// Concatenate sets that share shape and classes.
    pub fn concat(id: impl Into<String>, parts: &[LabeledImageSet]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| DataError::InvalidShape("no parts to concatenate".into()))?;
        let views: Vec<_> = parts.iter().map(|p| p.images.view()).collect();
        let images = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| DataError::InvalidShape(format!("cannot concatenate: {e}")))?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        Self::new(id, images, labels, first.class_names.clone())
    }

    pub fn pixel(&self, i: usize, y: usize, x: usize, c: usize) -> f32 {
        self.images[[i, y, x, c]]
    }
}

/// Class frequencies N_c and probabilities p(c) = N_c / N.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    counts: Vec<usize>,
    probabilities: Vec<f64>,
}

impl ClassDistribution {
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(DataError::InvalidShape("distribution over zero classes".into()));
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(DataError::MissingClass(missing));
        }
        let total: usize = counts.iter().sum();
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self { counts, probabilities })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

/// Shannon entropy of the class distribution, in bits.
pub fn entropy(dist: &ClassDistribution) -> f64 {
    let h: f64 = dist.probabilities().iter().map(|&p| -p * p.log2()).sum();
    // A single class gives -1·log2(1) = -0.0.
    h.max(0.0)
}

/// Random (unstratified) partition into a training and a validation part.
///
/// The validation part receives `round(N·fraction)` samples; both parts keep the
/// original sample order.
pub fn split_train_val(set: &LabeledImageSet, fraction: f64, seed: u64) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let n = set.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::TooSmall { n, fraction });
    }
    let n_val = (n as f64 * fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(DataError::TooSmall { n, fraction });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val: Vec<usize> = order[..n_val].to_vec();
    let mut train: Vec<usize> = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((
        set.subset(&train, format!("{}-train", set.id())),
        set.subset(&val, format!("{}-val", set.id())),
    ))
}

pub(crate) fn default_class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|c| c.to_string()).collect()
}
