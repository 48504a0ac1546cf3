use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::idx::{images_to_idx, labels_to_idx};
use super::{load_idx_with_classes, write_idx_file, LabeledImageSet, Result};

/// JSON description of a dataset stored as an IDX image/label pair.
///
/// Relative paths resolve against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub id: String,
    pub images_path: PathBuf,
    pub labels_path: PathBuf,
    pub class_names: Vec<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, LabeledImageSet)> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    let set = load_idx_with_classes(&manifest.images_path, &manifest.labels_path, &manifest.id, manifest.class_names.clone())?;
    Ok((manifest, set))
}

/// Write `<id>-images.idx`, `<id>-labels.idx` and `<id>.json` into `dir`.
///
/// Intensities are stored as unsigned bytes, so reloading quantizes to multiples of 1/255.
pub fn save_dataset(set: &LabeledImageSet, dir: impl AsRef<Path>) -> Result<(PathBuf, DatasetManifest)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let images_path = dir.join(format!("{}-images.idx", set.id()));
    let labels_path = dir.join(format!("{}-labels.idx", set.id()));
    write_idx_file(&images_path, &images_to_idx(set))?;
    write_idx_file(&labels_path, &labels_to_idx(set.labels())?)?;
    let manifest = DatasetManifest {
        id: set.id().to_string(),
        images_path,
        labels_path,
        class_names: set.class_names().to_vec(),
    };
    let path = dir.join(format!("{}.json", set.id()));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((path, manifest))
}
