use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Autoencoder, NnError, Result};
use crate::data::{read_idx, write_idx_file, IdxArray, IdxData, LabeledImageSet};

const ENCODE_CHUNK: usize = 256;

/// Bottleneck vectors of every image of a dataset, with the dataset's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet {
    pub vectors: Array2<f32>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub source_dataset_id: String,
    pub model_id: String,
}

impl EmbeddedSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

/// Encode each flattened image; row `i` is the embedding of image `i`.
pub fn embed_dataset(model: &Autoencoder<f32>, set: &LabeledImageSet, model_id: &str) -> Result<EmbeddedSet> {
    let flat = set.flattened();
    if flat.ncols() != model.input_dim() {
        return Err(NnError::DimensionMismatch { expected: model.input_dim(), got: flat.ncols() });
    }
    let mut vectors = Array2::zeros((set.len(), model.bottleneck_dim()));
    for (src, mut dst) in flat.axis_chunks_iter(Axis(0), ENCODE_CHUNK).zip(vectors.axis_chunks_iter_mut(Axis(0), ENCODE_CHUNK)) {
        dst.assign(&model.encode(src)?);
    }
    Ok(EmbeddedSet {
        vectors,
        labels: set.labels().to_vec(),
        class_names: set.class_names().to_vec(),
        source_dataset_id: set.id().to_string(),
        model_id: model_id.to_string(),
    })
}

/// JSON sidecar linking stored embeddings to their dataset and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedManifest {
    pub dataset_id: String,
    pub model_id: String,
    pub bottleneck_dim: usize,
    pub vectors_path: PathBuf,
    pub labels_path: PathBuf,
    pub class_names: Vec<String>,
}

/// Write float32 IDX vectors, byte IDX labels and a manifest named after the model id.
pub fn save_embedded(set: &EmbeddedSet, dir: impl AsRef<Path>) -> Result<(PathBuf, EmbeddedManifest)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let vectors_path = dir.join(format!("{}-vectors.idx", set.model_id));
    let labels_path = dir.join(format!("{}-labels.idx", set.model_id));
    write_idx_file(
        &vectors_path,
        &IdxArray { dims: vec![set.len(), set.dim()], data: IdxData::F32(set.vectors.iter().copied().collect()) },
    )?;
    let labels = set
        .labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| NnError::MalformedModel(format!("label {l} exceeds a byte"))))
        .collect::<Result<Vec<u8>>>()?;
    write_idx_file(&labels_path, &IdxArray { dims: vec![set.len()], data: IdxData::U8(labels) })?;
    let manifest = EmbeddedManifest {
        dataset_id: set.source_dataset_id.clone(),
        model_id: set.model_id.clone(),
        bottleneck_dim: set.dim(),
        vectors_path,
        labels_path,
        class_names: set.class_names.clone(),
    };
    let path = dir.join(format!("{}.json", set.model_id));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((path, manifest))
}

pub fn load_embedded(manifest_path: impl AsRef<Path>) -> Result<(EmbeddedManifest, EmbeddedSet)> {
    let manifest: EmbeddedManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    let vectors = read_idx(std::io::BufReader::new(fs::File::open(&manifest.vectors_path)?))?;
    let labels = read_idx(std::io::BufReader::new(fs::File::open(&manifest.labels_path)?))?;
    let vectors = match (vectors.dims.as_slice(), vectors.data) {
        (&[n, d], IdxData::F32(v)) if d == manifest.bottleneck_dim => {
            Array2::from_shape_vec((n, d), v).expect("IDX reader checked the element count")
        }
        (dims, _) => return Err(NnError::MalformedModel(format!("embedding file has dims {dims:?}"))),
    };
    let labels: Vec<usize> = match labels.data {
        IdxData::U8(v) => v.into_iter().map(usize::from).collect(),
        IdxData::F32(_) => return Err(NnError::MalformedModel("labels must be unsigned bytes".into())),
    };
    if labels.len() != vectors.nrows() {
        return Err(NnError::MalformedModel(format!("{} vectors but {} labels", vectors.nrows(), labels.len())));
    }
    if labels.iter().any(|&l| l >= manifest.class_names.len()) {
        return Err(NnError::MalformedModel("label outside the manifest's class list".into()));
    }
    let set = EmbeddedSet {
        vectors,
        labels,
        class_names: manifest.class_names.clone(),
        source_dataset_id: manifest.dataset_id.clone(),
        model_id: manifest.model_id.clone(),
    };
    Ok((manifest, set))
}
