//! Model files: `DQAE` magic, little-endian u32 header length, JSON header, then every
//! layer's weight (row-major, out×in) and bias as little-endian f32, encoder first.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Autoencoder, Layer, NnError, Result, TrainHistory};

const MAGIC: &[u8; 4] = b"DQAE";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub version: u32,
    pub model_id: String,
    pub input_dim: usize,
    pub bottleneck_dim: usize,
    pub layer_dims: Vec<usize>,
    pub encoder_layers: usize,
    pub activations: Vec<Activation>,
    pub seed: u64,
    pub history: Option<TrainHistory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub header: ModelHeader,
    pub model: Autoencoder<f32>,
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &Autoencoder<f32>,
    model_id: &str,
    history: Option<&TrainHistory>,
) -> Result<ModelHeader> {
    let header = ModelHeader {
        version: FORMAT_VERSION,
        model_id: model_id.to_string(),
        input_dim: model.input_dim(),
        bottleneck_dim: model.bottleneck_dim(),
        layer_dims: model.layer_dims(),
        encoder_layers: model.encoder().len(),
        activations: model.layers().map(|l| l.activation).collect(),
        seed: model.seed(),
        history: history.cloned(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(8 + json.len() + 4 * model.parameter_count());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for slice in model.parameter_slices() {
        for v in slice {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(header)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StoredModel> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(NnError::MalformedModel("missing DQAE magic".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(8..8 + header_len)
        .ok_or_else(|| NnError::MalformedModel("header runs past end of file".into()))?;
    let header: ModelHeader = serde_json::from_slice(body)?;
    if header.version != FORMAT_VERSION {
        return Err(NnError::MalformedModel(format!("unsupported version {}", header.version)));
    }
    let dims = &header.layer_dims;
    if dims.len() < 3 || header.activations.len() != dims.len() - 1 || header.encoder_layers >= dims.len() - 1 {
        return Err(NnError::MalformedModel("inconsistent layer description".into()));
    }
    let mut blob = bytes[8 + header_len..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if (bytes.len() - 8 - header_len) != expected * 4 {
        return Err(NnError::MalformedModel(format!("expected {expected} parameters")));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (w, &activation) in dims.windows(2).zip(&header.activations) {
        let weight = Array2::from_shape_vec((w[1], w[0]), blob.by_ref().take(w[0] * w[1]).collect())
            .expect("length checked above");
        let bias = Array1::from_iter(blob.by_ref().take(w[1]));
        layers.push(Layer { weight, bias, activation });
    }
    let decoder = layers.split_off(header.encoder_layers);
    let model = Autoencoder::from_layers(layers, decoder, header.seed)?;
    if model.input_dim() != header.input_dim || model.bottleneck_dim() != header.bottleneck_dim {
        return Err(NnError::MalformedModel("header dimensions disagree with layers".into()));
    }
    Ok(StoredModel { header, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_model;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dqae");
        let model = init_model(30, 5, &[12, 8], 7).unwrap();
        let history = TrainHistory { train_mse: vec![0.1], val_mae: vec![0.2], best_epoch: 1, ..Default::default() };
        let header = save_model(&path, &model, "m", Some(&history)).unwrap();
        assert_eq!(header.layer_dims, vec![30, 12, 8, 5, 8, 12, 30]);
        let stored = load_model(&path).unwrap();
        assert_eq!(stored.model, model);
        assert_eq!(stored.header, header);
        // Header is followed by exactly the parameter blob.
        let bytes = fs::read(&path).unwrap();
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 8 + header_len + 4 * model.parameter_count());
    }

    #[test]
    fn truncated_blob() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dqae");
        save_model(&path, &init_model(10, 2, &[], 0).unwrap(), "m", None).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(NnError::MalformedModel(_))));
        fs::write(&path, b"nope").unwrap();
        assert!(matches!(load_model(&path), Err(NnError::MalformedModel(_))));
    }
}
