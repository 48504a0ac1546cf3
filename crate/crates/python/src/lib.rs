//! Python bindings: datasets, trees, autoencoders and the experiment harness.
//!
//! Arrays cross the boundary as nested lists of floats; images are flattened with the
//! channel index fastest.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dataset_quality::cart::{self, CartError};
use dataset_quality::data::{self, DataError, LabeledImageSet};
use dataset_quality::harness::{self, HarnessError};
use dataset_quality::nn::{self, NnError, TrainConfig};
use dataset_quality::report::{self, ReportError, ReportFormat, ReportSpec};

/// Crate errors → `OSError` for I/O failures, `ValueError` for everything else.
trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

trait IsIo {
    fn is_io(&self) -> bool;
}

impl IsIo for DataError {
    fn is_io(&self) -> bool {
        matches!(self, DataError::Io(_))
    }
}

impl IsIo for CartError {
    fn is_io(&self) -> bool {
        false
    }
}

impl IsIo for NnError {
    fn is_io(&self) -> bool {
        match self {
            NnError::Io(_) => true,
            NnError::Data(e) => e.is_io(),
            _ => false,
        }
    }
}

impl IsIo for HarnessError {
    fn is_io(&self) -> bool {
        match self {
            HarnessError::Io(_) => true,
            HarnessError::Data(e) => e.is_io(),
            HarnessError::Nn(e) => e.is_io(),
            _ => false,
        }
    }
}

impl IsIo for ReportError {
    fn is_io(&self) -> bool {
        match self {
            ReportError::Io(_) => true,
            ReportError::Harness(e) => e.is_io(),
            _ => false,
        }
    }
}

impl<T, E: IsIo + std::fmt::Display> IntoPy<T> for Result<T, E> {
    fn py(self) -> PyResult<T> {
        self.map_err(|e| if e.is_io() { PyOSError::new_err(e.to_string()) } else { PyValueError::new_err(e.to_string()) })
    }
}

fn matrix(rows: Vec<Vec<f32>>) -> PyResult<Array2<f32>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f32>) -> Vec<Vec<f32>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Labeled image set held in memory.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(LabeledImageSet);

#[pymethods]
impl PyDataset {
    /// Load a dataset from its JSON manifest.
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(Self(data::load_manifest(manifest).py()?.1))
    }

    /// Write the IDX pair and manifest into `directory`; returns the manifest path.
    fn save(&self, directory: PathBuf) -> PyResult<PathBuf> {
        Ok(data::save_dataset(&self.0, directory).py()?.0)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    /// (N, H, W, C)
    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        (self.0.len(), self.0.height(), self.0.width(), self.0.channels())
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.0.class_names().to_vec()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.0.class_counts()
    }

    /// Class-distribution entropy in bits.
    fn entropy(&self) -> PyResult<f64> {
        Ok(data::entropy(&self.0.class_distribution().py()?))
    }

    /// N rows of H·W·C intensities in [0, 1].
    fn flattened(&self) -> Vec<Vec<f32>> {
        rows(&self.0.flattened())
    }

    fn resized(&self, height: usize, width: usize) -> Self {
        Self(self.0.resized(height, width))
    }

    fn with_id(&self, id: String) -> Self {
        Self(self.0.clone().with_id(id))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let (n, h, w, c) = self.shape();
        format!("Dataset(id={:?}, n={n}, shape={h}x{w}x{c}, classes={})", self.0.id(), self.0.num_classes())
    }
}

#[pyfunction]
#[pyo3(signature = (n, height, width, channels, num_classes, seed=0))]
fn generate_gaussian(n: usize, height: usize, width: usize, channels: usize, num_classes: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset(data::generate_gaussian(n, height, width, channels, num_classes, seed).py()?.set))
}

#[pyfunction]
#[pyo3(signature = (n_per_class, height, width, channels, num_classes, spread=0.01, seed=0))]
fn generate_blobs(
    n_per_class: usize,
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    spread: f64,
    seed: u64,
) -> PyResult<PyDataset> {
    Ok(PyDataset(data::generate_blobs(n_per_class, height, width, channels, num_classes, spread, seed).py()?))
}

/// Augmented copies of a source holding exactly one RGB image per class, default ranges.
#[pyfunction]
#[pyo3(signature = (source, n_per_class, seed=0))]
fn generate_replicated(source: &PyDataset, n_per_class: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset(data::generate_replicated(&source.0, n_per_class, &Default::default(), seed).py()?))
}

/// Gini impurity of a node with the given class counts.
#[pyfunction]
fn gini(counts: Vec<usize>) -> PyResult<f64> {
    if counts.iter().sum::<usize>() == 0 {
        return Err(PyValueError::new_err("counts must not all be zero"));
    }
    Ok(cart::gini(&counts))
}

/// Shannon entropy in bits of a class-count vector.
#[pyfunction]
fn entropy(counts: Vec<usize>) -> PyResult<f64> {
    Ok(data::entropy(&data::ClassDistribution::from_counts(counts).py()?))
}

#[pyfunction]
fn stratified_sample(labels: Vec<usize>, per_class_n: usize, seed: u64) -> PyResult<Vec<usize>> {
    harness::stratified_sample(&labels, per_class_n, seed).py()
}

/// Unrestricted Gini decision tree.
#[pyclass(name = "DecisionTree", frozen)]
struct PyDecisionTree(cart::DecisionTree);

#[pymethods]
impl PyDecisionTree {
    #[staticmethod]
    fn fit(features: Vec<Vec<f32>>, labels: Vec<usize>) -> PyResult<Self> {
        Ok(Self(cart::fit(matrix(features)?.view(), &labels).py()?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(cart::DecisionTree::from_json(text).py()?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    fn predict(&self, row: Vec<f32>) -> PyResult<usize> {
        if row.len() != self.0.num_features() {
            return Err(PyValueError::new_err(format!("expected {} features, got {}", self.0.num_features(), row.len())));
        }
        Ok(self.0.predict(&row))
    }

    #[getter]
    fn n_leaf(&self) -> usize {
        self.0.leaf_count()
    }

    #[getter]
    fn d_max(&self) -> usize {
        self.0.max_depth()
    }

    /// {"n_leaf", "d_max", "train_accuracy"} on the given samples.
    fn metrics<'py>(&self, py: Python<'py>, features: Vec<Vec<f32>>, labels: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
        let x = matrix(features)?;
        if x.nrows() != labels.len() || x.ncols() != self.0.num_features() {
            return Err(PyValueError::new_err("features and labels do not match the tree"));
        }
        let m = cart::metrics(&self.0, x.view(), &labels);
        let d = PyDict::new(py);
        d.set_item("n_leaf", m.n_leaf)?;
        d.set_item("d_max", m.d_max)?;
        d.set_item("train_accuracy", m.train_accuracy)?;
        Ok(d)
    }
}

/// Symmetric MLP autoencoder (single precision).
#[pyclass(name = "Autoencoder")]
struct PyAutoencoder {
    model: nn::Autoencoder<f32>,
    history: Option<nn::TrainHistory>,
}

#[pymethods]
impl PyAutoencoder {
    #[new]
    #[pyo3(signature = (input_dim, bottleneck_dim, hidden=Vec::new(), seed=0))]
    fn new(input_dim: usize, bottleneck_dim: usize, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self { model: nn::init_model(input_dim, bottleneck_dim, &hidden, seed).py()?, history: None })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let stored = nn::load_model(path).py()?;
        Ok(Self { model: stored.model, history: stored.header.history })
    }

    fn save(&self, path: PathBuf, model_id: &str) -> PyResult<()> {
        nn::save_model(path, &self.model, model_id, self.history.as_ref()).py().map(|_| ())
    }

    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.model.layer_dims()
    }

    fn encode(&self, batch: Vec<Vec<f32>>) -> PyResult<Vec<Vec<f32>>> {
        Ok(rows(&self.model.encode(matrix(batch)?.view()).py()?))
    }

    fn reconstruct(&self, batch: Vec<Vec<f32>>) -> PyResult<Vec<Vec<f32>>> {
        Ok(rows(&self.model.forward(matrix(batch)?.view()).py()?.0))
    }

    /// Train in place with Adam and early stopping; returns the per-epoch validation MAE.
    #[pyo3(signature = (train, val, learning_rate=1e-4, batch_size=256, patience=3, max_epochs=500, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        train: Vec<Vec<f32>>,
        val: Vec<Vec<f32>>,
        learning_rate: f64,
        batch_size: usize,
        patience: usize,
        max_epochs: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let config = TrainConfig { learning_rate, batch_size, patience_epochs: patience, max_epochs, seed };
        let (train, val) = (matrix(train)?, matrix(val)?);
        let (model, history) = nn::train(self.model.clone(), train.view(), val.view(), &config).py()?;
        self.model = model;
        let val_mae = history.val_mae.clone();
        self.history = Some(history);
        Ok(val_mae)
    }
}

/// Run a plan file; returns (computed, skipped) cell counts.
#[pyfunction]
fn run_plan_file(path: PathBuf) -> PyResult<(usize, usize)> {
    let (plan, catalog) = harness::load_plan_file(path).py()?;
    let summary = harness::run_plan(&plan, &catalog).py()?;
    Ok((summary.computed, summary.skipped))
}

/// Write aggregate tables (and charts unless `svg=False`); returns the written paths.
#[pyfunction]
#[pyo3(signature = (results, out_dir, svg=true))]
fn emit_report(results: PathBuf, out_dir: PathBuf, svg: bool) -> PyResult<Vec<PathBuf>> {
    let mut spec = ReportSpec::new(results, out_dir);
    if !svg {
        spec.formats = vec![ReportFormat::Csv];
    }
    report::emit_report(&spec).py()
}

#[pymodule]
fn dsquality(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDecisionTree>()?;
    m.add_class::<PyAutoencoder>()?;
    m.add_function(wrap_pyfunction!(generate_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(generate_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(generate_replicated, m)?)?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_plan_file, m)?)?;
    m.add_function(wrap_pyfunction!(emit_report, m)?)?;
    Ok(())
}
