//! Experiment grid: stratified sampling, one tree per (dataset, representation, size, seed)
//! cell, resumable CSV persistence and metric aggregation.

mod aggregate;
mod plan;
mod results;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cart::{self, CartError};
use crate::data::LabeledImageSet;
use crate::nn::EmbeddedSet;

pub use aggregate::{aggregate_sum, aggregate_trend, SumRow, TrendRow};
pub use plan::{load_plan_file, resolve_workers, run_plan, CatalogSource, PlanFile, RunSummary, WORKERS_ENV};
pub use results::{read_results, write_results, ResultsWriter, RESULTS_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("class {class} has {have} samples, {need} requested")]
    InsufficientClassSamples { class: usize, have: usize, need: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {dataset:?} has no embedding with bottleneck {bottleneck_dim}")]
    UnknownRepresentation { dataset: String, bottleneck_dim: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{} of {} cells failed", failures.len(), failures.len() + completed)]
    PartialFailure { failures: Vec<(CellKey, String)>, completed: usize },
    #[error(transparent)]
    Cart(#[from] CartError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Feature space a tree is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Representation {
    Raw,
    Embedded { model_id: String, bottleneck_dim: usize },
}

impl Representation {
    /// CSV label: `raw` or the model id.
    pub fn label(&self) -> &str {
        match self {
            Representation::Raw => "raw",
            Representation::Embedded { model_id, .. } => model_id,
        }
    }

    pub fn bottleneck_dim(&self) -> Option<usize> {
        match self {
            Representation::Raw => None,
            Representation::Embedded { bottleneck_dim, .. } => Some(*bottleneck_dim),
        }
    }
}

/// Raw first, then embeddings by ascending bottleneck.
impl Ord for Representation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Representation::Raw, Representation::Raw) => Ordering::Equal,
            (Representation::Raw, _) => Ordering::Less,
            (_, Representation::Raw) => Ordering::Greater,
            (
                Representation::Embedded { model_id: a, bottleneck_dim: da },
                Representation::Embedded { model_id: b, bottleneck_dim: db },
            ) => da.cmp(db).then_with(|| a.cmp(b)),
        }
    }
}

impl PartialOrd for Representation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Plan-level representation choice, resolved per dataset to a concrete embedding.
///
/// JSON: `"raw"` or a bottleneck width such as `64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RepresentationSpec {
    Bottleneck(usize),
    Raw(RawTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawTag {
    Raw,
}

impl RepresentationSpec {
    pub const RAW: RepresentationSpec = RepresentationSpec::Raw(RawTag::Raw);
}

/// Samples × features matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl FeatureTable {
    pub fn raw(set: &LabeledImageSet) -> Self {
        Self { features: set.flattened(), labels: set.labels().to_vec(), num_classes: set.num_classes() }
    }

    pub fn embedded(set: &EmbeddedSet) -> Self {
        Self { features: set.vectors.clone(), labels: set.labels.clone(), num_classes: set.class_names.len() }
    }
}

/// Every representation available for one dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetEntry {
    pub raw: Option<FeatureTable>,
    /// bottleneck width → (model id, embedded features)
    pub embedded: BTreeMap<usize, (String, FeatureTable)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    pub datasets: BTreeMap<String, DatasetEntry>,
}

impl Catalog {
    pub fn insert_raw(&mut self, id: &str, table: FeatureTable) {
        self.datasets.entry(id.to_string()).or_default().raw = Some(table);
    }

    pub fn insert_embedded(&mut self, id: &str, model_id: &str, table: FeatureTable) {
        let dim = table.features.ncols();
        self.datasets.entry(id.to_string()).or_default().embedded.insert(dim, (model_id.to_string(), table));
    }

    /// Concrete representation and its features, or why it cannot be resolved.
    pub fn resolve(&self, dataset: &str, spec: RepresentationSpec) -> Result<(Representation, &FeatureTable)> {
        let entry = self.datasets.get(dataset).ok_or_else(|| HarnessError::UnknownDataset(dataset.to_string()))?;
        match spec {
            RepresentationSpec::Raw(_) => entry
                .raw
                .as_ref()
                .map(|t| (Representation::Raw, t))
                .ok_or_else(|| HarnessError::InvalidPlan(format!("dataset {dataset:?} has no raw features"))),
            RepresentationSpec::Bottleneck(bottleneck_dim) => entry
                .embedded
                .get(&bottleneck_dim)
                .map(|(model_id, t)| (Representation::Embedded { model_id: model_id.clone(), bottleneck_dim }, t))
                .ok_or_else(|| HarnessError::UnknownRepresentation { dataset: dataset.to_string(), bottleneck_dim }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub datasets: Vec<String>,
    pub representations: Vec<RepresentationSpec>,
    #[serde(default = "default_sizes")]
    pub per_class_sizes: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: std::path::PathBuf,
    /// Record wall-clock fit time. Disable for byte-reproducible result files.
    #[serde(default = "default_true")]
    pub record_timing: bool,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_sizes() -> Vec<usize> {
    vec![10, 25, 50, 75, 100]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_true() -> bool {
    true
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.representations.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::InvalidPlan("datasets, representations and seeds must be non-empty".into()));
        }
        if self.per_class_sizes.is_empty()
            || self.per_class_sizes[0] == 0
            || self.per_class_sizes.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(HarnessError::InvalidPlan("sizes must be positive and strictly increasing".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::InvalidPlan("seeds must be distinct".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.datasets.len() * self.representations.len() * self.per_class_sizes.len() * self.seeds.len()
    }
}

/// Identity of one grid cell; the resume key of the results file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub dataset: String,
    pub representation: String,
    pub per_class_n: usize,
    pub seed: u64,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/n={}/seed={}", self.dataset, self.representation, self.per_class_n, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub dataset: String,
    pub representation: Representation,
    pub per_class_n: usize,
    pub seed: u64,
    pub n_leaf: usize,
    pub d_max: usize,
    pub train_accuracy: f64,
    pub fit_seconds: Option<f64>,
}

impl TrialResult {
    pub fn key(&self) -> CellKey {
        CellKey {
            dataset: self.dataset.clone(),
            representation: self.representation.label().to_string(),
            per_class_n: self.per_class_n,
            seed: self.seed,
        }
    }
}

/// `per_class_n` indices from every class, drawn without replacement, in ascending order.
///
/// Classes are visited in index order from one seeded stream, and each class's pool is
/// shuffled and truncated, so for a fixed seed a smaller sample is contained in a larger one.
pub fn stratified_sample(labels: &[usize], per_class_n: usize, seed: u64) -> Result<Vec<usize>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        pools[l].push(i);
    }
    if let Some((class, pool)) = pools.iter().enumerate().find(|(_, p)| p.len() < per_class_n) {
        return Err(HarnessError::InsufficientClassSamples { class, have: pool.len(), need: per_class_n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(classes * per_class_n);
    for pool in &mut pools {
        pool.shuffle(&mut rng);
        picked.extend_from_slice(&pool[..per_class_n]);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Sample, fit an unrestricted tree and record its complexity.
pub fn run_trial(
    dataset: &str,
    representation: Representation,
    table: &FeatureTable,
    per_class_n: usize,
    seed: u64,
    record_timing: bool,
) -> Result<TrialResult> {
    let rows = stratified_sample(&table.labels, per_class_n, seed)?;
    let features = table.features.select(Axis(0), &rows);
    let labels: Vec<usize> = rows.iter().map(|&r| table.labels[r]).collect();
    let start = Instant::now();
    let tree = cart::fit(features.view(), &labels)?;
    let elapsed = start.elapsed().as_secs_f64();
    let m = cart::metrics(&tree, features.view(), &labels);
    Ok(TrialResult {
        dataset: dataset.to_string(),
        representation,
        per_class_n,
        seed,
        n_leaf: m.n_leaf,
        d_max: m.d_max,
        train_accuracy: m.train_accuracy,
        fit_seconds: record_timing.then_some(elapsed),
    })
}
