use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    read_results, run_trial, write_results, Catalog, CellKey, ExperimentPlan, FeatureTable, HarnessError, Representation,
    Result, ResultsWriter, TrialResult,
};
use crate::data::load_manifest;
use crate::nn::load_embedded;

/// Environment variable overriding the trial worker count.
pub const WORKERS_ENV: &str = "DQ_WORKERS";

/// Where one dataset's features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSource {
    /// Dataset manifest (JSON); its images become the raw representation.
    pub manifest: PathBuf,
    /// Embedding manifests, one per trained autoencoder.
    #[serde(default)]
    pub embeddings: Vec<PathBuf>,
    /// Resize images to `[height, width]` before flattening.
    #[serde(default)]
    pub resize: Option<[usize; 2]>,
}

/// Plan file: the experiment grid plus the catalog of datasets it refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(flatten)]
    pub plan: ExperimentPlan,
    pub catalog: BTreeMap<String, CatalogSource>,
}

/// Outcome of a plan run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Every row of the results file after the run, in canonical order.
    pub results: Vec<TrialResult>,
    /// Cells computed by this run.
    pub computed: usize,
    /// Cells skipped because the results file already held them.
    pub skipped: usize,
}

/// Parse a plan file and load every dataset and embedding it names.
pub fn load_plan_file(path: impl AsRef<Path>) -> Result<(ExperimentPlan, Catalog)> {
    let file: PlanFile = serde_json::from_slice(&std::fs::read(path)?)?;
    file.plan.validate()?;
    let mut catalog = Catalog::default();
    for id in &file.plan.datasets {
        let source = file.catalog.get(id).ok_or_else(|| HarnessError::UnknownDataset(id.clone()))?;
        let (_, mut set) = load_manifest(&source.manifest)?;
        if let Some([h, w]) = source.resize {
            set = set.resized(h, w);
        }
        catalog.insert_raw(id, FeatureTable::raw(&set));
        for path in &source.embeddings {
            let (manifest, embedded) = load_embedded(path)?;
            if embedded.labels != set.labels() {
                return Err(HarnessError::InvalidPlan(format!(
                    "embedding {:?} does not match the labels of dataset {id:?}",
                    manifest.model_id
                )));
            }
            catalog.insert_embedded(id, &manifest.model_id, FeatureTable::embedded(&embedded));
        }
    }
    Ok((file.plan, catalog))
}

/// Worker count: `DQ_WORKERS` if set, else the plan's setting, else available parallelism.
pub fn resolve_workers(plan_workers: Option<usize>) -> Result<usize> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| HarnessError::InvalidPlan(format!("{WORKERS_ENV}={v:?} is not a positive integer")))?,
        ),
        Err(_) => None,
    };
    Ok(from_env
        .or(plan_workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Execute every missing cell of the plan, streaming rows to `plan.output`.
///
/// The whole grid is resolved before anything runs. Rows already present in the output
/// file are kept and their cells skipped. When all cells finish the file is rewritten in
/// canonical order (dataset, representation, size, seed), so a fixed plan without timing
/// yields identical bytes however the work was scheduled.
pub fn run_plan(plan: &ExperimentPlan, catalog: &Catalog) -> Result<RunSummary> {
    plan.validate()?;
    let largest = *plan.per_class_sizes.last().expect("validated non-empty");
    let mut resolved: Vec<(&str, Representation, &FeatureTable)> = Vec::new();
    for dataset in &plan.datasets {
        for &spec in &plan.representations {
            let (rep, table) = catalog.resolve(dataset, spec)?;
            let counts = class_counts(table);
            if let Some((class, &have)) = counts.iter().enumerate().find(|(_, &c)| c < largest) {
                return Err(HarnessError::InsufficientClassSamples { class, have, need: largest });
            }
            resolved.push((dataset, rep, table));
        }
    }

    let existing = if plan.output.exists() { read_results(&plan.output)? } else { Vec::new() };
    let done: HashSet<CellKey> = existing.iter().map(TrialResult::key).collect();
    let mut pending = Vec::new();
    let mut skipped = 0;
    for (dataset, rep, table) in &resolved {
        for &n in &plan.per_class_sizes {
            for &seed in &plan.seeds {
                let key = CellKey { dataset: dataset.to_string(), representation: rep.label().to_string(), per_class_n: n, seed };
                if done.contains(&key) {
                    skipped += 1;
                } else {
                    pending.push((key, *dataset, rep, *table, n, seed));
                }
            }
        }
    }

    if let Some(parent) = plan.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let writer = Mutex::new(ResultsWriter::append(&plan.output)?);
    let workers = resolve_workers(plan.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::InvalidPlan(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<std::result::Result<TrialResult, (CellKey, String)>> = pool.install(|| {
        pending
            .par_iter()
            .map(|(key, dataset, rep, table, n, seed)| {
                let result = run_trial(dataset, (*rep).clone(), table, *n, *seed, plan.record_timing)
                    .map_err(|e| (key.clone(), e.to_string()))?;
                writer
                    .lock()
                    .expect("writer lock poisoned")
                    .write(&result)
                    .map_err(|e| (key.clone(), e.to_string()))?;
                Ok(result)
            })
            .collect()
    });
    drop(writer);

    let computed = outcomes.iter().filter(|o| o.is_ok()).count();
    let mut failures = Vec::new();
    let mut results = existing;
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    results.sort_by(canonical_order);
    write_results(&plan.output, &results)?;
    if !failures.is_empty() {
        return Err(HarnessError::PartialFailure { failures, completed: computed + skipped });
    }
    Ok(RunSummary { results, computed, skipped })
}

fn canonical_order(a: &TrialResult, b: &TrialResult) -> std::cmp::Ordering {
    (&a.dataset, &a.representation, a.per_class_n, a.seed).cmp(&(&b.dataset, &b.representation, b.per_class_n, b.seed))
}

fn class_counts(table: &FeatureTable) -> Vec<usize> {
    let mut counts = vec![0; table.num_classes];
    table.labels.iter().for_each(|&l| counts[l] += 1);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_gaussian;
    use crate::harness::RepresentationSpec;
    use ndarray::Array2;

    fn catalog_with_six_embeddings() -> Catalog {
        let set = generate_gaussian(600, 4, 4, 1, 3, 9).unwrap().set;
        let mut catalog = Catalog::default();
        catalog.insert_raw("g", FeatureTable::raw(&set));
        for dim in [2, 4, 6, 8, 10, 12] {
            let features = Array2::from_shape_fn((set.len(), dim), |(i, j)| ((i * 31 + j * 17) % 97) as f32);
            let table = FeatureTable { features, labels: set.labels().to_vec(), num_classes: 3 };
            catalog.insert_embedded("g", &format!("g-ae{dim}"), table);
        }
        catalog
    }

    fn plan(output: PathBuf) -> ExperimentPlan {
        let mut representations = vec![RepresentationSpec::RAW];
        representations.extend([2, 4, 6, 8, 10, 12].map(RepresentationSpec::Bottleneck));
        ExperimentPlan {
            datasets: vec!["g".into()],
            representations,
            per_class_sizes: vec![10, 25, 50, 75, 100],
            seeds: vec![0, 1, 2],
            output,
            record_timing: false,
            workers: Some(2),
        }
    }

    #[test]
    fn full_grid_then_idempotent_rerun() {
        let dir = tempfile::tempdir().unwrap();
        let plan = plan(dir.path().join("out/results.csv"));
        let catalog = catalog_with_six_embeddings();
        let first = run_plan(&plan, &catalog).unwrap();
        assert_eq!(first.results.len(), 105);
        assert_eq!((first.computed, first.skipped), (105, 0));
        let bytes = std::fs::read(&plan.output).unwrap();
        let second = run_plan(&plan, &catalog).unwrap();
        assert_eq!((second.computed, second.skipped), (0, 105));
        assert_eq!(std::fs::read(&plan.output).unwrap(), bytes);
    }

    #[test]
    fn resumes_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let plan = plan(dir.path().join("results.csv"));
        let catalog = catalog_with_six_embeddings();
        let full = run_plan(&plan, &catalog).unwrap();
        let bytes = std::fs::read(&plan.output).unwrap();
        write_results(&plan.output, &full.results[..40]).unwrap();
        let resumed = run_plan(&plan, &catalog).unwrap();
        assert_eq!((resumed.computed, resumed.skipped), (65, 40));
        assert_eq!(std::fs::read(&plan.output).unwrap(), bytes);
    }

    #[test]
    fn unknown_dataset_fails_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = plan(dir.path().join("results.csv"));
        plan.datasets.push("missing".into());
        let err = run_plan(&plan, &catalog_with_six_embeddings()).unwrap_err();
        assert!(matches!(err, HarnessError::UnknownDataset(ref d) if d == "missing"), "{err}");
        assert!(!plan.output.exists());
    }

    #[test]
    fn unknown_bottleneck_fails_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = plan(dir.path().join("results.csv"));
        plan.representations.push(RepresentationSpec::Bottleneck(99));
        assert!(matches!(
            run_plan(&plan, &catalog_with_six_embeddings()),
            Err(HarnessError::UnknownRepresentation { bottleneck_dim: 99, .. })
        ));
        assert!(!plan.output.exists());
    }

    #[test]
    fn failed_cells_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut catalog = catalog_with_six_embeddings();
        let entry = catalog.datasets.get_mut("g").unwrap();
        entry.embedded.get_mut(&4).unwrap().1.features.fill(f32::NAN);
        let plan = plan(dir.path().join("results.csv"));
        match run_plan(&plan, &catalog) {
            Err(HarnessError::PartialFailure { failures, completed }) => {
                assert_eq!(failures.len(), 15);
                assert_eq!(completed, 90);
                assert!(failures.iter().all(|(k, _)| k.representation == "g-ae4"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(read_results(&plan.output).unwrap().len(), 90);
    }

    #[test]
    fn plan_file_json() {
        let text = r#"{
            "datasets": ["g"],
            "representations": ["raw", 16],
            "output": "r.csv",
            "catalog": {"g": {"manifest": "g.json", "embeddings": ["g-ae16.json"]}}
        }"#;
        let file: PlanFile = serde_json::from_str(text).unwrap();
        assert_eq!(file.plan.per_class_sizes, vec![10, 25, 50, 75, 100]);
        assert_eq!(file.plan.seeds, vec![0, 1, 2, 3, 4]);
        assert!(file.plan.record_timing);
        assert_eq!(file.catalog["g"].embeddings.len(), 1);
    }
}
