use std::collections::BTreeMap;

use super::{Representation, TrialResult};

/// Seed-averaged metrics of one (dataset, representation, size) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub dataset: String,
    pub representation: Representation,
    pub per_class_n: usize,
    pub mean_n_leaf: f64,
    pub mean_d_max: f64,
    pub seeds: usize,
}

/// Seed-averaged metrics summed over sample sizes for one (dataset, representation).
#[derive(Debug, Clone, PartialEq)]
pub struct SumRow {
    pub dataset: String,
    pub representation: Representation,
    pub sum_n_leaf: f64,
    pub sum_d_max: f64,
    pub sizes: usize,
}

/// Mean over seeds per cell; ordered by dataset, representation (raw first), then size.
pub fn aggregate_trend(results: &[TrialResult]) -> Vec<TrendRow> {
    let mut cells: BTreeMap<(&str, &Representation, usize), (f64, f64, usize)> = BTreeMap::new();
    for r in results {
        let cell = cells.entry((&r.dataset, &r.representation, r.per_class_n)).or_default();
        cell.0 += r.n_leaf as f64;
        cell.1 += r.d_max as f64;
        cell.2 += 1;
    }
    cells
        .into_iter()
        .map(|((dataset, representation, per_class_n), (leaves, depth, seeds))| TrendRow {
            dataset: dataset.to_string(),
            representation: representation.clone(),
            per_class_n,
            mean_n_leaf: leaves / seeds as f64,
            mean_d_max: depth / seeds as f64,
            seeds,
        })
        .collect()
}

/// Mean over seeds within each size, then summed over sizes.
pub fn aggregate_sum(results: &[TrialResult]) -> Vec<SumRow> {
    let mut sums: Vec<SumRow> = Vec::new();
    for t in aggregate_trend(results) {
        match sums.last_mut() {
            Some(s) if s.dataset == t.dataset && s.representation == t.representation => {
                s.sum_n_leaf += t.mean_n_leaf;
                s.sum_d_max += t.mean_d_max;
                s.sizes += 1;
            }
            _ => sums.push(SumRow {
                dataset: t.dataset,
                representation: t.representation,
                sum_n_leaf: t.mean_n_leaf,
                sum_d_max: t.mean_d_max,
                sizes: 1,
            }),
        }
    }
    sums
}
