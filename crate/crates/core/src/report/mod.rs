//! Aggregate tables and static SVG charts built from a results CSV.
//!
//! Charts only draw values that also appear, with identical text, in the emitted tables.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{aggregate_sum, aggregate_trend, read_results, HarnessError, Representation, SumRow, TrendRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("results file has no rows")]
    EmptyResults,
    #[error("at least one output format is required")]
    NoFormat,
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    /// Metrics summed over sample sizes, one bar per representation.
    Bars,
    /// Seed-averaged metrics against sample size, one line per representation.
    Trends,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    pub results: PathBuf,
    pub out_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub charts: Vec<ChartKind>,
}

impl ReportSpec {
    pub fn new(results: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            results: results.into(),
            out_dir: out_dir.into(),
            formats: vec![ReportFormat::Csv, ReportFormat::Svg],
            charts: vec![ChartKind::Bars, ChartKind::Trends],
        }
    }
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRENDS_FILE: &str = "trends.csv";

/// Fixed formatting shared by tables and charts.
pub(crate) fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

/// Write the report files and return their paths in creation order.
///
/// The aggregate tables are always computed; they are written when `Csv` is requested.
pub fn emit_report(spec: &ReportSpec) -> Result<Vec<PathBuf>> {
    if spec.formats.is_empty() {
        return Err(ReportError::NoFormat);
    }
    let results = read_results(&spec.results)?;
    if results.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    let sums = aggregate_sum(&results);
    let trends = aggregate_trend(&results);
    fs::create_dir_all(&spec.out_dir)?;
    let mut written = Vec::new();

    if spec.formats.contains(&ReportFormat::Csv) {
        let path = spec.out_dir.join(SUMMARY_FILE);
        write_summary(&path, &sums)?;
        written.push(path);
        let path = spec.out_dir.join(TRENDS_FILE);
        write_trends(&path, &trends)?;
        written.push(path);
    }
    if spec.formats.contains(&ReportFormat::Svg) {
        let mut by_dataset: BTreeMap<&str, (Vec<&SumRow>, Vec<&TrendRow>)> = BTreeMap::new();
        sums.iter().for_each(|s| by_dataset.entry(&s.dataset).or_default().0.push(s));
        trends.iter().for_each(|t| by_dataset.entry(&t.dataset).or_default().1.push(t));
        for (dataset, (sums, trends)) in by_dataset {
            if spec.charts.contains(&ChartKind::Bars) {
                let path = spec.out_dir.join(format!("{}_bars.svg", file_stem(dataset)));
                fs::write(&path, svg::bars_chart(dataset, &sums))?;
                written.push(path);
            }
            if spec.charts.contains(&ChartKind::Trends) {
                let path = spec.out_dir.join(format!("{}_trends.svg", file_stem(dataset)));
                fs::write(&path, svg::trends_chart(dataset, &trends))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn bottleneck(rep: &Representation) -> String {
    rep.bottleneck_dim().map(|d| d.to_string()).unwrap_or_default()
}

fn write_summary(path: &Path, rows: &[SumRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "representation", "bottleneck_dim", "sum_n_leaf", "sum_d_max", "sizes"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.representation.label().to_string(),
            bottleneck(&r.representation),
            fmt_value(r.sum_n_leaf),
            fmt_value(r.sum_d_max),
            r.sizes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trends(path: &Path, rows: &[TrendRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "representation", "bottleneck_dim", "per_class_n", "mean_n_leaf", "mean_d_max", "seeds"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.representation.label().to_string(),
            bottleneck(&r.representation),
            r.per_class_n.to_string(),
            fmt_value(r.mean_n_leaf),
            fmt_value(r.mean_d_max),
            r.seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Dataset ids are used in file names; keep them to a safe character set.
fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{write_results, TrialResult};

    fn fixture() -> Vec<TrialResult> {
        let mut reps = vec![Representation::Raw];
        reps.extend([8, 16, 32, 64, 128, 256].map(|d| Representation::Embedded { model_id: format!("ae{d}"), bottleneck_dim: d }));
        let mut rows = Vec::new();
        for (r, rep) in reps.iter().enumerate() {
            for (s, n) in [10, 25].into_iter().enumerate() {
                for seed in 0..2u64 {
                    rows.push(TrialResult {
                        dataset: "toy".into(),
                        representation: rep.clone(),
                        per_class_n: n,
                        seed,
                        n_leaf: 10 + r * 3 + s * 5 + seed as usize,
                        d_max: 4 + r + s + seed as usize * 2,
                        train_accuracy: 1.0,
                        fit_seconds: None,
                    });
                }
            }
        }
        rows
    }

    fn setup(rows: &[TrialResult]) -> (tempfile::TempDir, ReportSpec) {
        let dir = tempfile::tempdir().unwrap();
        let results = dir.path().join("r.csv");
        write_results(&results, rows).unwrap();
        let spec = ReportSpec::new(results, dir.path().join("rep"));
        (dir, spec)
    }

    /// (panel, representation, data-value, height) of every bar.
    fn bars(svg: &str) -> Vec<(String, String, f64, f64)> {
        svg.lines()
            .filter(|l| l.contains("class=\"bar\""))
            .map(|l| {
                let attr = |name: &str| {
                    let start = l.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
                    l[start..start + l[start..].find('"').unwrap()].to_string()
                };
                (attr("data-panel"), attr("data-representation"), attr("data-value").parse().unwrap(), attr("height").parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn seven_bars_per_panel_in_order() {
        let (_dir, spec) = setup(&fixture());
        let files = emit_report(&spec).unwrap();
        assert_eq!(files.len(), 4);
        let svg = fs::read_to_string(spec.out_dir.join("toy_bars.svg")).unwrap();
        let bars = bars(&svg);
        for panel in ["n_leaf", "d_max"] {
            let reps: Vec<&str> = bars.iter().filter(|b| b.0 == panel).map(|b| b.1.as_str()).collect();
            assert_eq!(reps, ["raw", "ae8", "ae16", "ae32", "ae64", "ae128", "ae256"]);
        }
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("class=\"legend\""));
    }

    #[test]
    fn bar_heights_follow_hand_aggregation() {
        let (_dir, spec) = setup(&fixture());
        emit_report(&spec).unwrap();
        let svg = fs::read_to_string(spec.out_dir.join("toy_bars.svg")).unwrap();
        // By hand: representation r has seed-mean n_leaf 10.5+3r at n=10 and 15.5+3r at n=25,
        // so the sum is 26+6r; d_max means are 5+r and 6+r, summing to 11+2r.
        let bars = bars(&svg);
        for (i, b) in bars.iter().filter(|b| b.0 == "n_leaf").enumerate() {
            assert_eq!(b.2, 26.0 + 6.0 * i as f64);
        }
        for (i, b) in bars.iter().filter(|b| b.0 == "d_max").enumerate() {
            assert_eq!(b.2, 11.0 + 2.0 * i as f64);
        }
        for panel in ["n_leaf", "d_max"] {
            let panel_bars: Vec<_> = bars.iter().filter(|b| b.0 == panel).collect();
            let max = panel_bars.iter().map(|b| b.2).fold(0.0, f64::max);
            let tallest = panel_bars.iter().map(|b| b.3).fold(0.0, f64::max);
            for b in panel_bars {
                assert!((b.3 / tallest - b.2 / max).abs() < 1e-3, "{b:?}");
            }
        }
        // Plotted values appear verbatim in the summary table.
        let summary = fs::read_to_string(spec.out_dir.join(SUMMARY_FILE)).unwrap();
        for b in &bars {
            assert!(summary.contains(&fmt_value(b.2)));
        }
        assert!(summary.starts_with("dataset,representation,bottleneck_dim,sum_n_leaf,sum_d_max,sizes\ntoy,raw,,26.000000,11.000000,2\n"));
    }

    #[test]
    fn trend_points_in_table() {
        let (_dir, spec) = setup(&fixture());
        emit_report(&spec).unwrap();
        let svg = fs::read_to_string(spec.out_dir.join("toy_trends.svg")).unwrap();
        let trends = fs::read_to_string(spec.out_dir.join(TRENDS_FILE)).unwrap();
        let points: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"point\"")).collect();
        assert_eq!(points.len(), 7 * 2 * 2);
        assert_eq!(svg.matches("<polyline").count(), 14);
        for p in points {
            let start = p.find("data-value=\"").unwrap() + 12;
            let value = &p[start..start + p[start..].find('"').unwrap()];
            assert!(trends.contains(value), "{value}");
        }
    }

    #[test]
    fn csv_only_writes_no_svg() {
        let (_dir, mut spec) = setup(&fixture());
        spec.formats = vec![ReportFormat::Csv];
        emit_report(&spec).unwrap();
        let mut names: Vec<String> =
            fs::read_dir(&spec.out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, [SUMMARY_FILE, TRENDS_FILE]);
    }

    #[test]
    fn empty_results_rejected() {
        let (_dir, spec) = setup(&[]);
        assert!(matches!(emit_report(&spec), Err(ReportError::EmptyResults)));
    }

    #[test]
    fn output_is_pure_function_of_input() {
        let (dir, spec) = setup(&fixture());
        emit_report(&spec).unwrap();
        let other = ReportSpec::new(&spec.results, dir.path().join("rep2"));
        emit_report(&other).unwrap();
        for name in [SUMMARY_FILE, TRENDS_FILE, "toy_bars.svg", "toy_trends.svg"] {
            assert_eq!(fs::read(spec.out_dir.join(name)).unwrap(), fs::read(other.out_dir.join(name)).unwrap());
        }
    }
}
