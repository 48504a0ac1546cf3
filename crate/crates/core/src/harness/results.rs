use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{HarnessError, Representation, Result, TrialResult};

pub const RESULTS_HEADER: [&str; 9] =
    ["dataset", "representation", "bottleneck_dim", "per_class_n", "seed", "n_leaf", "d_max", "train_accuracy", "fit_seconds"];

fn record(r: &TrialResult) -> [String; 9] {
    [
        r.dataset.clone(),
        r.representation.label().to_string(),
        r.representation.bottleneck_dim().map(|d| d.to_string()).unwrap_or_default(),
        r.per_class_n.to_string(),
        r.seed.to_string(),
        r.n_leaf.to_string(),
        r.d_max.to_string(),
        format!("{:.6}", r.train_accuracy),
        r.fit_seconds.map(|s| format!("{s:.6}")).unwrap_or_default(),
    ]
}

/// Appends rows to a results file, writing the header when the file is new or empty.
pub struct ResultsWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl ResultsWriter {
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let empty = file.metadata()?.len() == 0;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        if empty {
            inner.write_record(RESULTS_HEADER)?;
            inner.flush()?;
        }
        Ok(Self { inner })
    }

    pub fn write(&mut self, result: &TrialResult) -> Result<()> {
        self.inner.write_record(record(result))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Replace `path` with a header plus `results` in the given order.
pub fn write_results(path: impl AsRef<Path>, results: &[TrialResult]) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&tmp)?;
        w.write_record(RESULTS_HEADER)?;
        for r in results {
            w.write_record(record(r))?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(HarnessError::Parse { line: 1, message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()) });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| HarnessError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |field: &str, value: &str| HarnessError::Parse { line, message: format!("bad {field} {value:?}") };
        let int = |i: usize| row[i].parse::<usize>().map_err(|_| bad(RESULTS_HEADER[i], &row[i]));
        let representation = match (&row[1], &row[2]) {
            ("raw", "") => Representation::Raw,
            (model_id, dim) if !model_id.is_empty() && model_id != "raw" => Representation::Embedded {
                model_id: model_id.to_string(),
                bottleneck_dim: dim.parse().map_err(|_| bad("bottleneck_dim", dim))?,
            },
            (rep, _) => return Err(bad("representation", rep)),
        };
        let train_accuracy: f64 = row[7].parse().map_err(|_| bad("train_accuracy", &row[7]))?;
        if !(0.0..=1.0).contains(&train_accuracy) {
            return Err(bad("train_accuracy", &row[7]));
        }
        let fit_seconds = match &row[8] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("fit_seconds", s))?),
        };
        out.push(TrialResult {
            dataset: row[0].to_string(),
            representation,
            per_class_n: int(3)?,
            seed: row[4].parse().map_err(|_| bad("seed", &row[4]))?,
            n_leaf: int(5)?,
            d_max: int(6)?,
            train_accuracy,
            fit_seconds,
        });
    }
    Ok(out)
}
