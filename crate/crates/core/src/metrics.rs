//! Confusion-matrix metrics with FDIA as the positive class, the fooling rate,
//! and report serialization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::AttackRecord;
use crate::dataset::LABEL_FDIA;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Experiment identification carried by a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub dataset: String,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Undefined ratios are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub meta: ReportMeta,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: Option<f64>,
    /// FDIA recall.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Recall of the fault class, `tn / (tn + fp)`.
    pub fault_recall: Option<f64>,
    /// Fraction in [0, 1]; present only for adversarial evaluations.
    pub fooling_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == LABEL_FDIA, y == LABEL_FDIA) {
            (true, true) => m.tp += 1,
            (false, false) => m.tn += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    Ok(m)
}

pub fn classification_metrics(predictions: &[u8], labels: &[u8], meta: ReportMeta) -> Result<MetricsReport> {
    let c = confusion(predictions, labels)?;
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        meta,
        confusion: c,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1,
        fault_recall: ratio(c.tn, c.tn + c.fp),
        fooling_rate: None,
    })
}

/// Percentage of FDIA samples whose attack fooled the detector and still
/// tripped the relay.
pub fn fooling_rate(records: &[AttackRecord], n_fdias: usize) -> Result<f64> {
    if n_fdias == 0 {
        return Err(Error::Empty("fooling rate needs at least one FDIA sample".into()));
    }
    if records.len() != n_fdias {
        return Err(Error::shape(format!(
            "{} attack outcomes for {n_fdias} FDIA samples",
            records.len()
        )));
    }
    let hits = records
        .iter()
        .filter(|r| r.success && r.fooled_model && r.relay_tripped)
        .count();
    Ok(100.0 * hits as f64 / n_fdias as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

/// Flat CSV row. Columns: schema_version, model, dataset, epsilon,
/// max_iterations, tp, tn, fp, fn, accuracy, precision, recall, f1,
/// fault_recall, fooling_rate. Absent values are empty cells.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    schema_version: u32,
    model: String,
    dataset: String,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    tp: usize,
    tn: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    accuracy: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    fault_recall: Option<f64>,
    fooling_rate: Option<f64>,
}

impl From<&MetricsReport> for CsvRow {
    fn from(r: &MetricsReport) -> Self {
        CsvRow {
            schema_version: r.schema_version,
            model: r.meta.model.clone(),
            dataset: r.meta.dataset.clone(),
            epsilon: r.meta.epsilon,
            max_iterations: r.meta.max_iterations,
            tp: r.confusion.tp,
            tn: r.confusion.tn,
            fp: r.confusion.fp,
            fn_: r.confusion.fn_,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            fault_recall: r.fault_recall,
            fooling_rate: r.fooling_rate,
        }
    }
}

impl From<CsvRow> for MetricsReport {
    fn from(r: CsvRow) -> Self {
        MetricsReport {
            schema_version: r.schema_version,
            meta: ReportMeta {
                model: r.model,
                dataset: r.dataset,
                epsilon: r.epsilon,
                max_iterations: r.max_iterations,
            },
            confusion: ConfusionMatrix {
                tp: r.tp,
                tn: r.tn,
                fp: r.fp,
                fn_: r.fn_,
            },
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            fault_recall: r.fault_recall,
            fooling_rate: r.fooling_rate,
        }
    }
}

pub fn reports_to_csv(reports: &[MetricsReport]) -> Result<String> {
    rows_to_csv(reports.iter().map(CsvRow::from))
}

pub fn reports_from_csv(text: &str) -> Result<Vec<MetricsReport>> {
    rows_from_csv::<CsvRow>(text).map(|rows| rows.into_iter().map(Into::into).collect())
}

/// Writes one or more reports; the format follows the file extension
/// (`.csv`, anything else is JSON).
pub fn emit_reports(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let text = match ReportFormat::from_path(path) {
        ReportFormat::Csv => reports_to_csv(reports)?,
        ReportFormat::Json => to_json(&reports)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => reports_from_csv(&text),
        ReportFormat::Json => serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string())),
    }
}

/// One line of an epsilon sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub n_fdias: usize,
    pub successes: usize,
    /// Percent.
    pub fooling_rate: f64,
    pub fdia_recall: Option<f64>,
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<String> {
    rows_to_csv(rows.iter().cloned())
}

pub fn sweep_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    rows_from_csv(text)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::format("<json>", e.to_string()))
}

fn rows_to_csv<T: Serialize>(rows: impl Iterator<Item = T>) -> Result<String> {
    let err = |e: csv::Error| Error::format("<csv>", e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("<csv>", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format("<csv>", e.to_string()))
}

fn rows_from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::format("<csv>", e.to_string()))
}
