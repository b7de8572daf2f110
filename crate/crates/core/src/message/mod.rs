//! Attack-surface schemas, CSV ingestion, normalization and splitting.
//!
//! Two schemas are supported:
//!
//! - [`Schema::Scada`]: SCADA control/status message statistics `(a, b, c, d, e)`.
//! - [`Schema::Stability`]: grid-stability parameter records
//!   `(tau1..4, p1..4, g1..4, stab)`; `stabf` is validated on load and then
//!   carried implicitly by the sign of `stab`.
//!
//! Both accept an optional `label` column holding the origin of a row
//! (real = 0, generated = 1).

mod synthetic;

pub use synthetic::{synthesize_scada_dataset, synthesize_stability_dataset, StabilitySynthesis};

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::fmt::g9;
use crate::grid::is_stable;
use crate::{rng, Error, Result};

pub const LABEL_REAL: u8 = 0;
pub const LABEL_GENERATED: u8 = 1;

const SCADA_COLUMNS: [&str; 5] = ["a", "b", "c", "d", "e"];
const STABILITY_COLUMNS: [&str; 13] = [
    "tau1", "tau2", "tau3", "tau4", "p1", "p2", "p3", "p4", "g1", "g2", "g3", "g4", "stab",
];
const LABEL_COLUMN: &str = "label";
const STABF_COLUMN: &str = "stabf";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Scada,
    Stability,
}

impl Schema {
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            Schema::Scada => &SCADA_COLUMNS,
            Schema::Stability => &STABILITY_COLUMNS,
        }
    }

    pub fn feature_count(self) -> usize {
        self.feature_names().len()
    }

    /// Index of the `stab` column for the stability schema.
    pub fn stab_index(self) -> Option<usize> {
        match self {
            Schema::Stability => Some(12),
            Schema::Scada => None,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::Scada => "scada",
            Schema::Stability => "stability",
        })
    }
}

/// One SCADA control/status message.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlMessage {
    /// Send-packet count.
    pub a: f64,
    /// Send packet size in bytes.
    pub b: f64,
    /// Packets source to destination.
    pub c: f64,
    /// Packets destination to source.
    pub d: f64,
    /// Total received packets.
    pub e: f64,
    pub label: Option<u8>,
}

impl ControlMessage {
    pub fn features(&self) -> [f64; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in SCADA_COLUMNS.iter().zip(self.features()) {
            if !v.is_finite() {
                return Err(format!("`{name}` is not finite"));
            }
            if v < 0.0 {
                return Err(format!("`{name}` is negative ({v})"));
            }
        }
        check_label(self.label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityFlag {
    Stable,
    Unstable,
}

impl StabilityFlag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "stable" => Some(Self::Stable),
            "unstable" => Some(Self::Unstable),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
        }
    }

    pub fn from_stab(stab: f64) -> Self {
        if is_stable(stab) {
            Self::Stable
        } else {
            Self::Unstable
        }
    }
}

/// One grid-stability parameter record (four-node star: one producer, three consumers).
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityRecord {
    /// Reaction times in seconds.
    pub tau: [f64; 4],
    /// Nominal power per node (per unit).
    pub p: [f64; 4],
    /// Price-elasticity coefficients.
    pub g: [f64; 4],
    pub stab: f64,
    pub stabf: StabilityFlag,
    pub label: Option<u8>,
}

impl StabilityRecord {
    pub fn features(&self) -> [f64; 13] {
        let mut out = [0.0; 13];
        out[..4].copy_from_slice(&self.tau);
        out[4..8].copy_from_slice(&self.p);
        out[8..12].copy_from_slice(&self.g);
        out[12] = self.stab;
        out
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in STABILITY_COLUMNS.iter().zip(self.features()) {
            if !v.is_finite() {
                return Err(format!("`{name}` is not finite"));
            }
        }
        for (k, (&t, &g)) in self.tau.iter().zip(&self.g).enumerate() {
            if t <= 0.0 {
                return Err(format!("`tau{}` must be positive ({t})", k + 1));
            }
            if g <= 0.0 {
                return Err(format!("`g{}` must be positive ({g})", k + 1));
            }
        }
        if StabilityFlag::from_stab(self.stab) != self.stabf {
            return Err(format!(
                "stabf `{}` contradicts stab = {}",
                self.stabf.as_str(),
                self.stab
            ));
        }
        check_label(self.label)
    }
}

fn check_label(label: Option<u8>) -> std::result::Result<(), String> {
    match label {
        Some(l) if l > 1 => Err(format!("label {l} is not binary")),
        _ => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Affine map of `[min, max]` onto `[-1, 1]`.
    MinmaxPm1,
    /// Mean 0, population standard deviation 1.
    Zscore,
}

/// Per-feature affine normalization parameters, enough for an exact inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scaling {
    MinmaxPm1 { min: Vec<f64>, max: Vec<f64> },
    Zscore { mean: Vec<f64>, sd: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub schema: Schema,
    #[serde(flatten)]
    pub scaling: Scaling,
}

impl NormalizationStats {
    pub fn mode(&self) -> NormMode {
        match self.scaling {
            Scaling::MinmaxPm1 { .. } => NormMode::MinmaxPm1,
            Scaling::Zscore { .. } => NormMode::Zscore,
        }
    }

    pub fn feature_count(&self) -> usize {
        match &self.scaling {
            Scaling::MinmaxPm1 { min, .. } => min.len(),
            Scaling::Zscore { mean, .. } => mean.len(),
        }
    }

    /// `(offset, scale)` such that `normalized = (x - offset) / scale`.
    fn affine(&self, f: usize) -> (f64, f64) {
        match &self.scaling {
            Scaling::MinmaxPm1 { min, max } => {
                let half = (max[f] - min[f]) / 2.0;
                (min[f] + half, half)
            }
            Scaling::Zscore { mean, sd } => (mean[f], sd[f]),
        }
    }

    pub fn normalize_value(&self, f: usize, x: f64) -> f64 {
        let (offset, scale) = self.affine(f);
        (x - offset) / scale
    }

    pub fn denormalize_value(&self, f: usize, y: f64) -> f64 {
        let (offset, scale) = self.affine(f);
        y * scale + offset
    }

    /// Means and standard deviations (z-score mode only).
    pub fn moments(&self) -> Result<(&[f64], &[f64])> {
        match &self.scaling {
            Scaling::Zscore { mean, sd } => Ok((mean, sd)),
            Scaling::MinmaxPm1 { .. } => Err(Error::InvalidConfig(
                "z-score statistics required, found min/max".into(),
            )),
        }
    }

    /// Bounds of the original feature box (min/max mode only).
    pub fn bounds(&self) -> Result<(&[f64], &[f64])> {
        match &self.scaling {
            Scaling::MinmaxPm1 { min, max } => Ok((min, max)),
            Scaling::Zscore { .. } => Err(Error::InvalidConfig(
                "min/max statistics required, found z-score".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Feature matrix of one schema, optional origin labels and the normalization
/// (if any) the features are currently expressed in.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    features: Array2<f64>,
    labels: Option<Vec<u8>>,
    stats: Option<NormalizationStats>,
}

impl Dataset {
    pub fn new(schema: Schema, features: Array2<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if features.ncols() != schema.feature_count() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features for {schema}", schema.feature_count()),
                found: format!("{} columns", features.ncols()),
            });
        }
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} rows",
                    l.len(),
                    features.nrows()
                )));
            }
        }
        Ok(Self {
            schema,
            features,
            labels,
            stats: None,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        Self {
            schema,
            features: Array2::zeros((0, schema.feature_count())),
            labels: None,
            stats: None,
        }
    }

    pub fn from_messages(messages: &[ControlMessage]) -> Result<Self> {
        let rows: Vec<f64> = messages.iter().flat_map(|m| m.features()).collect();
        let labels = collect_labels(messages.iter().map(|m| m.label));
        let features = Array2::from_shape_vec((messages.len(), 5), rows).expect("row-major");
        Self::new(Schema::Scada, features, labels)
    }

    pub fn from_records(records: &[StabilityRecord]) -> Result<Self> {
        let rows: Vec<f64> = records.iter().flat_map(|r| r.features()).collect();
        let labels = collect_labels(records.iter().map(|r| r.label));
        let features = Array2::from_shape_vec((records.len(), 13), rows).expect("row-major");
        Self::new(Schema::Stability, features, labels)
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn stats(&self) -> Option<&NormalizationStats> {
        self.stats.as_ref()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.features.ncols()
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Assigns the same origin label to every row.
    pub fn with_uniform_label(self, label: u8) -> Self {
        let n = self.len();
        Self {
            labels: Some(vec![label; n]),
            ..self
        }
    }

    pub fn without_labels(self) -> Self {
        Self { labels: None, ..self }
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema,
            features: self.features.select(Axis(0), indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            stats: self.stats.clone(),
        }
    }

    /// Row-wise concatenation. Both sides must agree on schema, normalization
    /// and whether labels are present.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.schema != other.schema || self.stats != other.stats {
            return Err(Error::SchemaMismatch {
                expected: self.schema.to_string(),
                found: other.schema.to_string(),
            });
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidConfig(
                    "cannot concatenate labeled and unlabeled datasets".into(),
                ))
            }
        };
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Self {
            schema: self.schema,
            features,
            labels,
            stats: self.stats.clone(),
        })
    }

    /// Class used to stratify splits: the origin label when present, otherwise
    /// the stability flag for stability records, otherwise a single stratum.
    pub fn strata(&self) -> Vec<u8> {
        if let Some(l) = &self.labels {
            return l.clone();
        }
        match self.schema.stab_index() {
            Some(idx) if self.stats.is_none() => self
                .features
                .column(idx)
                .iter()
                .map(|&s| u8::from(!is_stable(s)))
                .collect(),
            _ => vec![0; self.len()],
        }
    }

    /// CSV with the schema's header, plus `stabf` for stability records and
    /// `label` when labels are present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<&str> = self.schema.feature_names().to_vec();
        let stab_idx = self.schema.stab_index().filter(|_| self.stats.is_none());
        if stab_idx.is_some() {
            header.push(STABF_COLUMN);
        }
        if self.labels.is_some() {
            header.push(LABEL_COLUMN);
        }
        writeln!(out, "{}", header.join(","))?;
        for (r, row) in self.features.rows().into_iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|&v| g9(v)).collect();
            if let Some(idx) = stab_idx {
                cells.push(StabilityFlag::from_stab(row[idx]).as_str().to_string());
            }
            if let Some(l) = &self.labels {
                cells.push(l[r].to_string());
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn collect_labels(labels: impl Iterator<Item = Option<u8>>) -> Option<Vec<u8>> {
    labels.collect()
}

/// A row the loader refused, with its 1-based data row number.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectedRow {
    pub row: usize,
    pub reason: String,
}

/// Result of loading a CSV: the accepted rows plus every rejection.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub rejected: Vec<RejectedRow>,
}

struct Columns {
    features: Vec<usize>,
    stabf: Option<usize>,
    label: Option<usize>,
}

fn locate_columns(headers: &csv::StringRecord, schema: Schema) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let features = schema
        .feature_names()
        .iter()
        .map(|&name| find(name).ok_or_else(|| Error::MissingColumn(name.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let stabf = match schema {
        Schema::Stability => Some(find(STABF_COLUMN).ok_or_else(|| Error::MissingColumn(STABF_COLUMN.into()))?),
        Schema::Scada => None,
    };
    Ok(Columns {
        features,
        stabf,
        label: find(LABEL_COLUMN),
    })
}

fn parse_cell(record: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = record.get(idx).ok_or_else(|| format!("missing cell `{name}`"))?.trim();
    raw.parse::<f64>()
        .map_err(|_| format!("`{name}` is not numeric ({raw:?})"))
}

fn parse_label(record: &csv::StringRecord, idx: Option<usize>) -> std::result::Result<Option<u8>, String> {
    let Some(idx) = idx else { return Ok(None) };
    let raw = record.get(idx).ok_or("missing cell `label`")?.trim();
    match raw {
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => Err(format!("label {other:?} is not 0 or 1")),
    }
}

fn read_rows<R: Read, T>(
    reader: R,
    schema: Schema,
    mut parse: impl FnMut(&csv::StringRecord, &Columns) -> std::result::Result<T, String>,
) -> Result<(Vec<T>, Vec<RejectedRow>)> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let columns = locate_columns(csv.headers()?, schema)?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let outcome = record
            .map_err(|e| e.to_string())
            .and_then(|r| parse(&r, &columns));
        match outcome {
            Ok(value) => accepted.push(value),
            Err(reason) => rejected.push(RejectedRow { row, reason }),
        }
    }
    for r in &rejected {
        log::warn!("{schema} row {} rejected: {}", r.row, r.reason);
    }
    if accepted.is_empty() && rejected.is_empty() {
        log::warn!("{schema} input has a header but no data rows");
    }
    Ok((accepted, rejected))
}

/// Reads SCADA messages with columns `a,b,c,d,e[,label]`.
pub fn read_scada_csv<R: Read>(reader: R) -> Result<Loaded> {
    let (messages, rejected) = read_rows(reader, Schema::Scada, |rec, cols| {
        let mut f = [0.0; 5];
        for (k, (&idx, name)) in cols.features.iter().zip(SCADA_COLUMNS).enumerate() {
            f[k] = parse_cell(rec, idx, name)?;
        }
        let msg = ControlMessage {
            a: f[0],
            b: f[1],
            c: f[2],
            d: f[3],
            e: f[4],
            label: parse_label(rec, cols.label)?,
        };
        msg.validate()?;
        Ok(msg)
    })?;
    let dataset = if messages.is_empty() {
        Dataset::empty(Schema::Scada)
    } else {
        Dataset::from_messages(&messages)?
    };
    Ok(Loaded { dataset, rejected })
}

/// Reads stability records with columns `tau1..4,p1..4,g1..4,stab,stabf[,label]`.
pub fn read_stability_csv<R: Read>(reader: R) -> Result<Loaded> {
    let (records, rejected) = read_rows(reader, Schema::Stability, |rec, cols| {
        let mut f = [0.0; 13];
        for (k, (&idx, name)) in cols.features.iter().zip(STABILITY_COLUMNS).enumerate() {
            f[k] = parse_cell(rec, idx, name)?;
        }
        let flag_idx = cols.stabf.expect("stability schema has stabf");
        let raw = rec.get(flag_idx).unwrap_or("").trim();
        let stabf = StabilityFlag::parse(raw).ok_or_else(|| format!("stabf {raw:?} is not stable/unstable"))?;
        let record = StabilityRecord {
            tau: [f[0], f[1], f[2], f[3]],
            p: [f[4], f[5], f[6], f[7]],
            g: [f[8], f[9], f[10], f[11]],
            stab: f[12],
            stabf,
            label: parse_label(rec, cols.label)?,
        };
        record.validate()?;
        Ok(record)
    })?;
    let dataset = if records.is_empty() {
        Dataset::empty(Schema::Stability)
    } else {
        Dataset::from_records(&records)?
    };
    Ok(Loaded { dataset, rejected })
}

pub fn load_scada_csv(path: &Path) -> Result<Loaded> {
    read_scada_csv(std::fs::File::open(path)?)
}

pub fn load_stability_csv(path: &Path) -> Result<Loaded> {
    read_stability_csv(std::fs::File::open(path)?)
}

/// Loads either schema from a path.
pub fn load_csv(path: &Path, schema: Schema) -> Result<Loaded> {
    match schema {
        Schema::Scada => load_scada_csv(path),
        Schema::Stability => load_stability_csv(path),
    }
}

/// Fits normalization statistics on `ds` without transforming it.
pub fn fit_stats(ds: &Dataset, mode: NormMode) -> Result<NormalizationStats> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot normalize an empty dataset".into()));
    }
    if ds.stats.is_some() {
        return Err(Error::InvalidConfig("dataset is already normalized".into()));
    }
    let names = ds.schema.feature_names();
    let n = ds.len() as f64;
    let mut a = Vec::with_capacity(ds.feature_count());
    let mut b = Vec::with_capacity(ds.feature_count());
    for (f, col) in ds.features.columns().into_iter().enumerate() {
        match mode {
            NormMode::MinmaxPm1 => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(hi > lo) {
                    return Err(Error::ConstantFeature(names[f].to_string()));
                }
                a.push(lo);
                b.push(hi);
            }
            NormMode::Zscore => {
                let mean = col.sum() / n;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if !(sd > 0.0) || !sd.is_finite() {
                    return Err(Error::ConstantFeature(names[f].to_string()));
                }
                a.push(mean);
                b.push(sd);
            }
        }
    }
    let scaling = match mode {
        NormMode::MinmaxPm1 => Scaling::MinmaxPm1 { min: a, max: b },
        NormMode::Zscore => Scaling::Zscore { mean: a, sd: b },
    };
    Ok(NormalizationStats {
        schema: ds.schema,
        scaling,
    })
}

fn check_stats(ds: &Dataset, stats: &NormalizationStats) -> Result<()> {
    if ds.schema != stats.schema || ds.feature_count() != stats.feature_count() {
        return Err(Error::SchemaMismatch {
            expected: stats.schema.to_string(),
            found: ds.schema.to_string(),
        });
    }
    Ok(())
}

/// Expresses a raw dataset in the coordinates of existing statistics
/// (e.g. a test split normalized with training statistics).
pub fn apply_stats(ds: &Dataset, stats: &NormalizationStats) -> Result<Dataset> {
    check_stats(ds, stats)?;
    if ds.stats.is_some() {
        return Err(Error::InvalidConfig("dataset is already normalized".into()));
    }
    let mut features = ds.features.clone();
    for (f, mut col) in features.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| stats.normalize_value(f, x));
    }
    Ok(Dataset {
        schema: ds.schema,
        features,
        labels: ds.labels.clone(),
        stats: Some(stats.clone()),
    })
}

pub fn normalize(ds: &Dataset, mode: NormMode) -> Result<(Dataset, NormalizationStats)> {
    let stats = fit_stats(ds, mode)?;
    Ok((apply_stats(ds, &stats)?, stats))
}

/// Exact affine inverse of [`normalize`]. Accepts both datasets tagged with
/// `stats` and untagged matrices expressed in normalized coordinates (such as
/// raw generator output).
pub fn denormalize(ds: &Dataset, stats: &NormalizationStats) -> Result<Dataset> {
    check_stats(ds, stats)?;
    if let Some(own) = &ds.stats {
        if own != stats {
            return Err(Error::SchemaMismatch {
                expected: "the statistics the dataset was normalized with".into(),
                found: "different statistics".into(),
            });
        }
    }
    let mut features = ds.features.clone();
    for (f, mut col) in features.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|y| stats.denormalize_value(f, y));
    }
    Ok(Dataset {
        schema: ds.schema,
        features,
        labels: ds.labels.clone(),
        stats: None,
    })
}

/// Seeded stratified split into `(train, test)`.
///
/// The training size is `round(train_fraction · n)`; each stratum contributes
/// in proportion, with leftover rows assigned by largest remainder.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train fraction must lie in (0, 1)".into()));
    }
    let n = ds.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train == n {
        return Err(Error::TooSmall(format!(
            "{n} rows cannot be split at fraction {train_fraction}"
        )));
    }
    let strata = ds.strata();
    let mut classes: Vec<u8> = strata.clone();
    classes.sort_unstable();
    classes.dedup();
    let mut groups: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..n).filter(|&i| strata[i] == c).collect())
        .collect();
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::TooSmall(
            "every stratum needs at least two rows to appear in both splits".into(),
        ));
    }

    let mut rng = rng::seeded(seed);
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    // Largest-remainder apportionment of the training rows across strata.
    let exact: Vec<f64> = groups
        .iter()
        .map(|g| g.len() as f64 * n_train as f64 / n as f64)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let mut missing = n_train - take.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if take[k] < groups[k].len() - 1 {
            take[k] += 1;
            missing -= 1;
        }
    }
    for (k, g) in groups.iter().enumerate() {
        take[k] = take[k].clamp(1, g.len() - 1);
    }

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (g, &t) in groups.iter().zip(&take) {
        train.extend_from_slice(&g[..t]);
        test.extend_from_slice(&g[t..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((ds.select(&train), ds.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const STAB_HEADER: &str = "tau1,tau2,tau3,tau4,p1,p2,p3,p4,g1,g2,g3,g4,stab,stabf";

    #[test]
    fn accepts_valid_stability_row() {
        let text = format!("{STAB_HEADER}\n2,2,2,2,3,-1,-1,-1,0.5,0.5,0.5,0.5,-0.01,stable\n");
        let loaded = read_stability_csv(text.as_bytes()).unwrap();
        assert_eq!(loaded.dataset.len(), 1);
        assert!(loaded.rejected.is_empty());
        assert_eq!(loaded.dataset.schema(), Schema::Stability);
    }

    #[test]
    fn rejects_sign_mismatch() {
        let text = format!(
            "{STAB_HEADER}\n2,2,2,2,3,-1,-1,-1,0.5,0.5,0.5,0.5,0.02,stable\n2,2,2,2,3,-1,-1,-1,0.5,0.5,0.5,0.5,0.02,unstable\n"
        );
        let loaded = read_stability_csv(text.as_bytes()).unwrap();
        assert_eq!(loaded.dataset.len(), 1);
        assert_eq!(loaded.rejected.len(), 1);
        assert_eq!(loaded.rejected[0].row, 1);
        assert!(loaded.rejected[0].reason.contains("contradicts"));
    }

    #[test]
    fn ten_row_stability_file() {
        let mut text = format!("{STAB_HEADER}\n");
        for k in 0..10 {
            let stab = if k % 2 == 0 { -0.05 } else { 0.05 };
            let flag = if k % 2 == 0 { "stable" } else { "unstable" };
            text.push_str(&format!("1,2,3,4,3,-1,-1,-1,0.1,0.2,0.3,0.4,{stab},{flag}\n"));
        }
        let loaded = read_stability_csv(text.as_bytes()).unwrap();
        assert_eq!(loaded.dataset.len(), 10);
        assert_eq!(loaded.dataset.schema(), Schema::Stability);
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "tau1,tau2\n1,2\n";
        assert!(matches!(read_stability_csv(text.as_bytes()), Err(Error::MissingColumn(_))));
        assert!(matches!(read_scada_csv("a,b,c,d\n1,2,3,4\n".as_bytes()), Err(Error::MissingColumn(c)) if c == "e"));
    }

    #[test]
    fn scada_rows() {
        let loaded = read_scada_csv("a,b,c,d,e\n10,512,7,3,10\n1,-1,1,1,1\n2,x,1,1,1\n".as_bytes()).unwrap();
        assert_eq!(loaded.dataset.len(), 1);
        assert_eq!(loaded.dataset.features().row(0).to_vec(), vec![10.0, 512.0, 7.0, 3.0, 10.0]);
        let rows: Vec<usize> = loaded.rejected.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![2, 3]);
    }

    #[test]
    fn scada_header_only_is_empty() {
        let loaded = read_scada_csv("a,b,c,d,e\n".as_bytes()).unwrap();
        assert!(loaded.dataset.is_empty());
        assert!(loaded.rejected.is_empty());
    }

    #[test]
    fn scada_labels_must_be_binary() {
        let loaded = read_scada_csv("a,b,c,d,e,label\n1,1,1,1,1,1\n1,1,1,1,1,2\n".as_bytes()).unwrap();
        assert_eq!(loaded.dataset.labels(), Some(&[1u8][..]));
        assert_eq!(loaded.rejected.len(), 1);
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        let ds = Dataset::new(
            Schema::Scada,
            array![[0.0, 1.0, 2.0, 3.0, 4.0], [10.0, 2.0, 3.0, 4.0, 5.0]],
            None,
        )
        .unwrap();
        let (norm, stats) = normalize(&ds, NormMode::MinmaxPm1).unwrap();
        assert_eq!(norm.features().column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(stats.mode(), NormMode::MinmaxPm1);
    }

    #[test]
    fn zscore_has_zero_mean_unit_sd() {
        let ds = Dataset::new(
            Schema::Scada,
            array![[1.0, 1.0, 0.0, 5.0, 1.0], [2.0, 4.0, 1.0, 6.0, 2.0], [3.0, 9.0, 5.0, 8.0, 4.0]],
            None,
        )
        .unwrap();
        let (norm, _) = normalize(&ds, NormMode::Zscore).unwrap();
        let col = norm.features().column(0);
        let mean = col.sum() / 3.0;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_named() {
        let ds = Dataset::new(Schema::Scada, array![[1.0, 1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 3.0, 4.0, 5.0]], None).unwrap();
        assert!(matches!(normalize(&ds, NormMode::MinmaxPm1), Err(Error::ConstantFeature(f)) if f == "b"));
        assert!(matches!(normalize(&ds, NormMode::Zscore), Err(Error::ConstantFeature(f)) if f == "b"));
    }

    #[test]
    fn denormalize_rejects_other_schema() {
        let ds = Dataset::new(Schema::Scada, array![[0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0, 5.0]], None).unwrap();
        let (_, stats) = normalize(&ds, NormMode::MinmaxPm1).unwrap();
        let other = Dataset::empty(Schema::Stability);
        assert!(denormalize(&other, &stats).is_err());
    }

    fn labeled(n: usize, positives: usize) -> Dataset {
        let features = Array2::from_shape_fn((n, 5), |(i, j)| (i * 5 + j) as f64);
        let labels = (0..n).map(|i| u8::from(i < positives)).collect();
        Dataset::new(Schema::Scada, features, Some(labels)).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = labeled(100, 33);
        let (train, test) = split(&ds, 0.8, 42).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        let (again, _) = split(&ds, 0.8, 42).unwrap();
        assert_eq!(train, again);
        let (other, _) = split(&ds, 0.8, 43).unwrap();
        assert_ne!(train, other);
    }

    #[test]
    fn split_preserves_balanced_ratio() {
        let ds = labeled(100, 50);
        let (train, _) = split(&ds, 0.8, 1).unwrap();
        let pos = train.labels().unwrap().iter().filter(|&&l| l == 1).count() as f64;
        let ratio = pos / train.len() as f64;
        assert!((0.48..=0.52).contains(&ratio), "{ratio}");
    }

    #[test]
    fn split_rejects_tiny_strata() {
        let ds = labeled(10, 1);
        assert!(matches!(split(&ds, 0.5, 0), Err(Error::TooSmall(_))));
        assert!(split(&labeled(10, 5), 1.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip_through_writer() {
        let ds = labeled(4, 2);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read_scada_csv(buf.as_slice()).unwrap().dataset;
        assert_eq!(back, ds);
    }

    #[test]
    fn stability_writer_emits_stabf() {
        let rec = StabilityRecord {
            tau: [1.0; 4],
            p: [3.0, -1.0, -1.0, -1.0],
            g: [0.5; 4],
            stab: 0.25,
            stabf: StabilityFlag::Unstable,
            label: None,
        };
        let ds = Dataset::from_records(&[rec]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(STAB_HEADER));
        assert!(text.trim_end().ends_with("0.25,unstable"));
        assert_eq!(read_stability_csv(text.as_bytes()).unwrap().dataset, ds);
    }

    #[test]
    fn stats_json_round_trip() {
        let ds = labeled(6, 3).without_labels();
        let stats = fit_stats(&ds, NormMode::Zscore).unwrap();
        assert_eq!(NormalizationStats::from_json(&stats.to_json().unwrap()).unwrap(), stats);
    }
}
