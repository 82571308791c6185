//! Dataset ingestion and bag assembly.
//!
//! CSV files are read against a small JSON schema naming the label column
//! (with its positive value) and the feature columns. Rows with missing
//! values (empty cells or `?`) are dropped and counted. Numeric columns
//! are standardized to zero mean and unit variance, categorical columns
//! one-hot encoded; standardization parameters are fitted on the training
//! split only and applied unchanged to test data.
//!
//! Labeled datasets turn into bags by drawing a label proportion per bag,
//! rounding it to a positive count, and filling the bag by sampling
//! without replacement from per-class pools. Whatever the bags do not
//! consume becomes the held-out test set.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::bags::{sample_lps, Bag, LpDistribution};
use crate::eval::LabeledTestSet;
use crate::{seed, Error, Result};

/// Feature column type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LabelSpec {
    pub column: String,
    pub positive: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Column schema for CSV ingestion.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Schema {
    pub label: LabelSpec,
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Schema> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Per-column metadata of a loaded or encoded dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnMeta {
    Numeric { name: String },
    /// Values are category indices; the list fixes the index order.
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnMeta {
    pub fn name(&self) -> &str {
        match self {
            ColumnMeta::Numeric { name } | ColumnMeta::Categorical { name, .. } => name,
        }
    }
}

/// A feature matrix with labels and column metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub columns: Vec<ColumnMeta>,
    /// Rows discarded during ingestion because of missing values.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Wraps an already-encoded matrix; columns are named `x0..x{d-1}`.
    pub fn from_matrix(features: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Dataset> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: features.len() });
        }
        let dim = features.first().map_or(0, |r| r.len());
        Ok(Dataset {
            features,
            labels,
            columns: (0..dim).map(|c| ColumnMeta::Numeric { name: format!("x{c}") }).collect(),
            dropped_rows: 0,
        })
    }
}

fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell == "?"
}

/// Loads a CSV file with a header row against `schema`. The label column
/// maps to +1 when it equals the schema's positive value, otherwise -1;
/// rows with missing values are dropped and counted.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in {path:?}")))
    };
    let label_idx = column_index(&schema.label.column)?;
    let feature_idx: Vec<usize> =
        schema.features.iter().map(|f| column_index(&f.name)).collect::<Result<_>>()?;

    let mut columns: Vec<ColumnMeta> = schema
        .features
        .iter()
        .map(|f| match f.kind {
            ColumnKind::Numeric => ColumnMeta::Numeric { name: f.name.clone() },
            ColumnKind::Categorical => {
                ColumnMeta::Categorical { name: f.name.clone(), categories: Vec::new() }
            }
        })
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dropped_rows = 0;

    for (record_no, record) in reader.records().enumerate() {
        let line = record_no + 2; // header is line 1
        let record = record?;
        let mut used = std::iter::once(label_idx).chain(feature_idx.iter().copied());
        if used.any(|i| record.get(i).is_none_or(is_missing)) {
            dropped_rows += 1;
            continue;
        }

        let mut row = Vec::with_capacity(feature_idx.len());
        for (spec_pos, &idx) in feature_idx.iter().enumerate() {
            let cell = record.get(idx).unwrap().trim();
            match &mut columns[spec_pos] {
                ColumnMeta::Numeric { name } => {
                    let value: f64 = cell.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("column `{name}`: `{cell}` is not numeric"),
                    })?;
                    row.push(value);
                }
                ColumnMeta::Categorical { categories, .. } => {
                    let code = match categories.iter().position(|c| c == cell) {
                        Some(code) => code,
                        None => {
                            categories.push(cell.to_string());
                            categories.len() - 1
                        }
                    };
                    row.push(code as f64);
                }
            }
        }
        features.push(row);
        labels.push(if record.get(label_idx).unwrap().trim() == schema.label.positive {
            1
        } else {
            -1
        });
    }

    if dropped_rows > 0 {
        log::info!("dropped {dropped_rows} rows with missing values from {path:?}");
    }
    Ok(Dataset { features, labels, columns, dropped_rows })
}

/// Standardization and one-hot parameters, fitted on one dataset and
/// applicable to others. `fingerprint` records the fitting data so tests
/// can assert a transform used training parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    columns: Vec<FittedColumn>,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum FittedColumn {
    Numeric { name: String, mean: f64, sd: f64 },
    OneHot { name: String, categories: Vec<String> },
}

impl Preprocessor {
    /// Fits means and population standard deviations on the numeric
    /// columns and fixes the category lists of the categorical ones.
    pub fn fit(ds: &Dataset) -> Result<Preprocessor> {
        if ds.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        let n = ds.len() as f64;
        let mut columns = Vec::with_capacity(ds.columns.len());
        for (c, meta) in ds.columns.iter().enumerate() {
            match meta {
                ColumnMeta::Numeric { name } => {
                    let mean: f64 = ds.features.iter().map(|r| r[c]).sum::<f64>() / n;
                    let var: f64 =
                        ds.features.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
                    if var <= 0.0 {
                        return Err(Error::ZeroVariance(format!("column `{name}`")));
                    }
                    columns.push(FittedColumn::Numeric { name: name.clone(), mean, sd: var.sqrt() });
                }
                ColumnMeta::Categorical { name, categories } => {
                    columns.push(FittedColumn::OneHot {
                        name: name.clone(),
                        categories: categories.clone(),
                    });
                }
            }
        }
        Ok(Preprocessor { columns, fingerprint: dataset_fingerprint(ds) })
    }

    /// Applies fitted parameters: standardized numerics, 0/1 one-hot
    /// expansion. Errors on categories unseen at fit time.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.columns.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: ds.columns.len(),
            });
        }
        let mut out_columns = Vec::new();
        for fitted in &self.columns {
            match fitted {
                FittedColumn::Numeric { name, .. } => {
                    out_columns.push(ColumnMeta::Numeric { name: name.clone() });
                }
                FittedColumn::OneHot { name, categories } => {
                    for cat in categories {
                        out_columns.push(ColumnMeta::Numeric { name: format!("{name}={cat}") });
                    }
                }
            }
        }

        let mut features = Vec::with_capacity(ds.len());
        for row in &ds.features {
            let mut out = Vec::with_capacity(out_columns.len());
            for (c, fitted) in self.columns.iter().enumerate() {
                match (fitted, &ds.columns[c]) {
                    (FittedColumn::Numeric { mean, sd, .. }, ColumnMeta::Numeric { .. }) => {
                        out.push((row[c] - mean) / sd);
                    }
                    (
                        FittedColumn::OneHot { name, categories },
                        ColumnMeta::Categorical { categories: input_cats, .. },
                    ) => {
                        let value = &input_cats[row[c] as usize];
                        let code = categories.iter().position(|c| c == value).ok_or_else(|| {
                            Error::Config(format!("unknown category `{value}` in column `{name}`"))
                        })?;
                        for k in 0..categories.len() {
                            out.push(if k == code { 1.0 } else { 0.0 });
                        }
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "column kind mismatch at `{}`",
                            ds.columns[c].name()
                        )))
                    }
                }
            }
            features.push(out);
        }
        Ok(Dataset {
            features,
            labels: ds.labels.clone(),
            columns: out_columns,
            dropped_rows: ds.dropped_rows,
        })
    }
}

fn dataset_fingerprint(ds: &Dataset) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |bits: u64| {
        h ^= bits;
        h = h.wrapping_mul(0x100000001b3);
    };
    mix(ds.len() as u64);
    for row in &ds.features {
        for v in row {
            mix(v.to_bits());
        }
    }
    h
}

/// Fits on `ds` and transforms it. Use the returned [`Preprocessor`] to
/// transform held-out data with the same parameters.
pub fn preprocess(ds: &Dataset) -> Result<(Dataset, Preprocessor)> {
    let prep = Preprocessor::fit(ds)?;
    Ok((prep.transform(ds)?, prep))
}

/// Draws `total / bag_size` label proportions, fills each bag with
/// `round(bag_size * lp)` positives sampled without replacement from the
/// class pools, and returns the untouched remainder as a labeled test
/// set. Hidden labels stay on the bags for evaluation only.
pub fn assemble_bags(
    ds: &Dataset,
    bag_size: usize,
    lp_dist: &LpDistribution,
    total: usize,
    seed_value: u64,
) -> Result<(Vec<Bag>, LabeledTestSet)> {
    if bag_size == 0 || total == 0 || !total.is_multiple_of(bag_size) {
        return Err(Error::InvalidParameter(format!(
            "total {total} must be a positive multiple of bag size {bag_size}"
        )));
    }
    let n_bags = total / bag_size;
    let lps = sample_lps(lp_dist, n_bags, seed::derive_seed(seed_value, "bag-lps"))?;

    let mut pos_pool: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == 1).collect();
    let mut neg_pool: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == -1).collect();
    let mut rng = seed::rng(seed::derive_seed(seed_value, "bag-pools"));
    pos_pool.shuffle(&mut rng);
    neg_pool.shuffle(&mut rng);

    let mut bags = Vec::with_capacity(n_bags);
    for lp in lps {
        let want_pos = ((bag_size as f64 * lp).round() as usize).min(bag_size);
        let want_neg = bag_size - want_pos;
        if pos_pool.len() < want_pos {
            return Err(Error::PoolExhausted {
                class: "positive",
                needed: want_pos - pos_pool.len(),
            });
        }
        if neg_pool.len() < want_neg {
            return Err(Error::PoolExhausted {
                class: "negative",
                needed: want_neg - neg_pool.len(),
            });
        }
        let mut members: Vec<usize> = pos_pool.split_off(pos_pool.len() - want_pos);
        members.extend(neg_pool.split_off(neg_pool.len() - want_neg));
        members.shuffle(&mut rng);
        let instances = members.iter().map(|&i| ds.features[i].clone()).collect();
        let labels = members.iter().map(|&i| ds.labels[i]).collect();
        bags.push(Bag::from_labeled(instances, labels, Some(lp))?);
    }

    let mut leftovers: Vec<usize> = pos_pool;
    leftovers.extend(neg_pool);
    leftovers.sort_unstable();
    let test = LabeledTestSet::new(
        leftovers.iter().map(|&i| ds.features[i].clone()).collect(),
        leftovers.iter().map(|&i| ds.labels[i]).collect(),
    )?;
    Ok((bags, test))
}

/// One manifest row: the training input contract.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct ManifestRow {
    bag_id: usize,
    file: String,
    n: usize,
    lp_hat: f64,
    true_lp: Option<f64>,
}

/// Writes bags as a manifest plus one CSV per bag under `dir`. Hidden
/// labels are simulation state and are deliberately not written.
pub fn write_bag_dir(dir: &Path, bags: &[Bag]) -> Result<()> {
    std::fs::create_dir_all(dir.join("bags"))?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    for (id, bag) in bags.iter().enumerate() {
        let file = format!("bags/bag_{id:04}.csv");
        manifest.serialize(ManifestRow {
            bag_id: id,
            file: file.clone(),
            n: bag.len(),
            lp_hat: bag.lp_hat(),
            true_lp: bag.true_lp(),
        })?;
        let mut writer = csv::Writer::from_path(dir.join(&file))?;
        let dim = bag.instances().first().map_or(0, |x| x.len());
        writer.write_record((0..dim).map(|c| format!("x{c}")))?;
        for x in bag.instances() {
            writer.serialize(x)?;
        }
        writer.flush()?;
    }
    manifest.flush()?;
    Ok(())
}

/// Reads a bag directory written by [`write_bag_dir`].
pub fn read_bag_dir(dir: &Path) -> Result<Vec<Bag>> {
    let mut manifest = csv::Reader::from_path(dir.join("manifest.csv"))?;
    let mut bags = Vec::new();
    for row in manifest.deserialize::<ManifestRow>() {
        let row = row?;
        let mut reader = csv::Reader::from_path(dir.join(&row.file))?;
        let mut instances = Vec::with_capacity(row.n);
        for record in reader.deserialize::<Vec<f64>>() {
            instances.push(record?);
        }
        if instances.len() != row.n {
            return Err(Error::Config(format!(
                "bag {} has {} instances, manifest says {}",
                row.bag_id,
                instances.len(),
                row.n
            )));
        }
        let mut bag = Bag::from_unlabeled(instances, row.lp_hat)?;
        if let Some(lp) = row.true_lp {
            bag = bag.with_true_lp(lp);
        }
        bags.push(bag);
    }
    Ok(bags)
}

/// Writes a labeled test set as CSV with a trailing `label` column.
pub fn write_labeled_csv(path: &Path, test: &LabeledTestSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let dim = test.instances().first().map_or(0, |x| x.len());
    let mut header: Vec<String> = (0..dim).map(|c| format!("x{c}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (x, y) in test.instances().iter().zip(test.labels()) {
        let mut row: Vec<f64> = x.clone();
        row.push(f64::from(*y));
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a labeled CSV whose last column is a +1/-1 label.
pub fn read_labeled_csv(path: &Path) -> Result<LabeledTestSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (record_no, record) in reader.records().enumerate() {
        let record = record?;
        let line = record_no + 2;
        if record.is_empty() {
            continue;
        }
        let mut row: Vec<f64> = Vec::with_capacity(record.len() - 1);
        for cell in record.iter().take(record.len() - 1) {
            row.push(cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{cell}` is not numeric"),
            })?);
        }
        let label_cell = record.get(record.len() - 1).unwrap().trim();
        let label: f64 = label_cell.parse().map_err(|_| Error::Parse {
            line,
            message: format!("label `{label_cell}` is not numeric"),
        })?;
        if label != 1.0 && label != -1.0 {
            return Err(Error::Parse { line, message: "label must be +1 or -1".into() });
        }
        instances.push(row);
        labels.push(label as i8);
    }
    LabeledTestSet::new(instances, labels)
}
