//! Dataset ingestion: CSV loading with mixed numeric/categorical columns,
//! schema handling, and the standardized one-hot encoding consumed by PCA.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells equal to `?` or empty are treated as missing.
pub const MISSING_TOKEN: &str = "<missing>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered column descriptions for a CSV file.
///
/// At most one column may be a label, and at least one column must hold
/// feature data (numeric or categorical).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("schema has no columns".into()));
        }
        let labels = columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels > 1 {
            return Err(Error::Schema(format!(
                "schema has {labels} label columns; at most one is allowed"
            )));
        }
        let features = columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
            .count();
        if features == 0 {
            return Err(Error::Schema(
                "schema has no numeric or categorical feature columns".into(),
            ));
        }
        let mut seen = HashMap::new();
        for c in &columns {
            if seen.insert(c.name.clone(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn label_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == ColumnKind::Label)
    }

    /// Re-kinds the named column as the label column.
    pub fn with_label(mut self, name: &str) -> Result<Self> {
        let idx = self
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("label column '{name}' not found in header")))?;
        for (i, c) in self.columns.iter_mut().enumerate() {
            if c.kind == ColumnKind::Label && i != idx {
                c.kind = ColumnKind::Categorical;
            }
        }
        self.columns[idx].kind = ColumnKind::Label;
        Schema::new(self.columns)
    }

    /// Applies a JSON override file (`{"column name": "numeric" | "categorical"
    /// | "label" | "ignore"}`) on top of this schema. Columns not named in the
    /// file keep their current kind; names absent from the header are an error.
    pub fn apply_overrides(mut self, overrides: &HashMap<String, ColumnKind>) -> Result<Self> {
        for (name, kind) in overrides {
            let idx = self
                .columns
                .iter()
                .position(|c| &c.name == name)
                .ok_or_else(|| {
                    Error::Schema(format!("override names unknown column '{name}'"))
                })?;
            self.columns[idx].kind = *kind;
        }
        Schema::new(self.columns)
    }

    pub fn load_overrides(path: &Path) -> Result<HashMap<String, ColumnKind>> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("invalid schema file {}: {e}", path.display())))
    }
}

/// Interns category strings to dense ids, preserving first-seen order.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl CategoryMap {
    pub fn intern(&mut self, value: &str) -> u32 {
        if let Some(&id) = self.ids.get(value) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(value.to_owned());
        self.ids.insert(value.to_owned(), id);
        id
    }

    pub fn id(&self, value: &str) -> Option<u32> {
        self.ids.get(value).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// An in-memory mixed-type dataset.
///
/// Numeric features live in an `n x m_r` matrix, categorical features in an
/// `n x m_t` matrix of interned category ids. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    numeric: Array2<f64>,
    categorical: Array2<u32>,
    categories: Vec<CategoryMap>,
    labels: Option<Vec<u32>>,
    label_names: Option<CategoryMap>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.numeric.nrows()
    }

    pub fn numeric_count(&self) -> usize {
        self.numeric.ncols()
    }

    pub fn categorical_count(&self) -> usize {
        self.categorical.ncols()
    }

    /// Total feature count (numeric + categorical).
    pub fn feature_count(&self) -> usize {
        self.numeric_count() + self.categorical_count()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn numeric(&self) -> ArrayView2<'_, f64> {
        self.numeric.view()
    }

    pub fn categorical(&self) -> ArrayView2<'_, u32> {
        self.categorical.view()
    }

    /// Category interner for the `j`-th categorical column.
    pub fn categories(&self, j: usize) -> &CategoryMap {
        &self.categories[j]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn label_names(&self) -> Option<&CategoryMap> {
        self.label_names.as_ref()
    }

    /// Number of distinct classes, if the dataset is labeled.
    pub fn class_count(&self) -> Option<usize> {
        self.label_names.as_ref().map(|m| m.len())
    }

    /// New dataset holding only the given rows (interners and schema shared).
    pub fn restrict(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Argument("cannot restrict to an empty index set".into()));
        }
        for &i in indices {
            if i >= self.n() {
                return Err(Error::Argument(format!(
                    "row index {i} out of bounds for dataset of {} rows",
                    self.n()
                )));
            }
        }
        let numeric = select_rows(&self.numeric, indices);
        let categorical = select_rows(&self.categorical, indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(Dataset {
            schema: self.schema.clone(),
            numeric,
            categorical,
            categories: self.categories.clone(),
            labels,
            label_names: self.label_names.clone(),
        })
    }

    /// Builds a dataset directly from parsed columns; used by generators and tests.
    pub fn from_parts(
        schema: Schema,
        numeric: Array2<f64>,
        categorical: Array2<u32>,
        categories: Vec<CategoryMap>,
        labels: Option<Vec<u32>>,
        label_names: Option<CategoryMap>,
    ) -> Result<Dataset> {
        let n = numeric.nrows().max(categorical.nrows());
        if n == 0 {
            return Err(Error::Argument("dataset must have at least one row".into()));
        }
        if numeric.nrows() != n && numeric.ncols() > 0 {
            return Err(Error::Argument("numeric row count mismatch".into()));
        }
        if categorical.nrows() != n && categorical.ncols() > 0 {
            return Err(Error::Argument("categorical row count mismatch".into()));
        }
        if categories.len() != categorical.ncols() {
            return Err(Error::Argument("one category map per categorical column".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Argument("label count mismatch".into()));
            }
        }
        if numeric.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("numeric values must be finite".into()));
        }
        let numeric = if numeric.nrows() == n {
            numeric
        } else {
            Array2::zeros((n, 0))
        };
        let categorical = if categorical.nrows() == n {
            categorical
        } else {
            Array2::zeros((n, 0))
        };
        Ok(Dataset {
            schema,
            numeric,
            categorical,
            categories,
            labels,
            label_names,
        })
    }
}

fn select_rows<T: Clone + Default>(m: &Array2<T>, indices: &[usize]) -> Array2<T> {
    let mut out = Array2::default((indices.len(), m.ncols()));
    for (out_i, &src_i) in indices.iter().enumerate() {
        for j in 0..m.ncols() {
            out[(out_i, j)] = m[(src_i, j)].clone();
        }
    }
    out
}

/// Infers a schema from the header and sampled rows.
///
/// A column is numeric iff it has at least one sampled value and every
/// sampled value parses as a finite real; otherwise it is categorical.
/// With no sample rows every column is categorical. Missing markers
/// (`?`, empty) do not parse, so columns containing them infer as
/// categorical; pass a schema override to keep such columns numeric.
/// Label columns are never inferred.
pub fn infer_schema(header: &[String], sample_rows: &[Vec<String>]) -> Result<Schema> {
    if header.is_empty() {
        return Err(Error::Schema("header is empty".into()));
    }
    for (i, row) in sample_rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::ingest(
                i,
                None,
                format!("row has {} fields, header has {}", row.len(), header.len()),
            ));
        }
    }
    let columns = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let numeric = !sample_rows.is_empty()
                && sample_rows
                    .iter()
                    .all(|row| parse_numeric(&row[j]).is_some());
            Column {
                name: name.clone(),
                kind: if numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                },
            }
        })
        .collect();
    Schema::new(columns)
}

fn parse_numeric(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?"
}

/// Loads a CSV file (header row required) against the given schema.
///
/// Missing cells (`?` or empty) become the column mean for numeric columns
/// and a dedicated missing category for categorical ones. Labels are
/// interned as dense class ids.
pub fn load_csv(path: &Path, schema: Schema, label_column: Option<&str>) -> Result<Dataset> {
    let file = File::open(path)?;
    load_csv_reader(file, schema, label_column)
}

/// Loads a CSV file with schema inference over all data rows, optional JSON
/// overrides on top, and an optional label column.
pub fn load_csv_auto(
    path: &Path,
    schema_overrides: Option<&Path>,
    label_column: Option<&str>,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let rows: Vec<Vec<String>> = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .map(|r| r.iter().map(|c| c.to_owned()).collect())
        .collect();

    let mut schema = infer_schema(&header, &rows)?;
    if let Some(overrides_path) = schema_overrides {
        let overrides = Schema::load_overrides(overrides_path)?;
        schema = schema.apply_overrides(&overrides)?;
    }
    load_csv_reader(text.as_bytes(), schema, label_column)
}

pub fn load_csv_reader<R: Read>(
    reader: R,
    schema: Schema,
    label_column: Option<&str>,
) -> Result<Dataset> {
    let schema = match label_column {
        Some(name) => schema.with_label(name)?,
        None => schema,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    if header.len() != schema.columns().len() {
        return Err(Error::Schema(format!(
            "header has {} columns, schema has {}",
            header.len(),
            schema.columns().len()
        )));
    }
    for (h, c) in header.iter().zip(schema.columns()) {
        if h != &c.name {
            return Err(Error::Schema(format!(
                "header column '{h}' does not match schema column '{}'",
                c.name
            )));
        }
    }

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::ingest(
                i,
                None,
                format!("row has {} fields, header has {}", record.len(), header.len()),
            ));
        }
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(Error::ingest(0, None, "file contains no data rows"));
    }

    let n = rows.len();
    let numeric_cols: Vec<usize> = kind_positions(&schema, ColumnKind::Numeric);
    let categorical_cols: Vec<usize> = kind_positions(&schema, ColumnKind::Categorical);
    let label_col = schema.label_index();

    // Numeric columns take two passes: means over present cells, then imputation.
    let mut numeric = Array2::zeros((n, numeric_cols.len()));
    for (nj, &j) in numeric_cols.iter().enumerate() {
        let name = &schema.columns()[j].name;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut parsed: Vec<Option<f64>> = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            let cell = &row[j];
            if is_missing(cell) {
                parsed.push(None);
                continue;
            }
            let value = parse_numeric(cell).ok_or_else(|| {
                Error::ingest(i, Some(name), format!("cannot parse '{cell}' as a number"))
            })?;
            sum += value;
            count += 1;
            parsed.push(Some(value));
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        for (i, v) in parsed.into_iter().enumerate() {
            numeric[(i, nj)] = v.unwrap_or(mean);
        }
    }

    let mut categorical = Array2::zeros((n, categorical_cols.len()));
    let mut categories = vec![CategoryMap::default(); categorical_cols.len()];
    for (cj, &j) in categorical_cols.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            let cell = row[j].trim();
            let id = if is_missing(cell) {
                categories[cj].intern(MISSING_TOKEN)
            } else {
                categories[cj].intern(cell)
            };
            categorical[(i, cj)] = id;
        }
    }

    let (labels, label_names) = match label_col {
        Some(j) => {
            let mut map = CategoryMap::default();
            let mut ids = Vec::with_capacity(n);
            for row in &rows {
                ids.push(map.intern(row[j].trim()));
            }
            (Some(ids), Some(map))
        }
        None => (None, None),
    };

    Dataset::from_parts(schema, numeric, categorical, categories, labels, label_names)
}

fn kind_positions(schema: &Schema, kind: ColumnKind) -> Vec<usize> {
    schema
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == kind)
        .map(|(j, _)| j)
        .collect()
}

/// The standardized numeric representation of a dataset.
///
/// Numeric columns are z-scored; categorical columns are one-hot expanded
/// (one column per category) and then z-scored. Constant columns encode to
/// all zeros (their std is treated as 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    values: Array2<f64>,
    column_means: Vec<f64>,
    column_stds: Vec<f64>,
    /// Source schema column index for each encoded column.
    provenance: Vec<usize>,
}

impl EncodedMatrix {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_stds(&self) -> &[f64] {
        &self.column_stds
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    /// Wraps an already-encoded matrix; used when scores are computed on
    /// matrices built outside `encode`.
    pub fn from_values(values: Array2<f64>) -> EncodedMatrix {
        let d = values.ncols();
        EncodedMatrix {
            values,
            column_means: vec![0.0; d],
            column_stds: vec![1.0; d],
            provenance: (0..d).collect(),
        }
    }
}

/// Mean and sample standard deviation (n-1 denominator) of a slice.
/// A zero std is reported as-is; callers decide the degenerate convention.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Z-scores every column of a matrix in place semantics (returns a new
/// matrix). Constant columns map to zero.
pub fn zscore_columns(matrix: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let (n, d) = matrix.dim();
    let mut out = Array2::zeros((n, d));
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = matrix.column(j).to_vec();
        let (mean, std) = mean_std(&col);
        let divisor = if std > 0.0 { std } else { 1.0 };
        for i in 0..n {
            out[(i, j)] = (col[i] - mean) / divisor;
        }
        means.push(mean);
        stds.push(divisor);
    }
    (out, means, stds)
}

/// Encodes a dataset for PCA: z-scored numerics plus z-scored one-hot
/// categorical indicators, in schema column order.
pub fn encode(dataset: &Dataset) -> EncodedMatrix {
    let n = dataset.n();
    let numeric_cols = kind_positions(dataset.schema(), ColumnKind::Numeric);
    let categorical_cols = kind_positions(dataset.schema(), ColumnKind::Categorical);

    let d: usize = numeric_cols.len()
        + (0..dataset.categorical_count())
            .map(|j| dataset.categories(j).len())
            .sum::<usize>();
    let mut raw = Array2::zeros((n, d));
    let mut provenance = Vec::with_capacity(d);

    let mut out_j = 0;
    for (nj, &src) in numeric_cols.iter().enumerate() {
        for i in 0..n {
            raw[(i, out_j)] = dataset.numeric()[(i, nj)];
        }
        provenance.push(src);
        out_j += 1;
    }
    for (cj, &src) in categorical_cols.iter().enumerate() {
        let cats = dataset.categories(cj).len();
        for cat in 0..cats {
            for i in 0..n {
                raw[(i, out_j)] = if dataset.categorical()[(i, cj)] == cat as u32 {
                    1.0
                } else {
                    0.0
                };
            }
            provenance.push(src);
            out_j += 1;
        }
    }

    let (values, column_means, column_stds) = zscore_columns(raw.view());
    EncodedMatrix {
        values,
        column_means,
        column_stds,
        provenance,
    }
}
