//! Tabular samples: schema, CSV ingestion and emission, deduplication,
//! train/test splitting and MCAR missingness injection.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;
use crate::nn::Points;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn discrete(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Discrete,
        }
    }
}

/// Ordered column list. Each column also knows its slot inside the
/// continuous or the discrete block of a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
    slots: Vec<usize>,
    n_continuous: usize,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("at least one column is required".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
        }
        let mut slots = Vec::with_capacity(columns.len());
        let (mut nc, mut nd) = (0, 0);
        for c in &columns {
            match c.kind {
                ColumnKind::Continuous => {
                    slots.push(nc);
                    nc += 1;
                }
                ColumnKind::Discrete => {
                    slots.push(nd);
                    nd += 1;
                }
            }
        }
        Ok(Schema {
            columns,
            slots,
            n_continuous: nc,
        })
    }

    /// All-continuous schema from column names.
    pub fn continuous<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Schema::new(names.iter().map(|n| Column::continuous(n.as_ref())).collect())
    }

    /// Reads a JSON list of `{"name": ..., "kind": "continuous" | "discrete"}`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Schema::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cols: Vec<Column> =
            serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        Schema::new(cols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.columns).expect("schema serializes")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn n_continuous(&self) -> usize {
        self.n_continuous
    }

    pub fn n_discrete(&self) -> usize {
        self.columns.len() - self.n_continuous
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Slot of column `j` inside its kind's block.
    pub fn slot(&self, j: usize) -> usize {
        self.slots[j]
    }

    /// Schema indices of the continuous columns, in order.
    pub fn continuous_indices(&self) -> Vec<usize> {
        self.kind_indices(ColumnKind::Continuous)
    }

    pub fn discrete_indices(&self) -> Vec<usize> {
        self.kind_indices(ColumnKind::Discrete)
    }

    fn kind_indices(&self, kind: ColumnKind) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(j, _)| j)
            .collect()
    }
}

/// A rectangular sample with continuous values, discrete category codes and
/// a per-cell missingness mask.
///
/// Continuous cells are stored row-major in an `n × d_c` block and discrete
/// codes in an `n × d_d` block; the mask is `n × d` in schema order. Masked
/// cells hold `NaN` (continuous) or code 0 (discrete) so that equal rows have
/// equal bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    n_rows: usize,
    continuous: Vec<f64>,
    discrete: Vec<u32>,
    missing: Vec<bool>,
    labels: Vec<Vec<String>>,
}

impl Dataset {
    pub fn from_parts(
        schema: Schema,
        n_rows: usize,
        mut continuous: Vec<f64>,
        mut discrete: Vec<u32>,
        missing: Vec<bool>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        let (dc, dd, d) = (schema.n_continuous(), schema.n_discrete(), schema.len());
        if continuous.len() != n_rows * dc
            || discrete.len() != n_rows * dd
            || missing.len() != n_rows * d
            || labels.len() != dd
        {
            return Err(Error::Dimension(format!(
                "dataset blocks do not match {} rows x ({} continuous, {} discrete)",
                n_rows, dc, dd
            )));
        }
        for i in 0..n_rows {
            for j in 0..d {
                let s = schema.slot(j);
                let miss = missing[i * d + j];
                match schema.columns[j].kind {
                    ColumnKind::Continuous => {
                        let v = &mut continuous[i * dc + s];
                        if miss {
                            *v = f64::NAN;
                        } else if !v.is_finite() {
                            return Err(Error::NonFinite { row: i, col: j });
                        }
                    }
                    ColumnKind::Discrete => {
                        let c = &mut discrete[i * dd + s];
                        if miss {
                            *c = 0;
                        } else if (*c as usize) >= labels[s].len() {
                            return Err(Error::InvalidArgument(format!(
                                "code {} out of range for column {:?}",
                                c, schema.columns[j].name
                            )));
                        }
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            n_rows,
            continuous,
            discrete,
            missing,
            labels,
        })
    }

    /// Complete, all-continuous dataset from row-major values.
    pub fn from_continuous<S: AsRef<str>>(names: &[S], values: Vec<f64>) -> Result<Self> {
        let schema = Schema::continuous(names)?;
        let d = schema.len();
        if values.len() % d != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not fill rows of width {}",
                values.len(),
                d
            )));
        }
        let n = values.len() / d;
        Dataset::from_parts(schema, n, values, Vec::new(), vec![false; n * d], Vec::new())
    }

    /// Complete, all-continuous dataset from rows; columns are named `x1, x2, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(Error::Empty("no rows or zero-width rows".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let names: Vec<String> = (1..=d).map(|j| format!("x{}", j)).collect();
        Dataset::from_continuous(&names, rows.concat())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn d_continuous(&self) -> usize {
        self.schema.n_continuous()
    }

    pub fn d_discrete(&self) -> usize {
        self.schema.n_discrete()
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn continuous_row(&self, i: usize) -> &[f64] {
        let dc = self.d_continuous();
        &self.continuous[i * dc..(i + 1) * dc]
    }

    pub fn discrete_row(&self, i: usize) -> &[u32] {
        let dd = self.d_discrete();
        &self.discrete[i * dd..(i + 1) * dd]
    }

    pub fn missing_row(&self, i: usize) -> &[bool] {
        let d = self.schema.len();
        &self.missing[i * d..(i + 1) * d]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.schema.len() + col]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Whether any discrete cell is missing.
    pub fn has_missing_discrete(&self) -> bool {
        let idx = self.schema.discrete_indices();
        (0..self.n_rows).any(|i| idx.iter().any(|&j| self.is_missing(i, j)))
    }

    /// Values of continuous slot `s` with their missing flags.
    pub fn continuous_column(&self, s: usize) -> (Vec<f64>, Vec<bool>) {
        let dc = self.d_continuous();
        let j = self.schema.continuous_indices()[s];
        let vals = (0..self.n_rows).map(|i| self.continuous[i * dc + s]).collect();
        let mask = (0..self.n_rows).map(|i| self.is_missing(i, j)).collect();
        (vals, mask)
    }

    pub fn continuous_values(&self) -> &[f64] {
        &self.continuous
    }

    pub fn discrete_values(&self) -> &[u32] {
        &self.discrete
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    /// The continuous block as a point set; fails if any continuous cell is missing.
    pub fn continuous_points(&self) -> Result<Points> {
        for (s, &j) in self.schema.continuous_indices().iter().enumerate() {
            if (0..self.n_rows).any(|i| self.is_missing(i, j)) {
                return Err(Error::MissingValues(format!(
                    "continuous column {:?} (slot {})",
                    self.schema.columns[j].name, s
                )));
            }
        }
        Points::new(self.continuous.clone(), self.d_continuous())
    }

    /// Same rows and discrete part, continuous block replaced.
    pub fn with_continuous(&self, values: Vec<f64>) -> Result<Dataset> {
        Dataset::from_parts(
            self.schema.clone(),
            self.n_rows,
            values,
            self.discrete.clone(),
            self.missing.clone(),
            self.labels.clone(),
        )
    }

    /// Rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let (dc, dd, d) = (self.d_continuous(), self.d_discrete(), self.schema.len());
        let mut continuous = Vec::with_capacity(idx.len() * dc);
        let mut discrete = Vec::with_capacity(idx.len() * dd);
        let mut missing = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            continuous.extend_from_slice(self.continuous_row(i));
            discrete.extend_from_slice(self.discrete_row(i));
            missing.extend_from_slice(self.missing_row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            n_rows: idx.len(),
            continuous,
            discrete,
            missing,
            labels: self.labels.clone(),
        }
    }

    /// Projection onto the named columns, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("no columns selected".into()));
        }
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let j = self
                .schema
                .index_of(n.as_ref())
                .ok_or_else(|| Error::UnknownColumn(n.as_ref().to_string()))?;
            cols.push(j);
        }
        let schema = Schema::new(cols.iter().map(|&j| self.schema.columns[j].clone()).collect())?;
        let (dc, dd) = (self.d_continuous(), self.d_discrete());
        let mut continuous = Vec::new();
        let mut discrete = Vec::new();
        let mut missing = Vec::new();
        for i in 0..self.n_rows {
            for &j in &cols {
                let s = self.schema.slot(j);
                match self.schema.columns[j].kind {
                    ColumnKind::Continuous => continuous.push(self.continuous[i * dc + s]),
                    ColumnKind::Discrete => discrete.push(self.discrete[i * dd + s]),
                }
                missing.push(self.is_missing(i, j));
            }
        }
        let labels = cols
            .iter()
            .filter(|&&j| self.schema.columns[j].kind == ColumnKind::Discrete)
            .map(|&j| self.labels[self.schema.slot(j)].clone())
            .collect();
        Dataset::from_parts(schema, self.n_rows, continuous, discrete, missing, labels)
    }

    /// Re-express `other`'s discrete codes against this dataset's label
    /// lists (labels unknown here are appended). Schemas must match.
    pub fn align_labels(&self, other: &Dataset) -> Result<Dataset> {
        if self.schema != other.schema {
            return Err(Error::Schema("datasets have different schemas".into()));
        }
        let mut labels = self.labels.clone();
        let mut maps: Vec<Vec<u32>> = Vec::with_capacity(labels.len());
        for (s, other_labels) in other.labels.iter().enumerate() {
            let mut map = Vec::with_capacity(other_labels.len());
            for l in other_labels {
                let code = match labels[s].iter().position(|x| x == l) {
                    Some(c) => c,
                    None => {
                        labels[s].push(l.clone());
                        labels[s].len() - 1
                    }
                };
                map.push(code as u32);
            }
            maps.push(map);
        }
        let dd = other.d_discrete();
        let discrete = other
            .discrete
            .iter()
            .enumerate()
            .map(|(k, &c)| maps[k % dd.max(1)][c as usize])
            .collect();
        Dataset::from_parts(
            other.schema.clone(),
            other.n_rows,
            other.continuous.clone(),
            discrete,
            other.missing.clone(),
            labels,
        )
    }

    fn row_key(&self, i: usize) -> (Vec<u64>, Vec<u32>, Vec<bool>) {
        (
            self.continuous_row(i).iter().map(|v| v.to_bits()).collect(),
            self.discrete_row(i).to_vec(),
            self.missing_row(i).to_vec(),
        )
    }

    /// Writes the dataset as CSV: header in schema order, continuous values at
    /// 17 significant digits, discrete cells as labels, masked cells as `missing_token`.
    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))
            .map_err(|e| Error::Csv(e.to_string()))?;
        let (dc, dd) = (self.d_continuous(), self.d_discrete());
        let mut record: Vec<String> = Vec::with_capacity(self.schema.len());
        for i in 0..self.n_rows {
            record.clear();
            for (j, col) in self.schema.columns.iter().enumerate() {
                let s = self.schema.slot(j);
                if self.is_missing(i, j) {
                    record.push(missing_token.to_string());
                    continue;
                }
                record.push(match col.kind {
                    ColumnKind::Continuous => g17(self.continuous[i * dc + s]),
                    ColumnKind::Discrete => {
                        self.labels[s][self.discrete[i * dd + s] as usize].clone()
                    }
                });
            }
            w.write_record(&record).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file), missing_token)
    }
}

/// Loads a CSV file. Header names must match the schema as a set; the
/// resulting columns follow schema order.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, missing_token: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema, missing_token)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema, missing_token: &str) -> Result<Dataset> {
    let (header, rows) = read_raw(reader)?;
    let d = schema.len();
    if header.len() != d {
        return Err(Error::HeaderMismatch(format!(
            "file has {} columns, schema has {}",
            header.len(),
            d
        )));
    }
    let mut file_col = Vec::with_capacity(d);
    for c in schema.columns() {
        let pos = header
            .iter()
            .position(|h| h == &c.name)
            .ok_or_else(|| Error::HeaderMismatch(format!("column {:?} not in header", c.name)))?;
        file_col.push(pos);
    }

    let n = rows.len();
    let (dc, dd) = (schema.n_continuous(), schema.n_discrete());
    let mut continuous = vec![0.0; n * dc];
    let mut discrete = vec![0u32; n * dd];
    let mut missing = vec![false; n * d];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); dd];
    let mut lookup: Vec<HashMap<String, u32>> = vec![HashMap::new(); dd];

    for (i, row) in rows.iter().enumerate() {
        for (j, col) in schema.columns().iter().enumerate() {
            let cell = row[file_col[j]].as_str();
            let s = schema.slot(j);
            if cell == missing_token {
                missing[i * d + j] = true;
                continue;
            }
            match col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                        row: i + 1,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    continuous[i * dc + s] = v;
                }
                ColumnKind::Discrete => {
                    let code = *lookup[s].entry(cell.to_string()).or_insert_with(|| {
                        labels[s].push(cell.to_string());
                        (labels[s].len() - 1) as u32
                    });
                    discrete[i * dd + s] = code;
                }
            }
        }
    }
    Dataset::from_parts(schema.clone(), n, continuous, discrete, missing, labels)
}

/// Guesses a schema from a CSV file: a column is continuous when every
/// non-missing cell parses as a finite number, discrete otherwise.
pub fn infer_schema(path: impl AsRef<Path>, missing_token: &str) -> Result<Schema> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (header, rows) = read_raw(file)?;
    let cols = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let numeric = rows.iter().all(|r| {
                let c = r[j].as_str();
                c == missing_token || c.trim().parse::<f64>().is_ok_and(f64::is_finite)
            });
            Column {
                name: name.clone(),
                kind: if numeric {
                    ColumnKind::Continuous
                } else {
                    ColumnKind::Discrete
                },
            }
        })
        .collect();
    Schema::new(cols)
}

fn read_raw<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("no header row".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Keeps the first occurrence of each exactly repeated row (bit-equal
/// continuous values, equal codes, equal masks).
pub fn dedup_rows(ds: &Dataset) -> Dataset {
    let mut seen = HashSet::with_capacity(ds.n_rows());
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| seen.insert(ds.row_key(i)))
        .collect();
    if keep.len() == ds.n_rows() {
        return ds.clone();
    }
    ds.select_rows(&keep)
}

/// Random half split: train receives `ceil(n/2)` rows. Rows keep their
/// original relative order within each part.
pub fn split_half(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows to split, got {}",
            n
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, "split", &[]));
    let n_train = n.div_ceil(2);
    let (a, b) = idx.split_at_mut(n_train);
    a.sort_unstable();
    b.sort_unstable();
    Ok((ds.select_rows(a), ds.select_rows(b)))
}

/// Flags each cell of the named columns missing with probability `p`.
/// Cell (i, j) is missing when a uniform keyed by `(seed, j, i)` falls below
/// `p`, so masks for increasing `p` are nested and column order is irrelevant.
pub fn inject_mcar<S: AsRef<str>>(ds: &Dataset, p: f64, columns: &[S], seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("missing probability {} not in [0,1]", p)));
    }
    let mut targets = Vec::with_capacity(columns.len());
    for c in columns {
        targets.push(
            ds.schema
                .index_of(c.as_ref())
                .ok_or_else(|| Error::UnknownColumn(c.as_ref().to_string()))?,
        );
    }
    let d = ds.schema.len();
    let mut missing = ds.missing.clone();
    for &j in &targets {
        for i in 0..ds.n_rows {
            if seed::uniform(seed, "mcar", &[j as u64, i as u64]) < p {
                missing[i * d + j] = true;
            }
        }
    }
    Dataset::from_parts(
        ds.schema.clone(),
        ds.n_rows,
        ds.continuous.clone(),
        ds.discrete.clone(),
        missing,
        ds.labels.clone(),
    )
}

/// Fraction of rows without any missing cell (1 for an empty dataset).
pub fn complete_fraction(ds: &Dataset) -> f64 {
    if ds.n_rows() == 0 {
        return 1.0;
    }
    let complete = (0..ds.n_rows())
        .filter(|&i| !ds.missing_row(i).iter().any(|&m| m))
        .count();
    complete as f64 / ds.n_rows() as f64
}
