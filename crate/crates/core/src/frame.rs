//! Column-typed tabular data and the preprocessing chain: sparse-column
//! filtering, median/mode imputation, label and one-hot encoding, scaling
//! and stratified splitting.
//!
//! A [`Frame`] never changes after construction. Every operation here
//! returns a new frame. The fitted pieces (imputer fills, encoder
//! categories, scaler statistics) are kept as values so the same
//! transformation can be replayed on unseen data.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Missing cells hold NaN.
    Numeric(Vec<f64>),
    /// Missing cells hold the empty string.
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    data: ColumnData,
    missing: Vec<bool>,
}

impl Column {
    /// Numeric column from optional cells. Observed cells must be finite.
    pub fn numeric(cells: Vec<Option<f64>>) -> Result<Self> {
        let mut values = Vec::with_capacity(cells.len());
        let mut missing = Vec::with_capacity(cells.len());
        for (i, c) in cells.into_iter().enumerate() {
            match c {
                Some(v) if !v.is_finite() => {
                    return Err(Error::data(format!("non-finite numeric value at row {i}")));
                }
                Some(v) => {
                    values.push(v);
                    missing.push(false);
                }
                None => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        Ok(Column { data: ColumnData::Numeric(values), missing })
    }

    /// Fully observed numeric column.
    pub fn dense(values: Vec<f64>) -> Result<Self> {
        Column::numeric(values.into_iter().map(Some).collect())
    }

    pub fn categorical(cells: Vec<Option<String>>) -> Self {
        let missing = cells.iter().map(Option::is_none).collect();
        let values = cells.into_iter().map(Option::unwrap_or_default).collect();
        Column { data: ColumnData::Categorical(values), missing }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn null_fraction(&self) -> f64 {
        if self.missing.is_empty() {
            return 0.0;
        }
        self.missing_count() as f64 / self.missing.len() as f64
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical(v) => Some(v),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Cell as an optional value, for rendering.
    pub fn cell_text(&self, row: usize) -> Option<String> {
        if self.missing[row] {
            return None;
        }
        Some(match &self.data {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical(v) => v[row].clone(),
        })
    }

    fn select(&self, idx: &[usize]) -> Column {
        let missing = idx.iter().map(|&i| self.missing[i]).collect();
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(idx.iter().map(|&i| v[i].clone()).collect()),
        };
        Column { data, missing }
    }
}

/// Integer-encoded class labels with lexicographically ordered names.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTarget {
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl EncodedTarget {
    pub fn new(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::data("target needs at least two classes"));
        }
        if class_names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("class names must be strictly increasing"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::data(format!("label {bad} out of range")));
        }
        Ok(EncodedTarget { labels, class_names })
    }

    /// Encodes raw category strings; classes are sorted lexicographically.
    pub fn from_categories(values: &[String]) -> Result<Self> {
        let mut names: Vec<String> = values.to_vec();
        names.sort();
        names.dedup();
        let labels = values.iter().map(|v| names.binary_search(v).unwrap()).collect();
        EncodedTarget::new(labels, names)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn select(&self, idx: &[usize]) -> EncodedTarget {
        EncodedTarget {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
    target: Option<EncodedTarget>,
}

impl Frame {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension { expected: names.len(), got: columns.len() });
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (name, col) in names.iter().zip(&columns) {
            if name.is_empty() {
                return Err(Error::data("empty column name"));
            }
            if col.len() != n_rows {
                return Err(Error::data(format!(
                    "column '{name}' has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
        }
        let mut sorted: Vec<&String> = names.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::data(format!("duplicate column name '{}'", w[0])));
        }
        Ok(Frame { names, columns, n_rows, target: None })
    }

    /// Numeric frame from a dense matrix.
    pub fn from_matrix(names: Vec<String>, x: &Matrix) -> Result<Self> {
        if names.len() != x.cols() {
            return Err(Error::Dimension { expected: x.cols(), got: names.len() });
        }
        let columns = (0..x.cols()).map(|j| Column::dense(x.column(j))).collect::<Result<Vec<_>>>()?;
        let mut f = Frame::new(names, columns)?;
        f.n_rows = x.rows();
        Ok(f)
    }

    pub fn with_target(mut self, target: EncodedTarget) -> Result<Self> {
        if target.labels.len() != self.n_rows {
            return Err(Error::Dimension { expected: self.n_rows, got: target.labels.len() });
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn without_target(mut self) -> Self {
        self.target = None;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn target(&self) -> Option<&EncodedTarget> {
        self.target.as_ref()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.position(name).map(|i| &self.columns[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn require_target(&self) -> Result<&EncodedTarget> {
        self.target.as_ref().ok_or_else(|| Error::data("frame has no target"))
    }

    /// Dense feature matrix. Fails on categorical or missing cells.
    pub fn feature_matrix(&self) -> Result<Matrix> {
        let mut x = Matrix::zeros(self.n_rows, self.columns.len());
        for (j, (name, col)) in self.names.iter().zip(&self.columns).enumerate() {
            let v = col
                .as_numeric()
                .ok_or_else(|| Error::data(format!("column '{name}' is categorical")))?;
            if col.missing_count() > 0 {
                return Err(Error::data(format!("column '{name}' has missing values")));
            }
            for (i, &val) in v.iter().enumerate() {
                x[(i, j)] = val;
            }
        }
        Ok(x)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Frame {
        Frame {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            n_rows: idx.len(),
            target: self.target.as_ref().map(|t| t.select(idx)),
        }
    }

    pub fn select_columns(&self, keep: &[usize]) -> Frame {
        Frame {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            n_rows: self.n_rows,
            target: self.target.clone(),
        }
    }

    /// Removes a column and returns it alongside the remaining frame.
    pub fn take_column(&self, name: &str) -> Result<(Frame, Column)> {
        let pos = self.position(name).ok_or_else(|| Error::data(format!("unknown column '{name}'")))?;
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| j != pos).collect();
        Ok((self.select_columns(&keep), self.columns[pos].clone()))
    }
}

// ---------------------------------------------------------------------------
// Sparse-column filtering

/// Names of columns whose null fraction is strictly above `threshold`.
pub fn sparse_columns(f: &Frame, threshold: f64) -> Vec<String> {
    f.names
        .iter()
        .zip(&f.columns)
        .filter(|(_, c)| c.null_fraction() > threshold)
        .map(|(n, _)| n.clone())
        .collect()
}

/// Keeps the columns with `null_fraction <= threshold`, in order.
pub fn drop_sparse_features(f: &Frame, threshold: f64) -> Result<Frame> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(format!("null threshold {threshold} outside (0, 1]")));
    }
    let keep: Vec<usize> = (0..f.n_cols()).filter(|&j| f.columns[j].null_fraction() <= threshold).collect();
    if keep.is_empty() {
        return Err(Error::data("all features sparse"));
    }
    Ok(f.select_columns(&keep))
}

// ---------------------------------------------------------------------------
// Imputation

#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Numeric(f64),
    Categorical(String),
}

/// Per-column fill values learned from observed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub fills: Vec<(String, Fill)>,
}

pub fn fit_imputer(f: &Frame) -> Result<Imputer> {
    let mut fills = Vec::with_capacity(f.n_cols());
    for (name, col) in f.names.iter().zip(&f.columns) {
        if f.n_rows > 0 && col.missing_count() == f.n_rows {
            return Err(Error::data(format!("column '{name}' is entirely missing")));
        }
        let fill = match &col.data {
            ColumnData::Numeric(v) => {
                let mut obs: Vec<f64> =
                    v.iter().zip(&col.missing).filter(|(_, &m)| !m).map(|(&x, _)| x).collect();
                Fill::Numeric(median(&mut obs))
            }
            ColumnData::Categorical(v) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for (s, &m) in v.iter().zip(&col.missing) {
                    if !m {
                        *counts.entry(s.as_str()).or_default() += 1;
                    }
                }
                // BTreeMap iterates in lexicographic order and max_by_key keeps
                // the last maximum, so reverse to prefer the smallest key.
                let mode = counts.iter().rev().max_by_key(|(_, &c)| c).map(|(s, _)| s.to_string()).unwrap_or_default();
                Fill::Categorical(mode)
            }
        };
        fills.push((name.clone(), fill));
    }
    Ok(Imputer { fills })
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Imputer {
    /// Fills missing cells of every column this imputer knows about.
    /// Columns it does not know are passed through untouched.
    pub fn apply(&self, f: &Frame) -> Result<Frame> {
        let mut columns = Vec::with_capacity(f.n_cols());
        for (name, col) in f.names.iter().zip(&f.columns) {
            let Some((_, fill)) = self.fills.iter().find(|(n, _)| n == name) else {
                columns.push(col.clone());
                continue;
            };
            let data = match (&col.data, fill) {
                (ColumnData::Numeric(v), Fill::Numeric(x)) => ColumnData::Numeric(
                    v.iter().zip(&col.missing).map(|(&a, &m)| if m { *x } else { a }).collect(),
                ),
                (ColumnData::Categorical(v), Fill::Categorical(x)) => ColumnData::Categorical(
                    v.iter().zip(&col.missing).map(|(a, &m)| if m { x.clone() } else { a.clone() }).collect(),
                ),
                _ => return Err(Error::data(format!("column '{name}' changed kind since the imputer was fitted"))),
            };
            columns.push(Column { data, missing: vec![false; col.len()] });
        }
        Ok(Frame { names: f.names.clone(), columns, n_rows: f.n_rows, target: f.target.clone() })
    }
}

/// Median for numeric columns, mode (lexicographically smallest on ties)
/// for categorical ones.
pub fn impute(f: &Frame) -> Result<Frame> {
    fit_imputer(f)?.apply(f)
}

// ---------------------------------------------------------------------------
// Encoding

/// Fitted label encoding for the target plus one-hot groups for the
/// categorical features.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub target: String,
    pub class_names: Vec<String>,
    /// (original column, sorted categories) for each one-hot group.
    pub groups: Vec<(String, Vec<String>)>,
}

pub fn fit_encoder(f: &Frame, target_name: &str) -> Result<Encoder> {
    let col = f.column(target_name).ok_or_else(|| Error::data(format!("unknown target column '{target_name}'")))?;
    let values = col
        .as_categorical()
        .ok_or_else(|| Error::data(format!("target column '{target_name}' is not categorical")))?;
    if col.missing_count() > 0 {
        return Err(Error::data(format!("target column '{target_name}' has missing values")));
    }
    let class_names = EncodedTarget::from_categories(values)?.class_names;
    let mut groups = Vec::new();
    for (name, c) in f.names.iter().zip(&f.columns) {
        if name == target_name {
            continue;
        }
        if let Some(v) = c.as_categorical() {
            let mut cats: Vec<String> =
                v.iter().zip(&c.missing).filter(|(_, &m)| !m).map(|(s, _)| s.clone()).collect();
            cats.sort();
            cats.dedup();
            groups.push((name.clone(), cats));
        }
    }
    Ok(Encoder { target: target_name.to_string(), class_names, groups })
}

impl Encoder {
    /// Applies the encoding. The target column is optional here so the
    /// encoder can be replayed on unlabeled rows; unseen feature
    /// categories produce an all-zero group and unseen target classes are
    /// an error.
    pub fn apply(&self, f: &Frame) -> Result<Frame> {
        let mut names = Vec::new();
        let mut columns = Vec::new();
        let mut target = None;
        for (name, col) in f.names.iter().zip(&f.columns) {
            if *name == self.target {
                let values = col
                    .as_categorical()
                    .ok_or_else(|| Error::data(format!("target column '{name}' is not categorical")))?;
                let mut labels = Vec::with_capacity(values.len());
                for (i, v) in values.iter().enumerate() {
                    if col.missing[i] {
                        return Err(Error::data(format!("target missing at row {i}")));
                    }
                    let l = self
                        .class_names
                        .binary_search(v)
                        .map_err(|_| Error::data(format!("unknown target class '{v}' at row {i}")))?;
                    labels.push(l);
                }
                target = Some(EncodedTarget::new(labels, self.class_names.clone())?);
                continue;
            }
            match (&col.data, self.groups.iter().find(|(g, _)| g == name)) {
                (ColumnData::Categorical(values), Some((_, cats))) => {
                    for cat in cats {
                        names.push(format!("{name}={cat}"));
                        let cells = values
                            .iter()
                            .zip(&col.missing)
                            .map(|(v, &m)| if m { None } else { Some(if v == cat { 1.0 } else { 0.0 }) })
                            .collect();
                        columns.push(Column::numeric(cells)?);
                    }
                }
                (ColumnData::Categorical(_), None) => {
                    return Err(Error::data(format!("categorical column '{name}' unknown to the encoder")));
                }
                (ColumnData::Numeric(_), _) => {
                    names.push(name.clone());
                    columns.push(col.clone());
                }
            }
        }
        let mut out = Frame::new(names, columns)?;
        out.n_rows = f.n_rows;
        match target {
            Some(t) => out.with_target(t),
            None => Ok(out),
        }
    }
}

/// Label-encodes `target_name` and one-hot encodes every other
/// categorical column.
pub fn encode(f: &Frame, target_name: &str) -> Result<Frame> {
    let enc = fit_encoder(f, target_name)?;
    let out = enc.apply(f)?;
    out.require_target()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scaling

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalerMode {
    ZScore,
    MinMax,
}

/// Per-column location and scale. Scale is always positive; constant
/// columns get scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub mode: ScalerMode,
    pub columns: Vec<String>,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

pub fn fit_scaler(f: &Frame, mode: ScalerMode) -> Result<ScalerParams> {
    let x = f.feature_matrix()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::data("cannot fit a scaler on zero rows"));
    }
    let mut location = Vec::with_capacity(x.cols());
    let mut scale = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let col = x.column(j);
        let (loc, s) = match mode {
            ScalerMode::ZScore => {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                (mean, math::sqrt(var))
            }
            ScalerMode::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        location.push(loc);
        scale.push(if s > 0.0 { s } else { 1.0 });
    }
    Ok(ScalerParams { mode, columns: f.names.clone(), location, scale })
}

impl ScalerParams {
    fn check(&self, f: &Frame) -> Result<()> {
        if f.names != self.columns {
            return Err(Error::data(format!(
                "scaler was fitted on {} columns that do not match the frame's {} columns",
                self.columns.len(),
                f.n_cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, f: &Frame) -> Result<Frame> {
        self.check(f)?;
        let mut x = f.feature_matrix()?;
        self.apply_matrix(&mut x);
        self.rebuild(f, &x)
    }

    pub fn inverse(&self, f: &Frame) -> Result<Frame> {
        self.check(f)?;
        let mut x = f.feature_matrix()?;
        for i in 0..x.rows() {
            for (j, v) in x.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.location[j];
            }
        }
        self.rebuild(f, &x)
    }

    pub fn apply_matrix(&self, x: &mut Matrix) {
        for i in 0..x.rows() {
            for (j, v) in x.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.location[j]) / self.scale[j];
            }
        }
    }

    fn rebuild(&self, f: &Frame, x: &Matrix) -> Result<Frame> {
        let out = Frame::from_matrix(f.names.clone(), x)?;
        match &f.target {
            Some(t) => out.with_target(t.clone()),
            None => Ok(out),
        }
    }
}

pub fn apply_scaler(f: &Frame, p: &ScalerParams) -> Result<Frame> {
    p.apply(f)
}

// ---------------------------------------------------------------------------
// Stratified split

/// Train/test row indices, each sorted ascending.
///
/// Per class the train count is the rounded quota with a largest-remainder
/// correction so that the train total equals `round(fraction * n)`.
pub fn stratified_indices(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < 2 {
            return Err(Error::data(format!("class {c} has fewer than 2 rows")));
        }
    }

    let total = math::round(train_fraction * labels.len() as f64) as usize;
    let quotas: Vec<f64> = members.iter().map(|m| train_fraction * m.len() as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|&q| math::floor(q) as usize).collect();
    let mut order: Vec<usize> = (0..n_classes).filter(|&c| !members[c].is_empty()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if counts[c] < members[c].len() {
            counts[c] += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(labels.len() - total);
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        train.extend_from_slice(&m[..counts[c]]);
        test.extend_from_slice(&m[counts[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified train/test split of a labeled frame.
pub fn split(f: &Frame, train_fraction: f64, seed: u64) -> Result<(Frame, Frame)> {
    let t = f.require_target()?;
    let (train, test) = stratified_indices(&t.labels, t.n_classes(), train_fraction, seed)?;
    Ok((f.select_rows(&train), f.select_rows(&test)))
}
