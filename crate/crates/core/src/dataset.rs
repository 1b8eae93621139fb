//! Datasets, CSV I/O, synthetic generators and the budgeted label oracle.
//!
//! Strategies never receive a [`Dataset`] directly. They work through a
//! [`LabelOracle`], which exposes the feature matrix freely but reveals a
//! label only when it is queried, and counts each distinct index once.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, ValError};

/// Feature matrix plus hidden ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
}

impl Dataset {
    /// Builds a dataset after checking shape, finiteness and label range.
    /// The class count is `max(label) + 1`.
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, m) = features.dim();
        if n == 0 || m == 0 {
            return Err(ValError::shape(format!("dataset must be non-empty, got {n}x{m}")));
        }
        if labels.len() != n {
            return Err(ValError::shape(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ValError::MalformedInput {
                row: i + 1,
                message: format!("non-finite feature value {v} in column {}", j + 1),
            });
        }
        let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
        Ok(Dataset {
            features,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Ground-truth labels. Only the harness and tests should read these;
    /// strategies go through [`LabelOracle`].
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Per-column min-max scaling to [0, 1]. Constant columns map to 0.
    pub fn min_max_scaled(&self) -> Dataset {
        let mut features = self.features.clone();
        for mut col in features.columns_mut() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
        }
        Dataset {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    /// Lowest index of every class present, ordered by class id.
    pub fn first_index_per_class(&self) -> Vec<usize> {
        let mut first = vec![None; self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            first[y].get_or_insert(i);
        }
        first.into_iter().flatten().collect()
    }

    /// Writes `f1..fm,label` with floats at 17 significant digits.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("f{j}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for (row, y) in self.features.rows().into_iter().zip(&self.labels) {
            for v in row {
                write!(out, "{v:.16e},")?;
            }
            writeln!(out, "{y}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Which column of a CSV file holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// 1-based column index.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

impl FromStr for LabelColumn {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ValError::config("empty label column"));
        }
        match s.parse::<usize>() {
            Ok(0) => Err(ValError::config("label column index is 1-based")),
            Ok(i) => Ok(LabelColumn::Index(i)),
            Err(_) => Ok(LabelColumn::Name(s.to_string())),
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(s) => f.write_str(s),
        }
    }
}

fn split_row(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Loads a comma-separated file. A header row is detected when no cell of
/// the first non-empty row parses as a number. Labels are re-encoded to
/// `0..c` in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, label_column, &path.display().to_string())
}

pub(crate) fn parse_csv(text: &str, label_column: &LabelColumn, name: &str) -> Result<Dataset> {
    let mut rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, split_row(l)))
        .peekable();

    let Some((_, first)) = rows.peek() else {
        return Err(ValError::MalformedInput {
            row: 1,
            message: "empty file".into(),
        });
    };
    let has_header = first.iter().all(|c| c.parse::<f64>().is_err());
    let width = first.len();
    let header = if has_header { rows.next().map(|(_, h)| h) } else { None };

    let label_idx = match label_column {
        LabelColumn::Index(i) => {
            if *i > width {
                return Err(ValError::config(format!(
                    "label column {i} out of range for {width} columns"
                )));
            }
            i - 1
        }
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| ValError::config(format!("no label column named '{name}'")))?,
    };
    if width < 2 {
        return Err(ValError::config("need at least one feature column besides the label"));
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row_no, cells) in rows {
        if cells.len() != width {
            return Err(ValError::MalformedInput {
                row: row_no,
                message: format!("expected {width} cells, found {}", cells.len()),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            if j == label_idx {
                let id = match class_names.iter().position(|c| c == cell) {
                    Some(id) => id,
                    None => {
                        class_names.push(cell.to_string());
                        class_names.len() - 1
                    }
                };
                labels.push(id);
            } else {
                let v: f64 = cell.parse().map_err(|_| ValError::MalformedInput {
                    row: row_no,
                    message: format!("non-numeric feature '{cell}' in column {}", j + 1),
                })?;
                values.push(v);
            }
        }
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, width - 1), values)
        .map_err(|e| ValError::shape(e.to_string()))?;
    Dataset::new(name, features, labels)
}

/// Shape family for [`gen_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticShape {
    Blobs,
    Rings,
    Spirals,
}

impl FromStr for SyntheticShape {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "blobs" => Ok(SyntheticShape::Blobs),
            "rings" => Ok(SyntheticShape::Rings),
            "spirals" => Ok(SyntheticShape::Spirals),
            other => Err(ValError::config(format!("unknown shape '{other}'"))),
        }
    }
}

impl fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticShape::Blobs => "blobs",
            SyntheticShape::Rings => "rings",
            SyntheticShape::Spirals => "spirals",
        })
    }
}

/// Arguments of [`gen_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub shape: SyntheticShape,
    pub classes: usize,
    pub per_class: usize,
    /// Blobs: distance between adjacent class centers. Rings: gap between
    /// consecutive radii. Spirals: radial scale.
    pub separation: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Feature dimension. The class structure lives in the first two
    /// coordinates; any further coordinates carry noise only.
    pub dim: usize,
}

impl SyntheticSpec {
    pub fn blobs(classes: usize, per_class: usize, separation: f64, noise_std: f64, seed: u64) -> Self {
        SyntheticSpec {
            shape: SyntheticShape::Blobs,
            classes,
            per_class,
            separation,
            noise_std,
            seed,
            dim: 2,
        }
    }

    /// The generating center of class `k` (blobs only; other shapes have no
    /// single center and return the origin).
    pub fn class_center(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if self.shape == SyntheticShape::Blobs {
            let radius = self.separation / (2.0 * (PI / self.classes as f64).sin());
            let angle = 2.0 * PI * k as f64 / self.classes as f64;
            c[0] = radius * angle.cos();
            c[1] = radius * angle.sin();
        }
        c
    }
}

/// Deterministic 2-D (or `dim`-D) toy datasets with balanced classes,
/// laid out class by class.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.classes < 2 {
        return Err(ValError::config("need at least 2 classes"));
    }
    if spec.per_class < 1 {
        return Err(ValError::config("need at least 1 point per class"));
    }
    if spec.dim < 2 {
        return Err(ValError::config("synthetic data needs dim >= 2"));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(ValError::config("noise_std must be finite and >= 0"));
    }
    if !spec.separation.is_finite() {
        return Err(ValError::config("separation must be finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| ValError::config(e.to_string()))?;
    let n = spec.classes * spec.per_class;
    let mut features = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);

    for k in 0..spec.classes {
        let center = spec.class_center(k);
        for p in 0..spec.per_class {
            let i = k * spec.per_class + p;
            let (x, y) = match spec.shape {
                SyntheticShape::Blobs => (center[0], center[1]),
                SyntheticShape::Rings => {
                    let r = (k + 1) as f64 * spec.separation;
                    let a = rng.random_range(0.0..2.0 * PI);
                    (r * a.cos(), r * a.sin())
                }
                SyntheticShape::Spirals => {
                    let t: f64 = rng.random();
                    let r = spec.separation * (0.25 + t);
                    let a = 2.0 * PI * k as f64 / spec.classes as f64 + 3.0 * PI * t;
                    (r * a.cos(), r * a.sin())
                }
            };
            features[[i, 0]] = x + noise.sample(&mut rng);
            features[[i, 1]] = y + noise.sample(&mut rng);
            for j in 2..spec.dim {
                features[[i, j]] = noise.sample(&mut rng);
            }
            labels.push(k);
        }
    }
    let name = format!("{}-{}x{}", spec.shape, spec.classes, spec.per_class);
    Dataset::new(name, features, labels)
}

/// Reveals labels on request and counts distinct indices queried.
///
/// Not `Sync`-shared: one oracle per experiment cell.
#[derive(Debug)]
pub struct LabelOracle<'a> {
    dataset: &'a Dataset,
    revealed: Vec<bool>,
    queries_used: usize,
    budget: Option<usize>,
}

impl<'a> LabelOracle<'a> {
    pub fn new(dataset: &'a Dataset, budget: Option<usize>) -> Self {
        LabelOracle {
            dataset,
            revealed: vec![false; dataset.len()],
            queries_used: 0,
            budget,
        }
    }

    /// Features are public; labels are not.
    pub fn features(&self) -> ArrayView2<'a, f64> {
        self.dataset.features()
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.dataset.num_classes()
    }

    pub fn queries_used(&self) -> usize {
        self.queries_used
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn is_revealed(&self, index: usize) -> bool {
        self.revealed.get(index).copied().unwrap_or(false)
    }

    /// Returns the label of `index`, charging the budget on first access only.
    pub fn query(&mut self, index: usize) -> Result<usize> {
        if index >= self.dataset.len() {
            return Err(ValError::shape(format!(
                "query index {index} out of range for {} points",
                self.dataset.len()
            )));
        }
        if !self.revealed[index] {
            if let Some(budget) = self.budget {
                if self.queries_used >= budget {
                    return Err(ValError::BudgetExceeded { budget });
                }
            }
            self.revealed[index] = true;
            self.queries_used += 1;
        }
        Ok(self.dataset.labels[index])
    }
}
