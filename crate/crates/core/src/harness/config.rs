//! Flat `key = value` experiment configuration with dotted section keys.
//!
//! ```text
//! # 3-blob comparison
//! data.source = synthetic
//! data.shape = blobs
//! data.classes = 3
//! data.per_class = 50
//! kernel.kind = rbf
//! kernel.gamma = auto
//! sparsify.mu = 0.1
//! strategies = val, random, ted, margin
//! budgets = 3, 5, 10
//! repeats = 5
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::dataset::{gen_synthetic, load_csv, Dataset, LabelColumn, SyntheticShape, SyntheticSpec};
use crate::error::{Result, ValError};
use crate::kernel::{KernelKind, KernelSpec};
use crate::represent::{EmInit, EmParams};
use crate::sparsify::SparsifyParams;
use crate::strategies::StrategyName;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label_column: LabelColumn },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, label_column } => load_csv(path, label_column),
            DataSource::Synthetic(spec) => gen_synthetic(spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    /// Median heuristic on the loaded (and possibly scaled) features.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub kernel_kind: KernelKind,
    pub gamma: GammaChoice,
    pub sparsify: SparsifyParams,
    pub em: EmParams,
    pub lambda: f64,
    pub strategies: Vec<StrategyName>,
    pub budgets: Vec<usize>,
    pub repeats: usize,
    pub master_seed: u64,
    pub scale_features: bool,
    /// Measure error only on points outside the training set.
    pub holdout_only: bool,
    /// Write measured wall times into the curve; when off the `wall_ms`
    /// column is 0 and the CSV is byte-reproducible.
    pub record_wall_time: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::blobs(3, 50, 10.0, 1.0, 0)),
            kernel_kind: KernelKind::Rbf,
            gamma: GammaChoice::Auto,
            sparsify: SparsifyParams::default(),
            em: EmParams::default(),
            lambda: crate::classifier::DEFAULT_LAMBDA,
            strategies: StrategyName::ALL.to_vec(),
            budgets: vec![3, 5, 10, 20],
            repeats: 5,
            master_seed: 0,
            scale_features: false,
            holdout_only: false,
            record_wall_time: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ValError::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ValError::config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_list<T, F>(value: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        // relative data paths are resolved against the config file
        if let DataSource::Csv { path: data, .. } = &mut config.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut source = "synthetic".to_string();
        let mut csv_path: Option<PathBuf> = None;
        let mut label_column = LabelColumn::default();
        let mut synth = SyntheticSpec::blobs(3, 50, 10.0, 1.0, 0);

        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ValError::config(format!("line {}: expected key = value", line_no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "data.source" => source = value.to_string(),
                "data.path" => csv_path = Some(PathBuf::from(value)),
                "data.label_col" => label_column = value.parse()?,
                "data.shape" => synth.shape = value.parse::<SyntheticShape>()?,
                "data.classes" => synth.classes = parse_num(key, value)?,
                "data.per_class" => synth.per_class = parse_num(key, value)?,
                "data.separation" => synth.separation = parse_num(key, value)?,
                "data.noise_std" => synth.noise_std = parse_num(key, value)?,
                "data.seed" => synth.seed = parse_num(key, value)?,
                "data.dim" => synth.dim = parse_num(key, value)?,
                "kernel.kind" => c.kernel_kind = value.parse()?,
                "kernel.gamma" => {
                    c.gamma = if value == "auto" {
                        GammaChoice::Auto
                    } else {
                        GammaChoice::Fixed(parse_num(key, value)?)
                    }
                }
                "sparsify.mu" => c.sparsify.mu = parse_num(key, value)?,
                "sparsify.target_fraction" => c.sparsify.target_fraction = parse_num(key, value)?,
                "sparsify.variant" => c.sparsify.score_variant = value.parse()?,
                "em.tol" => c.em.tol = parse_num(key, value)?,
                "em.max_iter" => c.em.max_iter = parse_num(key, value)?,
                "em.init" => c.em.init = value.parse::<EmInit>()?,
                "classifier.lambda" | "lambda" => c.lambda = parse_num(key, value)?,
                "strategies" => c.strategies = parse_list(value, |s| s.parse())?,
                "budgets" => c.budgets = parse_list(value, |s| parse_num(key, s))?,
                "repeats" => c.repeats = parse_num(key, value)?,
                "master_seed" => c.master_seed = parse_num(key, value)?,
                "scale_features" => c.scale_features = parse_bool(key, value)?,
                "holdout_only" => c.holdout_only = parse_bool(key, value)?,
                "record_wall_time" => c.record_wall_time = parse_bool(key, value)?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                other => return Err(ValError::config(format!("line {}: unknown key '{other}'", line_no + 1))),
            }
        }

        c.data = match source.as_str() {
            "synthetic" => DataSource::Synthetic(synth),
            "csv" => DataSource::Csv {
                path: csv_path.ok_or_else(|| ValError::config("data.source = csv needs data.path"))?,
                label_column,
            },
            other => return Err(ValError::config(format!("unknown data.source '{other}'"))),
        };
        c.validate()?;
        Ok(c)
    }

    /// Checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(ValError::config("repeats must be >= 1"));
        }
        if self.strategies.is_empty() {
            return Err(ValError::config("no strategies configured"));
        }
        if self.budgets.is_empty() || self.budgets[0] == 0 {
            return Err(ValError::config("budgets must be a non-empty list of positive counts"));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ValError::config("budgets must be strictly ascending"));
        }
        if !(self.lambda > 0.0) {
            return Err(ValError::config("classifier.lambda must be > 0"));
        }
        if let GammaChoice::Fixed(g) = self.gamma {
            if !(g > 0.0) {
                return Err(ValError::config("kernel.gamma must be > 0 or auto"));
            }
        }
        self.sparsify.validate()?;
        self.em.validate()
    }

    /// Loads the dataset, applying min-max scaling when configured.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let ds = self.data.load()?;
        Ok(if self.scale_features { ds.min_max_scaled() } else { ds })
    }

    pub fn resolve_kernel(&self, dataset: &Dataset) -> KernelSpec {
        match (self.kernel_kind, self.gamma) {
            (KernelKind::Linear, _) => KernelSpec::linear(),
            (KernelKind::Rbf, GammaChoice::Fixed(g)) => KernelSpec::rbf(g),
            (KernelKind::Rbf, GammaChoice::Auto) => KernelSpec::rbf_median_heuristic(dataset.features()),
        }
    }
}
