use std::collections::HashMap;
use std::time::Instant;

use log::info;
use ndarray::Axis;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{CurveRow, ErrorCurve};
use crate::classifier::{error_rate, predict, train_rlsc};
use crate::dataset::{Dataset, LabelOracle};
use crate::error::{Result, ValError};
use crate::kernel::KernelSpec;
use crate::represent::EmParams;
use crate::sparsify::{sparsify_halve, SubsetIndices};
use crate::strategies::{
    select_margin, select_random_unlabeled, select_ted, select_val_in_pool, SeedSet, StrategyName,
};

/// Wall time of one pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// The indices one cell picked and how many labels it used to pick them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSelection {
    pub strategy: StrategyName,
    pub seed: u64,
    pub budget: usize,
    pub selection_queries: usize,
    pub selected: Vec<usize>,
}

/// The curve plus per-cell selections and stage timings.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub curve: ErrorCurve,
    /// Same order as `curve.rows`.
    pub selections: Vec<CellSelection>,
    pub stages: Vec<StageTiming>,
    pub dataset_name: String,
    pub kernel: KernelSpec,
}

fn millis(since: Instant) -> f64 {
    (since.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

/// Seed of repeat `r`.
pub fn repeat_seed(master_seed: u64, repeat: usize) -> u64 {
    master_seed.wrapping_add(repeat as u64)
}

fn check_budgets(config: &ExperimentConfig, ds: &Dataset, seeds: &SeedSet) -> Result<()> {
    let n = ds.len();
    let max = *config.budgets.last().expect("validated non-empty");
    for &s in &config.strategies {
        let limit = match s {
            StrategyName::Val => config.sparsify.target_size(n),
            StrategyName::Margin | StrategyName::Random => n - seeds.len(),
            StrategyName::Ted => n,
        };
        if max > limit {
            return Err(ValError::config(format!(
                "strategy '{s}': budget {max} exceeds the feasible maximum {limit} for n = {n}"
            )));
        }
    }
    Ok(())
}

type JobResult = (StrategyName, f64, Result<Vec<(CurveRow, CellSelection)>>);

struct Shared<'a> {
    ds: &'a Dataset,
    seeds: &'a SeedSet,
    kernel: KernelSpec,
    config: &'a ExperimentConfig,
    val_pool: Option<SubsetIndices>,
}

impl Shared<'_> {
    fn select(&self, strategy: StrategyName, seed: u64, budget: usize, oracle: &mut LabelOracle<'_>) -> Result<SubsetIndices> {
        let x = self.ds.features();
        match strategy {
            StrategyName::Random => select_random_unlabeled(self.ds.len(), self.seeds, budget, seed),
            StrategyName::Ted => select_ted(x, budget, &self.kernel, self.config.sparsify.mu),
            StrategyName::Margin => select_margin(oracle, self.seeds, budget, &self.kernel, self.config.lambda),
            StrategyName::Val => {
                let pool = self.val_pool.as_ref().expect("pool computed when VAL is configured");
                let em = EmParams {
                    seed,
                    ..self.config.em.clone()
                };
                select_val_in_pool(x, pool, budget, &em)
            }
        }
    }

    fn cell(&self, strategy: StrategyName, seed: u64, budget: usize) -> Result<(CurveRow, CellSelection)> {
        let start = Instant::now();
        let mut oracle = LabelOracle::new(self.ds, Some(budget));
        let selected = self.select(strategy, seed, budget, &mut oracle)?;
        let selection_queries = oracle.queries_used();
        if strategy != StrategyName::Margin && selection_queries != 0 {
            return Err(ValError::config(format!(
                "target-independent strategy '{strategy}' queried {selection_queries} labels"
            )));
        }

        let mut train_idx = self.seeds.indices.clone();
        let mut train_y = self.seeds.labels.clone();
        for &i in selected.iter() {
            let y = oracle.query(i)?;
            if !train_idx.contains(&i) {
                train_idx.push(i);
                train_y.push(y);
            }
        }

        let x = self.ds.features();
        let xl = x.select(Axis(0), &train_idx);
        let model = train_rlsc(xl.view(), &train_y, &self.kernel, self.config.lambda, Some(self.ds.num_classes()))?;
        let error = if self.config.holdout_only {
            let mut is_train = vec![false; self.ds.len()];
            train_idx.iter().for_each(|&i| is_train[i] = true);
            let test: Vec<usize> = (0..self.ds.len()).filter(|&i| !is_train[i]).collect();
            let (pred, _) = predict(&model, x.select(Axis(0), &test).view())?;
            let truth: Vec<usize> = test.iter().map(|&i| self.ds.labels()[i]).collect();
            error_rate(&pred, &truth)?
        } else {
            let (pred, _) = predict(&model, x)?;
            error_rate(&pred, self.ds.labels())?
        };

        let row = CurveRow {
            strategy,
            seed,
            budget,
            error_rate: error,
            queries_used: oracle.queries_used(),
            wall_ms: if self.config.record_wall_time { millis(start) } else { 0.0 },
        };
        let selection = CellSelection {
            strategy,
            seed,
            budget,
            selection_queries,
            selected: selected.into_vec(),
        };
        Ok((row, selection))
    }
}

/// Runs every (strategy, repeat, budget) cell and returns the canonical
/// sorted curve.
///
/// Each cell gets a fresh oracle whose budget equals the cell's budget; the
/// per-class seeds are free. The classifier is trained on seeds plus
/// queried points and scored on the whole dataset (or on the points
/// outside the training set with `holdout_only`).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let mut stages = Vec::new();

    let t = Instant::now();
    let ds = config.load_dataset()?;
    stages.push(StageTiming {
        stage: "load".into(),
        millis: millis(t),
    });
    let kernel = config.resolve_kernel(&ds);
    kernel.validate()?;
    let seeds = SeedSet::first_per_class(&ds);
    check_budgets(config, &ds, &seeds)?;
    info!(
        "dataset {}: n={}, m={}, classes={}, kernel={} gamma={:.4e}",
        ds.name(),
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        kernel.kind,
        kernel.gamma
    );

    let val_pool = if config.strategies.contains(&StrategyName::Val) {
        let t = Instant::now();
        let pool = sparsify_halve(ds.features(), &kernel, &config.sparsify)?;
        let ms = millis(t);
        info!("sparsified pool: {} of {} points in {ms:.1} ms", pool.len(), ds.len());
        stages.push(StageTiming {
            stage: "val_sparsify".into(),
            millis: ms,
        });
        Some(pool)
    } else {
        None
    };

    let shared = Shared {
        ds: &ds,
        seeds: &seeds,
        kernel,
        config,
        val_pool,
    };

    let jobs: Vec<(StrategyName, u64)> = config
        .strategies
        .iter()
        .flat_map(|&s| (0..config.repeats).map(move |r| (s, repeat_seed(config.master_seed, r))))
        .collect();
    let t = Instant::now();
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let t = Instant::now();
            let rows = config.budgets.iter().map(|&b| shared.cell(s, seed, b)).collect();
            (s, millis(t), rows)
        })
        .collect();
    stages.push(StageTiming {
        stage: "cells_total".into(),
        millis: millis(t),
    });

    let mut per_strategy: HashMap<StrategyName, f64> = HashMap::new();
    let mut cells = Vec::new();
    for (s, ms, r) in results {
        *per_strategy.entry(s).or_default() += ms;
        cells.extend(r?);
    }
    for s in &config.strategies {
        let ms = per_strategy[s];
        info!("strategy {s}: {ms:.1} ms summed over repeats");
        stages.push(StageTiming {
            stage: format!("strategy_{s}"),
            millis: ms,
        });
    }

    cells.sort_by(|a, b| a.0.canonical_cmp(&b.0));
    let (rows, selections) = cells.into_iter().unzip();
    Ok(ExperimentOutcome {
        curve: ErrorCurve { rows },
        selections,
        stages,
        dataset_name: ds.name().to_string(),
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SyntheticSpec;
    use crate::harness::config::{DataSource, GammaChoice};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::blobs(3, 10, 10.0, 1.0, 1)),
            budgets: vec![3, 6],
            repeats: 2,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_cell_and_charges_equal_budget() {
        let out = run_experiment(&small_config()).unwrap();
        assert_eq!(out.curve.rows.len(), 4 * 2 * 2);
        for (row, sel) in out.curve.rows.iter().zip(&out.selections) {
            assert_eq!((row.strategy, row.seed, row.budget), (sel.strategy, sel.seed, sel.budget));
            assert_eq!(row.queries_used, row.budget);
            assert!((0.0..=1.0).contains(&row.error_rate));
            assert_eq!(sel.selected.len(), row.budget);
            if row.strategy != StrategyName::Margin {
                assert_eq!(sel.selection_queries, 0);
            }
        }
    }

    #[test]
    fn identical_configs_give_identical_curves() {
        let a = run_experiment(&small_config()).unwrap().curve;
        let b = run_experiment(&small_config()).unwrap().curve;
        assert_eq!(a, b);
    }

    #[test]
    fn full_budget_random_matches_full_supervision() {
        let ds_spec = SyntheticSpec::blobs(3, 10, 3.0, 1.5, 4);
        let (n, c) = (30, 3);
        let config = ExperimentConfig {
            data: DataSource::Synthetic(ds_spec.clone()),
            strategies: vec![StrategyName::Random],
            budgets: vec![n - c],
            repeats: 1,
            master_seed: 5,
            gamma: GammaChoice::Fixed(0.5),
            ..Default::default()
        };
        let row = run_experiment(&config).unwrap().curve.rows[0].clone();

        // reference run: every point labeled
        let ds = crate::dataset::gen_synthetic(&ds_spec).unwrap();
        let full = train_rlsc(ds.features(), ds.labels(), &KernelSpec::rbf(0.5), config.lambda, Some(c)).unwrap();
        let (pred, _) = predict(&full, ds.features()).unwrap();
        let floor = error_rate(&pred, ds.labels()).unwrap();
        assert!((row.error_rate - floor).abs() <= 1e-12, "{} vs {floor}", row.error_rate);
    }

    #[test]
    fn infeasible_budget_names_the_strategy() {
        let config = ExperimentConfig {
            budgets: vec![16],
            ..small_config()
        };
        let err = run_experiment(&config).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("'val'"), "{err}");
    }
}
