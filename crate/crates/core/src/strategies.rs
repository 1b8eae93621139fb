//! Query strategies behind one interface: VAL and the Random, Margin and
//! TED baselines.
//!
//! Every strategy sees the pool through a [`LabelOracle`]; only Margin
//! queries labels while selecting. VAL and TED are target-independent.

use std::fmt;
use std::str::FromStr;

use log::debug;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{predict, train_rlsc, DEFAULT_LAMBDA};
use crate::dataset::{Dataset, LabelOracle};
use crate::error::{Result, ValError};
use crate::geometry::{outlier_filter, OutlierParams};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::represent::{em_representation, snap_to_data, EmParams};
use crate::sparsify::{sequential_select, sparsify_halve, ScoreVariant, SparsifyParams, SubsetIndices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyName {
    Val,
    Random,
    Ted,
    Margin,
}

impl StrategyName {
    pub const ALL: [StrategyName; 4] = [
        StrategyName::Val,
        StrategyName::Random,
        StrategyName::Ted,
        StrategyName::Margin,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyName::Val => "val",
            StrategyName::Random => "random",
            StrategyName::Ted => "ted",
            StrategyName::Margin => "margin",
        }
    }
}

impl FromStr for StrategyName {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "val" => Ok(StrategyName::Val),
            "random" => Ok(StrategyName::Random),
            "ted" => Ok(StrategyName::Ted),
            "margin" => Ok(StrategyName::Margin),
            other => Err(ValError::config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub name: StrategyName,
    pub budget: usize,
    pub kernel: KernelSpec,
    pub sparsify: SparsifyParams,
    pub em: EmParams,
    pub lambda: f64,
    pub seed: u64,
}

impl StrategyConfig {
    pub fn new(name: StrategyName, budget: usize, kernel: KernelSpec) -> Self {
        StrategyConfig {
            name,
            budget,
            kernel,
            sparsify: SparsifyParams::default(),
            em: EmParams::default(),
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

/// One labeled point per class, granted before selection and never charged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
}

impl SeedSet {
    /// Lowest index of each class.
    pub fn first_per_class(dataset: &Dataset) -> SeedSet {
        let indices = dataset.first_index_per_class();
        let labels = indices.iter().map(|&i| dataset.labels()[i]).collect();
        SeedSet { indices, labels }
    }

    pub fn empty() -> SeedSet {
        SeedSet {
            indices: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Uniform interface: pick `budget` distinct pool indices.
pub trait QueryStrategy {
    fn name(&self) -> StrategyName;

    fn select(&self, oracle: &mut LabelOracle<'_>, seeds: &SeedSet, budget: usize) -> Result<SubsetIndices>;
}

/// Builds the strategy described by `config`.
pub fn build_strategy(config: &StrategyConfig) -> Box<dyn QueryStrategy + Send + Sync> {
    match config.name {
        StrategyName::Random => Box::new(RandomStrategy { seed: config.seed }),
        StrategyName::Ted => Box::new(TedStrategy {
            kernel: config.kernel,
            mu: config.sparsify.mu,
        }),
        StrategyName::Margin => Box::new(MarginStrategy {
            kernel: config.kernel,
            lambda: config.lambda,
        }),
        StrategyName::Val => Box::new(ValStrategy {
            kernel: config.kernel,
            sparsify: config.sparsify,
            em: EmParams {
                seed: config.seed,
                ..config.em.clone()
            },
            pool: None,
        }),
    }
}

/// Runs `config` on `oracle` with its own budget.
pub fn run_strategy(config: &StrategyConfig, oracle: &mut LabelOracle<'_>, seeds: &SeedSet) -> Result<SubsetIndices> {
    build_strategy(config).select(oracle, seeds, config.budget)
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(ValError::config(format!("budget must lie in 1..={n}, got {k}")));
    }
    Ok(())
}

/// `k` distinct uniform indices from `0..n`.
pub fn select_random(n: usize, k: usize, seed: u64) -> Result<SubsetIndices> {
    check_budget(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SubsetIndices::from_vec(sample(&mut rng, n, k).into_vec())
}

/// [`select_random`] over the indices that are not seeds.
pub fn select_random_unlabeled(n: usize, seeds: &SeedSet, k: usize, seed: u64) -> Result<SubsetIndices> {
    let unlabeled = SubsetIndices::from_vec((0..n).filter(|i| !seeds.indices.contains(i)).collect())?;
    Ok(select_random(unlabeled.len(), k, seed)?.map_through(&unlabeled))
}

/// First `k` picks of the sequential design loop with the TED score and no
/// representation stage.
pub fn select_ted(x: ArrayView2<'_, f64>, k: usize, kernel: &KernelSpec, mu: f64) -> Result<SubsetIndices> {
    check_budget(k, x.nrows())?;
    let gram = kernel_matrix(x, kernel)?;
    sequential_select(&gram, k, mu, ScoreVariant::Ted)
}

/// Uncertainty sampling: retrain RLSC on the labeled set, query the
/// unlabeled point with the smallest margin, repeat `k` times.
pub fn select_margin(
    oracle: &mut LabelOracle<'_>,
    seeds: &SeedSet,
    k: usize,
    kernel: &KernelSpec,
    lambda: f64,
) -> Result<SubsetIndices> {
    let x = oracle.features();
    let n = x.nrows();
    let mut labeled: Vec<usize> = seeds.indices.clone();
    let mut labels: Vec<usize> = seeds.labels.clone();
    let mut is_labeled = vec![false; n];
    for &i in &labeled {
        is_labeled[i] = true;
    }
    let available = is_labeled.iter().filter(|&&l| !l).count();
    if k == 0 || k > available {
        return Err(ValError::config(format!(
            "margin budget must lie in 1..={available}, got {k}"
        )));
    }
    let mut out = SubsetIndices::new();
    for _ in 0..k {
        let pick = if labeled.is_empty() {
            // nothing to train on yet: fall back to the lowest unlabeled index
            (0..n).find(|&i| !is_labeled[i]).expect("available > 0")
        } else {
            let xl = x.select(Axis(0), &labeled);
            let model = train_rlsc(xl.view(), &labels, kernel, lambda, Some(oracle.num_classes()))?;
            let candidates: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();
            let xc = x.select(Axis(0), &candidates);
            let (_, margins) = predict(&model, xc.view())?;
            let mut best = 0;
            for (j, &m) in margins.iter().enumerate() {
                if m < margins[best] {
                    best = j;
                }
            }
            candidates[best]
        };
        let y = oracle.query(pick)?;
        labeled.push(pick);
        labels.push(y);
        is_labeled[pick] = true;
        out.push_unchecked(pick);
    }
    Ok(out)
}

/// VAL selection: sparsify the pool, fit `k` local centers on the retained
/// points, snap each center to a distinct retained point. No labels are read.
pub fn select_val(x: ArrayView2<'_, f64>, k: usize, config: &StrategyConfig) -> Result<SubsetIndices> {
    let pool = sparsify_halve(x, &config.kernel, &config.sparsify)?;
    let em = EmParams {
        seed: config.seed,
        ..config.em.clone()
    };
    select_val_in_pool(x, &pool, k, &em)
}

/// Representation stage of [`select_val`] on an already sparsified pool.
pub fn select_val_in_pool(x: ArrayView2<'_, f64>, pool: &SubsetIndices, k: usize, em: &EmParams) -> Result<SubsetIndices> {
    if k == 0 || k > pool.len() {
        return Err(ValError::config(format!(
            "VAL budget must lie in 1..={} (the sparsified pool size), got {k}",
            pool.len()
        )));
    }
    let sub: Array2<f64> = x.select(Axis(0), pool.as_slice());
    let rep = em_representation(sub.view(), k, em)?;
    debug!(
        "VAL representation: K={k}, {} iterations, final loss {:.6e}",
        rep.iterations,
        rep.final_loss()
    );
    Ok(snap_to_data(rep.centers.view(), sub.view())?.map_through(pool))
}

/// Euclidean form of the volume model: drop local-volume outliers, then fit
/// `k` centers on what is left and snap them to data.
pub fn select_volume_model(
    x: ArrayView2<'_, f64>,
    k: usize,
    outliers: &OutlierParams,
    em: &EmParams,
) -> Result<SubsetIndices> {
    let kept = outlier_filter(x, outliers)?;
    select_val_in_pool(x, &kept, k, em)
}

pub struct RandomStrategy {
    pub seed: u64,
}

impl QueryStrategy for RandomStrategy {
    fn name(&self) -> StrategyName {
        StrategyName::Random
    }

    fn select(&self, oracle: &mut LabelOracle<'_>, seeds: &SeedSet, budget: usize) -> Result<SubsetIndices> {
        select_random_unlabeled(oracle.len(), seeds, budget, self.seed)
    }
}

pub struct TedStrategy {
    pub kernel: KernelSpec,
    pub mu: f64,
}

impl QueryStrategy for TedStrategy {
    fn name(&self) -> StrategyName {
        StrategyName::Ted
    }

    fn select(&self, oracle: &mut LabelOracle<'_>, _seeds: &SeedSet, budget: usize) -> Result<SubsetIndices> {
        select_ted(oracle.features(), budget, &self.kernel, self.mu)
    }
}

pub struct MarginStrategy {
    pub kernel: KernelSpec,
    pub lambda: f64,
}

impl QueryStrategy for MarginStrategy {
    fn name(&self) -> StrategyName {
        StrategyName::Margin
    }

    fn select(&self, oracle: &mut LabelOracle<'_>, seeds: &SeedSet, budget: usize) -> Result<SubsetIndices> {
        select_margin(oracle, seeds, budget, &self.kernel, self.lambda)
    }
}

pub struct ValStrategy {
    pub kernel: KernelSpec,
    pub sparsify: SparsifyParams,
    pub em: EmParams,
    /// Precomputed sparsified pool. The pool depends only on the data and
    /// the kernel, so callers running many budgets can share it.
    pub pool: Option<SubsetIndices>,
}

impl QueryStrategy for ValStrategy {
    fn name(&self) -> StrategyName {
        StrategyName::Val
    }

    fn select(&self, oracle: &mut LabelOracle<'_>, _seeds: &SeedSet, budget: usize) -> Result<SubsetIndices> {
        let x = oracle.features();
        let computed;
        let pool = match &self.pool {
            Some(p) => p,
            None => {
                computed = sparsify_halve(x, &self.kernel, &self.sparsify)?;
                &computed
            }
        };
        select_val_in_pool(x, pool, budget, &self.em)
    }
}
