//! Kernel functions, Gram matrices and the biased MMD² estimator.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Result, ValError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Linear,
}

impl FromStr for KernelKind {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            other => Err(ValError::config(format!("unknown kernel '{other}'"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
        })
    }
}

/// Kernel family and parameters.
///
/// `kappa` is a known upper bound on `k(x, y)`; it is 1 for the RBF kernel
/// and data-dependent (usually absent) for the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    pub kappa: Option<f64>,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma,
            kappa: Some(1.0),
        }
    }

    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: 0.0,
            kappa: None,
        }
    }

    /// RBF kernel with `gamma = 1 / (m * median squared pairwise distance)`,
    /// the median taken over an evenly strided subsample of at most 200 rows.
    pub fn rbf_median_heuristic(x: ArrayView2<'_, f64>) -> Self {
        KernelSpec::rbf(median_heuristic_gamma(x))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ValError::config(format!("rbf gamma must be > 0, got {}", self.gamma)));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(ValError::config(format!("kappa must be > 0, got {k}")));
            }
        }
        Ok(())
    }

    /// `k(x, y)` without the dimension check.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Linear => x.iter().zip(y.iter()).map(|(a, b)| a * b).sum(),
        }
    }
}

pub(crate) fn median_heuristic_gamma(x: ArrayView2<'_, f64>) -> f64 {
    const SUBSAMPLE: usize = 200;
    let (n, m) = x.dim();
    let take = n.min(SUBSAMPLE);
    let idx: Vec<usize> = (0..take).map(|i| i * n / take).collect();
    let mut d2 = Vec::with_capacity(take * take.saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let r = x.row(i);
            let s = x.row(j);
            d2.push(r.iter().zip(s.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    d2.sort_by(f64::total_cmp);
    let mid = d2.len() / 2;
    let median = if d2.len() % 2 == 0 {
        0.5 * (d2[mid - 1] + d2[mid])
    } else {
        d2[mid]
    };
    if median > 0.0 {
        1.0 / (m as f64 * median)
    } else {
        1.0
    }
}

/// `k(x, y)`: `exp(-gamma * |x - y|^2)` for RBF, `<x, y>` for linear.
pub fn kernel_eval(spec: &KernelSpec, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(ValError::shape(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// A symmetric Gram matrix together with the kernel that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub entries: Array2<f64>,
    pub spec: KernelSpec,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        is_exactly_symmetric(self.entries.view())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self.entries.view())
    }
}

pub fn is_exactly_symmetric(a: ArrayView2<'_, f64>) -> bool {
    let n = a.nrows();
    a.ncols() == n && (0..n).all(|i| (0..i).all(|j| a[[i, j]].to_bits() == a[[j, i]].to_bits()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Gram matrix of the rows of `x`. The upper triangle is evaluated (rows in
/// parallel) and mirrored, so the result is exactly symmetric.
pub fn kernel_matrix(x: ArrayView2<'_, f64>, spec: &KernelSpec) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = x.nrows();
    let mut entries = Array2::<f64>::zeros((n, n));
    entries
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let xi = x.row(i);
            for j in i..n {
                row[j] = spec.eval_unchecked(xi, x.row(j));
            }
        });
    for i in 0..n {
        for j in 0..i {
            entries[[i, j]] = entries[[j, i]];
        }
    }
    Ok(KernelMatrix { entries, spec: *spec })
}

/// Sum of `k(a_i, b_j)` over all pairs.
fn cross_sum(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, spec: &KernelSpec) -> f64 {
    a.rows()
        .into_iter()
        .map(|ai| b.rows().into_iter().map(|bj| spec.eval_unchecked(ai, bj)).sum::<f64>())
        .sum()
}

fn check_mmd_args(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(ValError::shape("MMD needs two non-empty samples"));
    }
    if x.ncols() != y.ncols() {
        return Err(ValError::shape(format!(
            "MMD samples have dimensions {} and {}",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Biased MMD² estimator between the rows of `x` (size p) and `y` (size q):
///
/// `(1/p²) Σ k(x_i, x_j) − (2/pq) Σ k(x_i, y_j) + (1/q²) Σ k(y_i, y_j)`.
///
/// The two within-sample terms are added before the cross term is
/// subtracted, and the cross sum is accumulated with the smaller sample in
/// the outer loop, so the result is exactly symmetric in `x` and `y`.
pub fn mmd_squared(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, spec: &KernelSpec) -> Result<f64> {
    check_mmd_args(x, y)?;
    let p = x.nrows() as f64;
    let q = y.nrows() as f64;
    let xx = cross_sum(x, x, spec) / (p * p);
    let yy = cross_sum(y, y, spec) / (q * q);
    let xy = symmetric_cross_sum(x, y, spec) / (p * q);
    Ok((xx + yy) - 2.0 * xy)
}

fn symmetric_cross_sum(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, spec: &KernelSpec) -> f64 {
    // Order the operands canonically so that swapping x and y cannot change
    // the accumulation order.
    let (a, b) = if (x.nrows(), x.as_ptr()) <= (y.nrows(), y.as_ptr()) {
        (x, y)
    } else {
        (y, x)
    };
    cross_sum(a, b, spec)
}

/// Upper bound on [`mmd_squared`] for a kernel bounded by `kappa`:
/// `2κ − (2/pq) Σ k(x_i, y_j)`.
pub fn mmd_squared_upper_bound(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    spec: &KernelSpec,
) -> Result<f64> {
    check_mmd_args(x, y)?;
    let kappa = spec
        .kappa
        .ok_or_else(|| ValError::config("MMD upper bound requires a kernel bound kappa"))?;
    let xy = symmetric_cross_sum(x, y, spec) / (x.nrows() as f64 * y.nrows() as f64);
    Ok(2.0 * kappa - 2.0 * xy)
}
