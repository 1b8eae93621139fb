//! Global sparsification of the candidate pool by sequential confidence
//! scoring with rank-one kernel deflation.
//!
//! Each round scores every remaining candidate `l` from the current
//! (deflated) Gram matrix, appends the best one `l'`, and removes the
//! direction it explains:
//!
//! ```text
//! K <- K - K(:, l') K(l', :) / (K(l', l') + mu)
//! ```
//!
//! The loop is select-then-deflate and therefore sequential; each round costs
//! O(n²), so halving a pool of n points costs O(n³) overall.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Result, ValError};
use crate::kernel::{kernel_matrix, KernelMatrix, KernelSpec};

/// How the row energy `s_l = K(l,:)·K(:,l)` enters the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariant {
    /// `s_l² / (K(l,l) + mu)`: the squared form, taken literally.
    #[default]
    Squared,
    /// `s_l / (K(l,l) + mu)`: the sequential transductive experimental design score.
    Ted,
}

impl FromStr for ScoreVariant {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "squared" | "paper" => Ok(ScoreVariant::Squared),
            "ted" => Ok(ScoreVariant::Ted),
            other => Err(ValError::config(format!("unknown score variant '{other}'"))),
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreVariant::Squared => "squared",
            ScoreVariant::Ted => "ted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    pub mu: f64,
    pub target_fraction: f64,
    pub score_variant: ScoreVariant,
}

impl Default for SparsifyParams {
    fn default() -> Self {
        SparsifyParams {
            mu: 0.1,
            target_fraction: 0.5,
            score_variant: ScoreVariant::Squared,
        }
    }
}

impl SparsifyParams {
    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(ValError::config(format!(
                "target_fraction must lie in (0, 1], got {}",
                self.target_fraction
            )));
        }
        Ok(())
    }

    /// `floor(n * target_fraction)`.
    pub fn target_size(&self, n: usize) -> usize {
        (n as f64 * self.target_fraction).floor() as usize
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(ValError::config(format!("mu must be > 0, got {mu}")))
    }
}

/// Ordered, duplicate-free indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubsetIndices(Vec<usize>);

impl SubsetIndices {
    pub fn new() -> Self {
        SubsetIndices(Vec::new())
    }

    /// Fails if `indices` contains a duplicate.
    pub fn from_vec(indices: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        if let Some(d) = indices.iter().find(|&&i| !seen.insert(i)) {
            return Err(ValError::shape(format!("duplicate index {d}")));
        }
        Ok(SubsetIndices(indices))
    }

    pub(crate) fn push_unchecked(&mut self, i: usize) {
        debug_assert!(!self.0.contains(&i));
        self.0.push(i);
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn truncated(&self, k: usize) -> SubsetIndices {
        SubsetIndices(self.0[..k.min(self.0.len())].to_vec())
    }

    /// Maps positions in a sub-pool back to indices of the full pool.
    pub fn map_through(&self, pool: &SubsetIndices) -> SubsetIndices {
        SubsetIndices(self.0.iter().map(|&i| pool.0[i]).collect())
    }
}

impl std::ops::Deref for SubsetIndices {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

fn score_one(k: ArrayView2<'_, f64>, l: usize, mu: f64, variant: ScoreVariant) -> f64 {
    let row = k.row(l);
    let col = k.column(l);
    let s: f64 = row.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
    let denom = k[[l, l]] + mu;
    match variant {
        ScoreVariant::Squared => s * s / denom,
        ScoreVariant::Ted => s / denom,
    }
}

/// Confidence score of every candidate; excluded entries are `-inf`.
pub fn confidence_scores(
    k: &KernelMatrix,
    mu: f64,
    excluded: &SubsetIndices,
    variant: ScoreVariant,
) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let n = k.len();
    let mut mask = vec![false; n];
    for &i in excluded.iter() {
        if i >= n {
            return Err(ValError::shape(format!("excluded index {i} out of range for {n}")));
        }
        mask[i] = true;
    }
    Ok(scores_masked(k.entries.view(), mu, &mask, variant))
}

fn scores_masked(k: ArrayView2<'_, f64>, mu: f64, mask: &[bool], variant: ScoreVariant) -> Vec<f64> {
    (0..k.nrows())
        .into_par_iter()
        .map(|l| {
            if mask[l] {
                f64::NEG_INFINITY
            } else {
                score_one(k, l, mu, variant)
            }
        })
        .collect()
}

/// Rank-one deflation `K - K(:,l) K(l,:) / (K(l,l) + mu)`, returned as a new
/// matrix.
pub fn deflate(k: &KernelMatrix, selected: usize, mu: f64) -> Result<KernelMatrix> {
    let mut out = k.clone();
    deflate_in_place(&mut out.entries, selected, mu)?;
    Ok(out)
}

/// In-place form of [`deflate`]. Entry `(i, j)` becomes
/// `K(i,j) - (K(i,l) * K(l,j)) / d`; the product commutes exactly, so a
/// symmetric input stays exactly symmetric.
pub fn deflate_in_place(k: &mut Array2<f64>, selected: usize, mu: f64) -> Result<()> {
    check_mu(mu)?;
    let n = k.nrows();
    if selected >= n {
        return Err(ValError::shape(format!("deflation index {selected} out of range for {n}")));
    }
    let pivot: Vec<f64> = k.column(selected).to_vec();
    let d = k[[selected, selected]] + mu;
    k.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let vi = pivot[i];
            if vi != 0.0 {
                for (kij, &vj) in row.iter_mut().zip(&pivot) {
                    *kij -= vi * vj / d;
                }
            }
        });
    Ok(())
}

/// Greedy select-then-deflate loop on a precomputed Gram matrix, returning
/// the first `count` selections. Ties go to the lowest index.
pub fn sequential_select(
    k: &KernelMatrix,
    count: usize,
    mu: f64,
    variant: ScoreVariant,
) -> Result<SubsetIndices> {
    check_mu(mu)?;
    let n = k.len();
    if count > n {
        return Err(ValError::config(format!("cannot select {count} of {n} points")));
    }
    let mut work = k.entries.clone();
    let mut mask = vec![false; n];
    let mut selected = SubsetIndices::new();
    for _ in 0..count {
        let scores = scores_masked(work.view(), mu, &mask, variant);
        let best = argmax_lowest(&scores);
        selected.push_unchecked(best);
        mask[best] = true;
        deflate_in_place(&mut work, best, mu)?;
    }
    Ok(selected)
}

/// Index of the maximum; NaN never wins, ties go to the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut found = false;
    for (i, &v) in values.iter().enumerate() {
        if !found && !v.is_nan() || v > best_v {
            best = i;
            best_v = v;
            found = true;
        }
    }
    best
}

/// Halves (by default) the pool: returns `floor(n * target_fraction)`
/// distinct indices of `x` in selection order.
pub fn sparsify_halve(x: ArrayView2<'_, f64>, spec: &KernelSpec, params: &SparsifyParams) -> Result<SubsetIndices> {
    params.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(ValError::config(format!("sparsification needs at least 2 points, got {n}")));
    }
    let k = kernel_matrix(x, spec)?;
    sequential_select(&k, params.target_size(n), params.mu, params.score_variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn km(e: Array2<f64>) -> KernelMatrix {
        KernelMatrix {
            entries: e,
            spec: KernelSpec::linear(),
        }
    }

    #[test]
    fn scores_on_identity() {
        let k = km(Array2::eye(3));
        let s = confidence_scores(&k, 0.1, &SubsetIndices::new(), ScoreVariant::Squared).unwrap();
        for v in s {
            assert_abs_diff_eq!(v, 1.0 / 1.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn scores_on_2x2() {
        let k = km(array![[1.0, 0.5], [0.5, 1.0]]);
        let none = SubsetIndices::new();
        let p = confidence_scores(&k, 0.1, &none, ScoreVariant::Squared).unwrap();
        assert_abs_diff_eq!(p[0], 1.25 * 1.25 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], 1.42045, epsilon = 1e-5);
        let t = confidence_scores(&k, 0.1, &none, ScoreVariant::Ted).unwrap();
        assert_abs_diff_eq!(t[0], 1.13636, epsilon = 1e-5);
        let ex = SubsetIndices::from_vec(vec![1]).unwrap();
        let masked = confidence_scores(&k, 0.1, &ex, ScoreVariant::Ted).unwrap();
        assert_eq!(masked[1], f64::NEG_INFINITY);
        assert!(confidence_scores(&k, 0.0, &none, ScoreVariant::Ted).unwrap_err().is_config());
    }

    #[test]
    fn deflate_2x2() {
        let k = km(array![[1.0, 0.5], [0.5, 1.0]]);
        let d = deflate(&k, 0, 0.1).unwrap();
        assert_abs_diff_eq!(d.entries[[0, 0]], 0.090909, epsilon = 1e-6);
        assert_abs_diff_eq!(d.entries[[0, 1]], 0.045455, epsilon = 1e-6);
        assert_abs_diff_eq!(d.entries[[1, 1]], 0.772727, epsilon = 1e-6);
        assert!(d.is_symmetric());
        // K'(l,l) = K(l,l) mu / (K(l,l) + mu)
        assert_abs_diff_eq!(d.entries[[0, 0]], 0.1 / 1.1, epsilon = 1e-15);
    }

    #[test]
    fn deflate_identity_touches_one_entry() {
        let k = km(Array2::eye(4));
        let d = deflate(&k, 2, 0.1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (2, 2) {
                    0.1 / 1.1
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(d.entries[[i, j]], expect, epsilon = 1e-15);
            }
        }
        assert!(matches!(deflate(&k, 4, 0.1), Err(ValError::Shape(_))));
    }

    #[test]
    fn deflation_vanishes_for_huge_mu() {
        let x = array![[0.0, 1.0], [2.0, -1.0], [0.5, 3.0]];
        let k = kernel_matrix(x.view(), &KernelSpec::linear()).unwrap();
        let d = deflate(&k, 1, 1e12).unwrap();
        let norm = k.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let diff = (&d.entries - &k.entries).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff <= 1e-10 * norm * norm);
    }

    #[test]
    fn n2_selects_one() {
        let x = array![[0.0], [1.0]];
        let out = sparsify_halve(x.view(), &KernelSpec::rbf(1.0), &SparsifyParams::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(sparsify_halve(array![[0.0]].view(), &KernelSpec::rbf(1.0), &SparsifyParams::default())
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn diagonal_selected_by_decreasing_value() {
        let diag = [0.3, 2.0, 0.7, 1.5, 0.9, 0.1];
        let mut e = Array2::zeros((6, 6));
        for (i, d) in diag.iter().enumerate() {
            e[[i, i]] = *d;
        }
        let k = km(e);
        let got = sequential_select(&k, 6, 0.1, ScoreVariant::Ted).unwrap();
        // Exhaustive oracle: with zero off-diagonals deflating l only changes K(l,l),
        // so the order is the descending sort of d²/(d+mu) over the diagonal.
        let mut expect: Vec<usize> = (0..6).collect();
        expect.sort_by(|&a, &b| {
            let s = |d: f64| d * d / (d + 0.1);
            s(diag[b]).total_cmp(&s(diag[a]))
        });
        assert_eq!(got.as_slice(), &expect[..]);
        assert_eq!(got.as_slice(), &[1, 3, 4, 2, 0, 5]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let k = km(Array2::eye(3));
        let got = sequential_select(&k, 3, 0.1, ScoreVariant::Squared).unwrap();
        assert_eq!(got.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn argmax_rules() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[f64::NAN, 0.5]), 1);
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY, -1.0]), 1);
    }

    #[test]
    fn subset_rejects_duplicates() {
        assert!(SubsetIndices::from_vec(vec![1, 2, 1]).is_err());
        let s = SubsetIndices::from_vec(vec![4, 0, 2]).unwrap();
        let pool = SubsetIndices::from_vec(vec![10, 11, 12, 13, 14]).unwrap();
        assert_eq!(s.map_through(&pool).as_slice(), &[14, 10, 12]);
    }
}
