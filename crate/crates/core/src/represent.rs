//! Local center representation of a (sparsified) pool by hard EM under the
//! squared Euclidean loss.
//!
//! The E-step assigns every point to its nearest center, the M-step moves
//! each center to the mean of its cell. The mean is the minimiser of the
//! cell's squared loss and has zero linear-kernel MMD to the cell, which the
//! tests check directly.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ValError};
use crate::sparsify::SubsetIndices;

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// Uniformly sampled distinct data points.
    PassiveRandom,
    /// D²-weighted sampling of distinct data points (k-means++ seeding).
    PlusPlus,
    /// Caller-supplied centers.
    Given(Array2<f64>),
}

impl FromStr for EmInit {
    type Err = ValError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "passive_random" | "random" => Ok(EmInit::PassiveRandom),
            "plus_plus" | "kmeans++" => Ok(EmInit::PlusPlus),
            other => Err(ValError::config(format!(
                "unknown EM init '{other}' (given centers can only be set programmatically)"
            ))),
        }
    }
}

impl fmt::Display for EmInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmInit::PassiveRandom => "passive_random",
            EmInit::PlusPlus => "plus_plus",
            EmInit::Given(_) => "given",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmParams {
    pub tol: f64,
    pub max_iter: usize,
    pub init: EmInit,
    pub seed: u64,
}

impl Default for EmParams {
    fn default() -> Self {
        EmParams {
            tol: 1e-9,
            max_iter: 300,
            init: EmInit::PlusPlus,
            seed: 0,
        }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(ValError::config("em max_iter must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(ValError::config(format!("em tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Loss after each completed iteration.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Representation {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(x: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != centers.ncols() {
        return Err(ValError::shape(format!(
            "points have dimension {} but centers have {}",
            x.ncols(),
            centers.ncols()
        )));
    }
    if centers.nrows() == 0 {
        return Err(ValError::config("need at least one center"));
    }
    Ok(())
}

fn nearest(p: ArrayView1<'_, f64>, centers: ArrayView2<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Nearest center by squared distance, ties to the lowest center id.
pub fn assign(x: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    check_dims(x, centers)?;
    Ok(x.rows().into_iter().map(|p| nearest(p, centers).0).collect())
}

/// Cell means, accumulated in point order. Cells with no points keep the
/// matching row of `previous`.
pub fn update_centers(
    x: ArrayView2<'_, f64>,
    assignments: &[usize],
    previous: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_dims(x, previous)?;
    if assignments.len() != x.nrows() {
        return Err(ValError::shape(format!(
            "{} assignments for {} points",
            assignments.len(),
            x.nrows()
        )));
    }
    let k = previous.nrows();
    let mut sums = Array2::<f64>::zeros(previous.raw_dim());
    let mut counts = vec![0usize; k];
    for (p, &c) in x.rows().into_iter().zip(assignments) {
        if c >= k {
            return Err(ValError::shape(format!("assignment {c} out of range for {k} centers")));
        }
        counts[c] += 1;
        let mut s = sums.row_mut(c);
        s += &p;
    }
    for (c, &count) in counts.iter().enumerate() {
        let mut row = sums.row_mut(c);
        if count == 0 {
            row.assign(&previous.row(c));
        } else {
            row /= count as f64;
        }
    }
    Ok(sums)
}

/// Σ_i ‖x_i − c_{a(i)}‖².
pub fn structure_loss(x: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>, assignments: &[usize]) -> f64 {
    x.rows()
        .into_iter()
        .zip(assignments)
        .map(|(p, &c)| sq_dist(p, centers.row(c)))
        .sum()
}

fn initial_centers(x: ArrayView2<'_, f64>, k: usize, params: &EmParams) -> Result<Array2<f64>> {
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let picks: Vec<usize> = match &params.init {
        EmInit::Given(c) => {
            if c.dim() != (k, x.ncols()) {
                return Err(ValError::shape(format!(
                    "given centers are {:?}, expected ({k}, {})",
                    c.dim(),
                    x.ncols()
                )));
            }
            return Ok(c.clone());
        }
        EmInit::PassiveRandom => sample(&mut rng, n, k).into_vec(),
        EmInit::PlusPlus => {
            let mut picks = vec![rng.random_range(0..n)];
            let mut d2: Vec<f64> = x.rows().into_iter().map(|p| sq_dist(p, x.row(picks[0]))).collect();
            while picks.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut r = rng.random::<f64>() * total;
                    let mut chosen = None;
                    for (i, &w) in d2.iter().enumerate() {
                        if w > 0.0 {
                            chosen = Some(i);
                            if r < w {
                                break;
                            }
                            r -= w;
                        }
                    }
                    chosen.expect("positive total weight")
                } else {
                    // every point coincides with a chosen one: take unused indices in order
                    (0..n).find(|i| !picks.contains(i)).expect("k <= n")
                };
                picks.push(next);
                for (i, p) in x.rows().into_iter().enumerate() {
                    d2[i] = d2[i].min(sq_dist(p, x.row(next)));
                }
            }
            picks
        }
    };
    Ok(x.select(ndarray::Axis(0), &picks))
}

/// Moves the centers of empty cells onto the points farthest from their
/// current centers, one point per empty cell, and reassigns those points.
fn repair_empty(x: ArrayView2<'_, f64>, centers: &mut Array2<f64>, assignments: &mut [usize]) {
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = 0.0;
        for (i, p) in x.rows().into_iter().enumerate() {
            let a = assignments[i];
            if counts[a] <= 1 {
                continue;
            }
            let d = sq_dist(p, centers.row(a));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        counts[assignments[i]] -= 1;
        counts[c] += 1;
        assignments[i] = c;
        centers.row_mut(c).assign(&x.row(i));
    }
}

/// Alternates [`assign`] and [`update_centers`] until the loss changes by at
/// most `tol`, the assignment is stable, or `max_iter` iterations have run.
pub fn em_representation(x: ArrayView2<'_, f64>, k: usize, params: &EmParams) -> Result<Representation> {
    params.validate()?;
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(ValError::config(format!("need 1 <= K <= {n} centers, got {k}")));
    }
    let mut centers = initial_centers(x, k, params)?;
    let mut assignments = assign(x, centers.view())?;
    let mut loss_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        repair_empty(x, &mut centers, &mut assignments);
        centers = update_centers(x, &assignments, centers.view())?;
        let loss = structure_loss(x, centers.view(), &assignments);
        let prev = loss_trace.last().copied();
        loss_trace.push(loss);

        let next = assign(x, centers.view())?;
        let stable = next == assignments;
        assignments = next;
        if stable || prev.is_some_and(|p: f64| (p - loss).abs() <= params.tol) {
            converged = true;
            break;
        }
    }
    // Keep the reported assignment consistent with the reported centers.
    debug_assert_eq!(assignments.len(), n);
    Ok(Representation {
        centers,
        assignments,
        loss_trace,
        iterations,
        converged,
    })
}

/// For each center in order, the nearest not-yet-used point of `x`
/// (ties to the lowest index).
pub fn snap_to_data(centers: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<SubsetIndices> {
    check_dims(x, centers)?;
    let (k, n) = (centers.nrows(), x.nrows());
    if k > n {
        return Err(ValError::config(format!("cannot snap {k} centers onto {n} points")));
    }
    let mut used = vec![false; n];
    let mut out = SubsetIndices::new();
    for c in centers.rows() {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, p) in x.rows().into_iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = sq_dist(p, c);
            if best.is_none() || d < best_d {
                best = Some(i);
                best_d = d;
            }
        }
        let i = best.expect("k <= n leaves an unused point");
        used[i] = true;
        out.push_unchecked(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{mmd_squared, KernelSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn assign_examples() {
        let x = array![[0.0], [10.0]];
        assert_eq!(assign(x.view(), array![[1.0], [9.0]].view()).unwrap(), vec![0, 1]);
        assert_eq!(assign(array![[5.0]].view(), array![[0.0], [10.0]].view()).unwrap(), vec![0]);
        let pts = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(assign(pts.view(), pts.view()).unwrap(), vec![0, 1, 2]);
        assert!(matches!(assign(pts.view(), array![[1.0]].view()), Err(ValError::Shape(_))));
    }

    #[test]
    fn update_examples() {
        let x = array![[0.0, 0.0], [0.0, 2.0], [7.0, 7.0]];
        let prev = array![[9.0, 9.0], [9.0, 9.0], [-1.0, -1.0]];
        let c = update_centers(x.view(), &[0, 0, 1], prev.view()).unwrap();
        assert_eq!(c.row(0), array![0.0, 1.0]);
        assert_eq!(c.row(1), array![7.0, 7.0]);
        // empty cell keeps its previous center
        assert_eq!(c.row(2), array![-1.0, -1.0]);
    }

    #[test]
    fn mean_is_the_grid_minimiser() {
        let x = array![[1.0], [2.0], [6.0]];
        let c = update_centers(x.view(), &[0, 0, 0], array![[0.0]].view()).unwrap();
        assert_eq!(c[[0, 0]], 3.0);
        // brute-force scan of sum (x - c)^2 over a fine grid
        let loss = |c: f64| x.iter().map(|v| (v - c).powi(2)).sum::<f64>();
        let best = (0..=8000)
            .map(|i| i as f64 * 0.001)
            .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
            .unwrap();
        assert_abs_diff_eq!(best, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn k_equals_n_gives_zero_loss() {
        let x = array![[0.0, 1.0], [4.0, 1.0], [2.0, 9.0], [-3.0, 0.5]];
        for init in [EmInit::PassiveRandom, EmInit::PlusPlus] {
            let rep = em_representation(x.view(), 4, &EmParams { init, ..Default::default() }).unwrap();
            assert_eq!(rep.final_loss(), 0.0);
            let mut a = rep.assignments.clone();
            a.sort();
            a.dedup();
            assert_eq!(a.len(), 4);
        }
    }

    #[test]
    fn hand_iteration_two_points() {
        let x = array![[0.0, 0.0], [0.0, 2.0]];
        let params = EmParams {
            init: EmInit::Given(array![[1.0, 1.0]]),
            ..Default::default()
        };
        let rep = em_representation(x.view(), 1, &params).unwrap();
        assert!(rep.iterations <= 2);
        assert!(rep.converged);
        assert_eq!(rep.centers, array![[0.0, 1.0]]);
        assert_eq!(rep.final_loss(), 2.0);
    }

    #[test]
    fn k_too_large() {
        let x = array![[0.0], [1.0]];
        assert!(em_representation(x.view(), 3, &EmParams::default()).unwrap_err().is_config());
        assert!(em_representation(x.view(), 0, &EmParams::default()).unwrap_err().is_config());
        assert!(snap_to_data(array![[0.0], [1.0], [2.0]].view(), x.view()).unwrap_err().is_config());
    }

    #[test]
    fn empty_cell_is_reseeded() {
        // second center starts far away from everything and would stay empty
        let x = array![[0.0], [1.0], [10.0], [11.0]];
        let params = EmParams {
            init: EmInit::Given(array![[5.0], [1000.0]]),
            ..Default::default()
        };
        let rep = em_representation(x.view(), 2, &params).unwrap();
        assert_eq!(rep.final_loss(), 1.0);
        assert!(rep.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn duplicate_points_do_not_break_init() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let rep = em_representation(x.view(), 3, &EmParams::default()).unwrap();
        assert_eq!(rep.final_loss(), 0.0);
    }

    #[test]
    fn snap_examples() {
        let x = array![[0.0, 0.0], [0.0, 2.0], [9.0, 9.0]];
        assert_eq!(snap_to_data(array![[0.0, 1.0]].view(), x.view()).unwrap().as_slice(), &[0]);
        let exact = array![[9.0, 9.0], [0.0, 2.0]];
        assert_eq!(snap_to_data(exact.view(), x.view()).unwrap().as_slice(), &[2, 1]);
        let twice = array![[8.0, 8.0], [8.0, 8.0]];
        assert_eq!(snap_to_data(twice.view(), x.view()).unwrap().as_slice(), &[2, 1]);
    }

    #[test]
    fn center_has_zero_linear_mmd_to_its_cell() {
        let x = array![[0.3, -1.2], [2.5, 0.1], [1.0, 1.0], [-0.7, 4.0]];
        let c = update_centers(x.view(), &[0, 0, 0, 0], array![[0.0, 0.0]].view()).unwrap();
        let m = mmd_squared(c.view(), x.view(), &KernelSpec::linear()).unwrap();
        assert!(m.abs() <= 1e-10, "{m}");
    }
}
