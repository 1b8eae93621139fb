//! Euclidean stand-ins for version-space geometry.
//!
//! Hypotheses are modelled as points; a (sub-)version space is modelled by
//! the minimum enclosing ball of its points. The functions here compute the
//! quantities involved (hypothesis counts, shell volume fractions, hyperplane
//! angle ranges, the local-volume outlier filter) and the Monte Carlo checks
//! in [`checks`] verify the geometric claims on random point clouds.

pub mod checks;
mod meb;

pub use meb::{coreset_meb, meb, CORESET_DELTA, EXACT_MAX_DIM};

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, ValError};
use crate::represent::sq_dist;
use crate::sparsify::SubsetIndices;

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Array1<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Array1<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(ValError::Domain(format!("invalid ball: radius {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, p: ArrayView1<'_, f64>, tol: f64) -> bool {
        sq_dist(p, self.center.view()).sqrt() <= self.radius + tol
    }
}

/// Outcome of one Monte Carlo theorem check.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub theorem: String,
    pub trials: usize,
    pub violations: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Hypothesis count for `n` points in a `ρ`-class setting,
/// `2^n − Σ_{i=1}^{ρ−1} C(n, i)`, in exact arithmetic.
pub fn vc_hypothesis_count(n: u32, rho: u32) -> Result<BigUint> {
    if rho < 1 || rho > n {
        return Err(ValError::config(format!("need 1 <= rho <= n, got rho={rho}, n={n}")));
    }
    let total = BigUint::from(1u8) << n as usize;
    let mut correction = BigUint::ZERO;
    let mut binom = BigUint::from(1u8);
    for i in 1..rho {
        // C(n, i) = C(n, i-1) * (n - i + 1) / i, exact at every step
        binom = binom * (n - i + 1) / i;
        correction += &binom;
    }
    Ok(total - correction)
}

/// Fraction of a ball's volume in the outer shell between radius
/// `1/(1+ε)` and 1: `1 − (1+ε)^(−m)`.
pub fn shell_fraction(m: usize, eps: f64) -> Result<f64> {
    check_shell_args(m, eps)?;
    Ok(1.0 - (1.0 + eps).powi(-(m as i32)))
}

fn check_shell_args(m: usize, eps: f64) -> Result<()> {
    if m < 1 {
        return Err(ValError::config("dimension must be >= 1"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ValError::config(format!("eps must be > 0, got {eps}")));
    }
    Ok(())
}

/// Uniform sample from the unit ball in `m` dimensions: a Gaussian direction
/// scaled by `U^(1/m)`.
pub fn sample_unit_ball<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / m as f64);
            return v * (r / norm);
        }
    }
}

/// Monte Carlo estimate of [`shell_fraction`] from `samples` uniform points.
pub fn mc_shell_fraction(m: usize, eps: f64, samples: usize, seed: u64) -> Result<f64> {
    check_shell_args(m, eps)?;
    if samples == 0 {
        return Err(ValError::config("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = 1.0 / (1.0 + eps);
    let hits = (0..samples)
        .filter(|_| {
            let p = sample_unit_ball(m, &mut rng);
            p.dot(&p).sqrt() > inner
        })
        .count();
    Ok(hits as f64 / samples as f64)
}

/// `[asin(R/d), 2π − asin(R/d)]` with `d = ‖C − ν‖`, for `ν` strictly
/// outside the ball.
pub fn hyperplane_angle_range(ball: &Ball, nu: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
    if nu.len() != ball.dim() {
        return Err(ValError::shape("point and ball dimensions differ"));
    }
    let d = sq_dist(ball.center.view(), nu).sqrt();
    if d <= ball.radius {
        return Err(ValError::Domain(format!(
            "point at distance {d} is not outside the ball of radius {}",
            ball.radius
        )));
    }
    let lo = (ball.radius / d).asin();
    Ok((lo, 2.0 * PI - lo))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierParams {
    pub eps_prime: f64,
    pub neighborhood: usize,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams {
            eps_prime: 0.05,
            neighborhood: 5,
        }
    }
}

/// Indices of the `k` nearest other points of `i` (ties to the lower index).
fn neighbours(x: ArrayView2<'_, f64>, i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = x
        .rows()
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (sq_dist(p, x.row(i)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Local-volume outlier filter.
///
/// A point is dropped when the volume of the ball enclosing it and its
/// `neighborhood` nearest neighbours, relative to the ball enclosing all
/// points, exceeds `eps_prime`; with radii this is `(r_local / r_global)^m`.
/// Kept indices are returned in their original order.
pub fn outlier_filter(x: ArrayView2<'_, f64>, params: &OutlierParams) -> Result<SubsetIndices> {
    let (n, m) = x.dim();
    if !(params.eps_prime > 0.0 && params.eps_prime < 1.0) {
        return Err(ValError::config(format!("eps' must lie in (0, 1), got {}", params.eps_prime)));
    }
    if params.neighborhood < 1 || params.neighborhood >= n {
        return Err(ValError::config(format!(
            "neighborhood must lie in 1..{n}, got {}",
            params.neighborhood
        )));
    }
    let ratios = local_volume_ratios(x, params.neighborhood);
    let kept: Vec<usize> = (0..n).filter(|&i| ratios[i] <= params.eps_prime).collect();
    debug_assert!(m >= 1);
    SubsetIndices::from_vec(kept)
}

/// `(r_local / r_global)^m` for every point; 0 when all points coincide.
pub fn local_volume_ratios(x: ArrayView2<'_, f64>, neighborhood: usize) -> Vec<f64> {
    let m = x.ncols() as i32;
    let global = meb(x);
    (0..x.nrows())
        .map(|i| {
            if global.radius == 0.0 {
                return 0.0;
            }
            let mut idx = vec![i];
            idx.extend(neighbours(x, i, neighborhood));
            let local: Array2<f64> = x.select(Axis(0), &idx);
            (meb(local.view()).radius / global.radius).powi(m)
        })
        .collect()
}
