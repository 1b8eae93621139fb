//! Minimum enclosing balls.
//!
//! Up to three dimensions the ball is exact: move-to-front recursion over
//! support sets of at most `m + 1` points. Above that a Frank-Wolfe core-set
//! iteration on the dual yields a `(1 + δ)`-approximation; the reported
//! radius is the true maximum distance from the returned center, so every
//! input point is always enclosed.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Ball;

/// Highest dimension handled by the exact solver.
pub const EXACT_MAX_DIM: usize = 3;
/// Relative accuracy of the approximate solver.
pub const CORESET_DELTA: f64 = 1e-3;

const CONTAIN_REL: f64 = 1e-12;

/// Minimum enclosing ball of the rows of `points` (at least one row).
pub fn meb(points: ArrayView2<'_, f64>) -> Ball {
    assert!(points.nrows() > 0, "meb needs at least one point");
    if points.ncols() <= EXACT_MAX_DIM {
        exact_meb(points)
    } else {
        coreset_meb(points, CORESET_DELTA)
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Sphere {
    center: Vec<f64>,
    r2: f64,
}

impl Sphere {
    fn contains(&self, p: &[f64]) -> bool {
        self.r2 >= 0.0 && sq(&self.center, p) <= self.r2 * (1.0 + CONTAIN_REL) + 1e-300
    }
}

/// Smallest sphere through all support points, with its center in their
/// affine hull. `None` for an affinely dependent support set.
fn circumsphere(support: &[&[f64]], dim: usize) -> Option<Sphere> {
    match support.len() {
        0 => Some(Sphere {
            center: vec![0.0; dim],
            r2: -1.0,
        }),
        1 => Some(Sphere {
            center: support[0].to_vec(),
            r2: 0.0,
        }),
        k => {
            let q0 = support[0];
            let d = k - 1;
            let diffs: Vec<Vec<f64>> = support[1..]
                .iter()
                .map(|q| q.iter().zip(q0).map(|(a, b)| a - b).collect())
                .collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let gram = DMatrix::from_fn(d, d, |i, j| 2.0 * dot(&diffs[i], &diffs[j]));
            let rhs = DVector::from_iterator(d, diffs.iter().map(|v| dot(v, v)));
            let lambda = gram.lu().solve(&rhs)?;
            if lambda.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut center = q0.to_vec();
            for (l, v) in lambda.iter().zip(&diffs) {
                for (c, x) in center.iter_mut().zip(v) {
                    *c += l * x;
                }
            }
            let r2 = support.iter().map(|q| sq(&center, q)).fold(0.0, f64::max);
            Some(Sphere { center, r2 })
        }
    }
}

fn move_to_front(pts: &mut [Vec<f64>], end: usize, support: &mut Vec<Vec<f64>>, dim: usize) -> Sphere {
    let refs: Vec<&[f64]> = support.iter().map(Vec::as_slice).collect();
    let mut ball = circumsphere(&refs, dim).unwrap_or(Sphere {
        center: vec![0.0; dim],
        r2: -1.0,
    });
    if support.len() == dim + 1 {
        return ball;
    }
    for i in 0..end {
        if !ball.contains(&pts[i]) {
            support.push(pts[i].clone());
            let candidate = move_to_front(pts, i, support, dim);
            support.pop();
            // a degenerate support set can only come from rounding; keep the
            // larger valid ball in that case
            if candidate.r2 >= 0.0 {
                ball = candidate;
            }
            pts[..=i].rotate_right(1);
        }
    }
    ball
}

fn exact_meb(points: ArrayView2<'_, f64>) -> Ball {
    let dim = points.ncols();
    let mut pts: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    // fixed shuffle: expected linear time without giving up determinism
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x006d_6562));
    let n = pts.len();
    let sphere = move_to_front(&mut pts, n, &mut Vec::with_capacity(dim + 1), dim);
    finish(points, Array1::from(sphere.center))
}

/// Re-derives the radius from the center so that containment is exact.
fn finish(points: ArrayView2<'_, f64>, center: Array1<f64>) -> Ball {
    let r2 = points
        .rows()
        .into_iter()
        .map(|p| p.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(0.0, f64::max);
    Ball {
        center,
        radius: r2.sqrt(),
    }
}

/// Frank-Wolfe on the dual of the MEB problem, stopped once the farthest
/// point lies within `(1 + delta)` of the dual radius.
pub fn coreset_meb(points: ArrayView2<'_, f64>, delta: f64) -> Ball {
    let n = points.nrows();
    let norms: Vec<f64> = points.rows().into_iter().map(|p| p.dot(&p)).collect();
    let far_from = |c: ArrayView1<'_, f64>| -> (usize, f64) {
        points
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (i, p.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    };

    let (a, _) = far_from(points.row(0));
    let (b, _) = far_from(points.row(a));
    let mut u = vec![0.0; n];
    u[a] += 0.5;
    u[b] += 0.5;
    let mut center = (&points.row(a) + &points.row(b)) * 0.5;
    let target = (1.0 + delta) * (1.0 + delta) - 1.0;

    for _ in 0..200_000 {
        let r2 = u.iter().zip(&norms).map(|(w, s)| w * s).sum::<f64>() - center.dot(&center);
        let (j, d2) = far_from(center.view());
        if r2 <= 0.0 {
            if d2 <= 0.0 {
                break;
            }
        } else {
            let gap = d2 / r2 - 1.0;
            if gap <= target {
                break;
            }
            let step = gap / (2.0 * (1.0 + gap));
            for w in u.iter_mut() {
                *w *= 1.0 - step;
            }
            u[j] += step;
            center = &center * (1.0 - step) + &(&points.row(j) * step);
            continue;
        }
        // all mass on coincident points but some point is elsewhere
        u.iter_mut().for_each(|w| *w = 0.0);
        u[j] = 0.5;
        let (k, _) = far_from(points.row(j));
        u[k] += 0.5;
        center = (&points.row(j) + &points.row(k)) * 0.5;
    }
    finish(points, center)
}
