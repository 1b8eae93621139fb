//! Seeded Monte Carlo checks of the geometric claims on random point clouds.
//!
//! Each trial derives its own generator from the master seed, so results do
//! not depend on the order in which trials run.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{meb, mc_shell_fraction, sample_unit_ball, shell_fraction, vc_hypothesis_count, TheoremReport};
use crate::error::Result;
use crate::kernel::{mmd_squared, KernelSpec};
use crate::represent::{assign, sq_dist, update_centers};

/// Independent generator for trial `trial` of stream `stream`.
pub fn trial_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(trial) << 20);
    ChaCha8Rng::seed_from_u64(rng.random())
}

fn random_unit<R: Rng>(m: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `n` points uniform in `[-10, 10]^m`.
pub fn random_cloud<R: Rng>(n: usize, m: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, m), || rng.random_range(-10.0..10.0))
}

/// Every closed half-space bounded by a hyperplane through the MEB center
/// must contain an input point on the ball's surface. Samples `trials`
/// random normals and counts those whose half-space has no point at
/// distance `>= R (1 - 1e-6)` from the center.
pub fn halfspace_surface_check(points: ArrayView2<'_, f64>, trials: usize, seed: u64) -> TheoremReport {
    const REL_TOL: f64 = 1e-6;
    let ball = meb(points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side_tol = 1e-12 * ball.radius.max(1.0);
    let mut violations = 0;
    let mut max_dev: f64 = 0.0;
    for _ in 0..trials {
        let normal = random_unit(points.ncols(), &mut rng);
        let best = points
            .rows()
            .into_iter()
            .filter(|p| (p - &ball.center).dot(&normal) >= -side_tol)
            .map(|p| sq_dist(p, ball.center.view()).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        // relative shortfall of the farthest point on the closed side
        let dev = if ball.radius > 0.0 {
            ((ball.radius - best) / ball.radius).max(0.0)
        } else if best.is_finite() {
            0.0
        } else {
            1.0
        };
        max_dev = max_dev.max(dev);
        if dev > REL_TOL {
            violations += 1;
        }
    }
    TheoremReport {
        theorem: "halfspace_surface_point".into(),
        trials,
        violations,
        max_deviation: max_dev,
        tolerance: REL_TOL,
    }
}

/// For every point `x_i` of the cloud with MEB `(C, R)`:
/// `max_j ‖x_i − x_j‖ ≤ 2R` and `max_j ‖x_i − x_j‖ ≤ ‖x_i − C‖ + R`,
/// both up to `1e-9 R`. `trials` counts points checked.
pub fn distance_bound_check(points: ArrayView2<'_, f64>) -> TheoremReport {
    let ball = meb(points);
    let tol = 1e-9 * ball.radius;
    let mut violations = 0;
    let mut max_dev = f64::NEG_INFINITY;
    for p in points.rows() {
        let farthest = points
            .rows()
            .into_iter()
            .map(|q| sq_dist(p, q).sqrt())
            .fold(0.0, f64::max);
        let to_center = sq_dist(p, ball.center.view()).sqrt();
        let dev = (farthest - 2.0 * ball.radius).max(farthest - (to_center + ball.radius));
        max_dev = max_dev.max(dev);
        if dev > tol {
            violations += 1;
        }
    }
    TheoremReport {
        theorem: "meb_distance_bounds".into(),
        trials: points.nrows(),
        violations,
        max_deviation: max_dev,
        tolerance: tol,
    }
}

fn merge(theorem: &str, tolerance: f64, parts: impl IntoIterator<Item = TheoremReport>) -> TheoremReport {
    let mut out = TheoremReport {
        theorem: theorem.into(),
        trials: 0,
        violations: 0,
        max_deviation: f64::NEG_INFINITY,
        tolerance,
    };
    for r in parts {
        out.trials += r.trials;
        out.violations += r.violations;
        out.max_deviation = out.max_deviation.max(r.max_deviation);
    }
    out
}

/// Half-space check over `clouds` random 2-D clouds of 30 points.
pub fn halfspace_suite(clouds: usize, normals: usize, seed: u64) -> TheoremReport {
    let parts: Vec<TheoremReport> = (0..clouds as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 1, t);
            let pts = random_cloud(30, 2, &mut rng);
            halfspace_surface_check(pts.view(), normals, rng.random())
        })
        .collect();
    merge("halfspace_surface_point", 1e-6, parts)
}

/// Distance-bound check over `clouds` random clouds, `n ≤ 100`, `m ≤ 4`.
pub fn distance_suite(clouds: usize, seed: u64) -> TheoremReport {
    let parts: Vec<TheoremReport> = (0..clouds as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 2, t);
            let n = rng.random_range(2..=100);
            let m = rng.random_range(1..=4);
            distance_bound_check(random_cloud(n, m, &mut rng).view())
        })
        .collect();
    // tolerances are relative to each cloud's radius; report the relative form
    merge("meb_distance_bounds", 1e-9, parts)
}

/// Monte Carlo shell fraction against `1 − (1+ε)^(−m)`; a violation is a
/// deviation above `tolerance`.
pub fn shell_suite(cases: &[(usize, f64)], samples: usize, tolerance: f64, seed: u64) -> Result<TheoremReport> {
    let mut max_dev: f64 = 0.0;
    let mut violations = 0;
    for (i, &(m, eps)) in cases.iter().enumerate() {
        let exact = shell_fraction(m, eps)?;
        let mc = mc_shell_fraction(m, eps, samples, seed.wrapping_add(i as u64))?;
        let dev = (mc - exact).abs();
        max_dev = max_dev.max(dev);
        if dev > tolerance {
            violations += 1;
        }
    }
    Ok(TheoremReport {
        theorem: "shell_fraction".into(),
        trials: cases.len(),
        violations,
        max_deviation: max_dev,
        tolerance,
    })
}

/// Hypothesis count against an independent Pascal-triangle tail sum
/// `1 + Σ_{i=ρ}^{n} C(n, i)` for all `1 ≤ ρ ≤ n ≤ max_n`.
pub fn vc_suite(max_n: u32) -> Result<TheoremReport> {
    let mut row: Vec<BigUint> = vec![BigUint::from(1u8)];
    let mut trials = 0;
    let mut violations = 0;
    for n in 1..=max_n {
        let mut next = vec![BigUint::from(1u8); n as usize + 1];
        for i in 1..n as usize {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
        for rho in 1..=n {
            let tail: BigUint = row[rho as usize..].iter().sum();
            let expect = tail + BigUint::from(1u8);
            trials += 1;
            if vc_hypothesis_count(n, rho)? != expect {
                violations += 1;
            }
        }
    }
    Ok(TheoremReport {
        theorem: "hypothesis_count".into(),
        trials,
        violations,
        max_deviation: 0.0,
        tolerance: 0.0,
    })
}

/// After a center update on random data, the linear-kernel MMD² between each
/// center and its cell must vanish.
pub fn center_mmd_suite(runs: usize, seed: u64) -> Result<TheoremReport> {
    const TOL: f64 = 1e-10;
    let lin = KernelSpec::linear();
    let mut trials = 0;
    let mut violations = 0;
    let mut max_dev: f64 = 0.0;
    for t in 0..runs as u64 {
        let mut rng = trial_rng(seed, 3, t);
        let n = rng.random_range(2..=40);
        let m = rng.random_range(1..=5);
        let k = rng.random_range(1..=n.min(6));
        let x = random_cloud(n, m, &mut rng);
        let init = random_cloud(k, m, &mut rng);
        let a = assign(x.view(), init.view())?;
        let centers = update_centers(x.view(), &a, init.view())?;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| a[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let cell = x.select(Axis(0), &members);
            let center = centers.select(Axis(0), &[c]);
            let v = mmd_squared(center.view(), cell.view(), &lin)?;
            trials += 1;
            max_dev = max_dev.max(v.abs());
            if v.abs() > TOL {
                violations += 1;
            }
        }
    }
    Ok(TheoremReport {
        theorem: "center_update_mmd".into(),
        trials,
        violations,
        max_deviation: max_dev,
        tolerance: TOL,
    })
}

/// For `balls` random balls filled with `points` uniform samples, the
/// linear-kernel MMD² of the MEB center to the sample never exceeds that of
/// a point on the MEB surface (`surface_points` random directions per ball).
pub fn center_vs_surface_suite(balls: usize, points: usize, surface_points: usize, seed: u64) -> Result<TheoremReport> {
    let lin = KernelSpec::linear();
    let mut trials = 0;
    let mut violations = 0;
    let mut max_dev = f64::NEG_INFINITY;
    for t in 0..balls as u64 {
        let mut rng = trial_rng(seed, 4, t);
        let m = rng.random_range(2..=3);
        let radius = rng.random_range(0.5..20.0);
        let shift: Array1<f64> = (0..m).map(|_| rng.random_range(-50.0..50.0)).collect();
        let mut s = Array2::zeros((points, m));
        for mut row in s.rows_mut() {
            row.assign(&(sample_unit_ball(m, &mut rng) * radius + &shift));
        }
        let ball = meb(s.view());
        let center = ball.center.clone().insert_axis(Axis(0));
        let at_center = mmd_squared(center.view(), s.view(), &lin)?;
        for _ in 0..surface_points {
            let p = (&ball.center + &(random_unit(m, &mut rng) * ball.radius)).insert_axis(Axis(0));
            let at_surface = mmd_squared(p.view(), s.view(), &lin)?;
            trials += 1;
            let dev = at_center - at_surface;
            max_dev = max_dev.max(dev);
            if dev > 0.0 {
                violations += 1;
            }
        }
    }
    Ok(TheoremReport {
        theorem: "center_vs_surface_mmd".into(),
        trials,
        violations,
        max_deviation: max_dev,
        tolerance: 0.0,
    })
}

/// Runs every check. `trials` scales the number of random half-space
/// normals per cloud and the Monte Carlo sample count.
pub fn verify_theory(trials: usize, seed: u64) -> Result<Vec<TheoremReport>> {
    let trials = trials.max(1);
    Ok(vec![
        vc_suite(20)?,
        halfspace_suite(50, trials, seed),
        distance_suite(100, seed),
        shell_suite(&[(2, 1.0), (3, 0.25), (5, 0.5)], trials.max(100) * 500, 0.02, seed)?,
        center_mmd_suite(100, seed)?,
        center_vs_surface_suite(20, 1000, 50, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unit_square_corners() {
        let sq = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let r = halfspace_surface_check(sq.view(), 1000, 5);
        assert_eq!(r.violations, 0);
        assert_eq!(r.trials, 1000);
    }

    #[test]
    fn two_points_never_violate() {
        let r = halfspace_surface_check(array![[-3.0, 1.0], [2.0, 4.0]].view(), 500, 9);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn diameter_is_tight_for_two_points() {
        let pts = array![[0.0, 0.0], [3.0, 4.0]];
        let r = distance_bound_check(pts.view());
        assert_eq!(r.violations, 0);
        assert!(r.max_deviation.abs() < 1e-12);
    }

    #[test]
    fn hexagon_bounds() {
        let pts = Array2::from_shape_fn((6, 2), |(i, j)| {
            let a = std::f64::consts::PI / 3.0 * i as f64;
            if j == 0 { a.cos() } else { a.sin() }
        });
        let r = distance_bound_check(pts.view());
        assert_eq!(r.violations, 0);
        // opposite vertices at distance 2 = |x - C| + R: tight
        assert!(r.max_deviation.abs() < 1e-12);
    }

    #[test]
    fn interior_point_is_never_farthest_from_everyone() {
        let r = distance_bound_check(array![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2]].view());
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn trial_streams_are_independent() {
        let a: f64 = trial_rng(1, 1, 0).random();
        let b: f64 = trial_rng(1, 1, 1).random();
        let c: f64 = trial_rng(1, 2, 0).random();
        let a2: f64 = trial_rng(1, 1, 0).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn small_suite_runs_clean() {
        let reports = verify_theory(20, 4).unwrap();
        assert_eq!(reports.len(), 6);
        for r in reports {
            assert!(r.passed(), "{r:?}");
        }
    }
}
