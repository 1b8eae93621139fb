//! Evaluation classifiers: one-vs-rest kernel regularized least squares and
//! k-nearest neighbours, plus the error-rate metric.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};

use crate::error::{Result, ValError};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::represent::sq_dist;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Trained one-vs-rest RLSC model. Column `c` of `dual_weights` solves
/// `(K + λI) a = y⁺_c` with `y⁺_c` the ±1 encoding of class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlscModel {
    pub support_points: Array2<f64>,
    pub dual_weights: Array2<f64>,
    pub spec: KernelSpec,
    pub lambda: f64,
}

impl RlscModel {
    pub fn num_classes(&self) -> usize {
        self.dual_weights.ncols()
    }

    /// Decision values, one row per query point and one column per class.
    pub fn decision_values(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.support_points.ncols() {
            return Err(ValError::shape(format!(
                "model expects dimension {}, got {}",
                self.support_points.ncols(),
                x.ncols()
            )));
        }
        let c = self.num_classes();
        let mut out = Array2::zeros((x.nrows(), c));
        for (q, xq) in x.rows().into_iter().enumerate() {
            for (j, sj) in self.support_points.rows().into_iter().enumerate() {
                let k = self.spec.eval_unchecked(sj, xq);
                for cls in 0..c {
                    out[[q, cls]] += self.dual_weights[[j, cls]] * k;
                }
            }
        }
        Ok(out)
    }
}

/// Trains one-vs-rest RLSC. The class count is `max(y) + 1` unless
/// `num_classes` asks for more.
pub fn train_rlsc(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    spec: &KernelSpec,
    lambda: f64,
    num_classes: Option<usize>,
) -> Result<RlscModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ValError::config(format!("lambda must be > 0, got {lambda}")));
    }
    let t = x.nrows();
    if t == 0 {
        return Err(ValError::shape("training set is empty"));
    }
    if y.len() != t {
        return Err(ValError::shape(format!("{} labels for {t} points", y.len())));
    }
    let c = (y.iter().copied().max().unwrap_or(0) + 1).max(num_classes.unwrap_or(0));
    let k = kernel_matrix(x, spec)?;
    let mut a = DMatrix::from_fn(t, t, |i, j| k.entries[[i, j]]);
    for i in 0..t {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky().ok_or_else(|| {
        ValError::Domain("K + lambda I is not positive definite; increase lambda".into())
    })?;
    let mut weights = Array2::zeros((t, c));
    for cls in 0..c {
        let rhs = DVector::from_iterator(t, y.iter().map(|&yi| if yi == cls { 1.0 } else { -1.0 }));
        let sol = chol.solve(&rhs);
        for i in 0..t {
            weights[[i, cls]] = sol[i];
        }
    }
    Ok(RlscModel {
        support_points: x.to_owned(),
        dual_weights: weights,
        spec: *spec,
        lambda,
    })
}

/// Predicted labels and margins.
///
/// The label is the argmax decision value (ties to the lowest class id).
/// The margin is `|f|` for two classes and the gap between the two largest
/// decision values otherwise.
pub fn predict(model: &RlscModel, x: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Vec<f64>)> {
    let f = model.decision_values(x)?;
    let c = model.num_classes();
    let mut labels = Vec::with_capacity(x.nrows());
    let mut margins = Vec::with_capacity(x.nrows());
    for row in f.rows() {
        let mut top = (0, row[0]);
        let mut second = f64::NEG_INFINITY;
        for (cls, &v) in row.iter().enumerate().skip(1) {
            if v > top.1 {
                second = top.1;
                top = (cls, v);
            } else if v > second {
                second = v;
            }
        }
        labels.push(top.0);
        margins.push(match c {
            1 => row[0].abs(),
            2 => row[1].abs(),
            _ => top.1 - second,
        });
    }
    Ok((labels, margins))
}

/// Majority vote among the `k` nearest training points (Euclidean, ties in
/// distance to the lower index, ties in votes to the lower class id).
pub fn knn_predict(
    x_train: ArrayView2<'_, f64>,
    y_train: &[usize],
    x: ArrayView2<'_, f64>,
    k: usize,
) -> Result<Vec<usize>> {
    let t = x_train.nrows();
    if k == 0 || k > t {
        return Err(ValError::config(format!("k must lie in 1..={t}, got {k}")));
    }
    if y_train.len() != t {
        return Err(ValError::shape(format!("{} labels for {t} points", y_train.len())));
    }
    if x.ncols() != x_train.ncols() {
        return Err(ValError::shape("query and training dimensions differ"));
    }
    let c = y_train.iter().copied().max().unwrap_or(0) + 1;
    let mut out = Vec::with_capacity(x.nrows());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(t);
    for q in x.rows() {
        order.clear();
        order.extend(x_train.rows().into_iter().enumerate().map(|(i, p)| (sq_dist(p, q), i)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; c];
        for &(_, i) in &order[..k] {
            votes[y_train[i]] += 1;
        }
        let best = votes
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (cls, &v)| if v > acc.1 { (cls, v) } else { acc });
        out.push(best.0);
    }
    Ok(out)
}

/// Fraction of positions where `predicted` and `truth` differ.
pub fn error_rate(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(ValError::shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    #[test]
    fn single_point_model() {
        let m = train_rlsc(array![[1.0, 2.0]].view(), &[2], &KernelSpec::rbf(0.5), 1e-3, None).unwrap();
        let (labels, _) = predict(&m, array![[1.0, 2.0], [5.0, -3.0], [0.0, 0.0]].view()).unwrap();
        assert_eq!(labels, vec![2, 2, 2]);
    }

    #[test]
    fn two_point_linear_closed_form() {
        let x = array![[-1.0], [1.0]];
        let m = train_rlsc(x.view(), &[0, 1], &KernelSpec::linear(), 1e-6, None).unwrap();
        let f = m.decision_values(array![[0.0], [2.0]].view()).unwrap();
        assert_abs_diff_eq!(f[[0, 1]], 0.0, epsilon = 1e-4);
        assert!(f[[1, 1]] > 0.0);
        // closed form: a = (-1, 1) / (2 + λ) for class 1, so f(2) = 4 / (2 + λ)
        assert_abs_diff_eq!(f[[1, 1]], 4.0 / (2.0 + 1e-6), epsilon = 1e-9);
        let (labels, margins) = predict(&m, x.view()).unwrap();
        assert_eq!(labels, vec![0, 1]);
        let (_, zero) = predict(&m, array![[0.0]].view()).unwrap();
        assert_abs_diff_eq!(zero[0], 0.0, epsilon = 1e-12);
        assert!(margins.iter().all(|&v| v > 0.9));
    }

    #[test]
    fn retraining_is_bit_identical() {
        let x = array![[0.0, 1.0], [2.0, 0.5], [-1.0, -1.0], [3.0, 3.0]];
        let y = [0, 1, 2, 1];
        let spec = KernelSpec::rbf(0.3);
        let a = train_rlsc(x.view(), &y, &spec, 1e-3, None).unwrap();
        let b = train_rlsc(x.view(), &y, &spec, 1e-3, None).unwrap();
        let bits = |m: &RlscModel| m.dual_weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn bad_lambda() {
        let err = train_rlsc(array![[0.0]].view(), &[0], &KernelSpec::linear(), 0.0, None).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn prediction_shape_error() {
        let m = train_rlsc(array![[0.0, 1.0]].view(), &[0], &KernelSpec::linear(), 1.0, None).unwrap();
        assert!(matches!(predict(&m, array![[1.0]].view()), Err(ValError::Shape(_))));
    }

    #[test]
    fn knn_examples() {
        let xl = array![[0.0], [2.0]];
        assert_eq!(knn_predict(xl.view(), &[0, 1], array![[0.1]].view(), 1).unwrap(), vec![0]);
        assert_eq!(knn_predict(xl.view(), &[1, 0], array![[1.0]].view(), 1).unwrap(), vec![1]);
        assert_eq!(knn_predict(xl.view(), &[0, 1], array![[1.0]].view(), 1).unwrap(), vec![0]);
        let xl3 = array![[0.0], [1.0], [5.0]];
        let all = knn_predict(xl3.view(), &[1, 0, 1], array![[0.0], [-9.0], [100.0]].view(), 3).unwrap();
        assert_eq!(all, vec![1, 1, 1]);
        assert!(knn_predict(xl.view(), &[0, 1], array![[0.0]].view(), 3).unwrap_err().is_config());
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(error_rate(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(error_rate(&[1, 0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(error_rate(&[0, 0, 1, 1], &[0, 0, 1, 0]).unwrap(), 0.25);
        assert!(matches!(error_rate(&[0], &[0, 1]), Err(ValError::Shape(_))));
    }

    fn cloud() -> impl Strategy<Value = (Array2<f64>, Vec<usize>)> {
        (2usize..12).prop_flat_map(|t| {
            (
                proptest::collection::vec(-3.0f64..3.0, t * 2)
                    .prop_map(move |v| Array2::from_shape_vec((t, 2), v).unwrap()),
                proptest::collection::vec(0usize..3, t),
            )
        })
    }

    proptest! {
        #[test]
        fn solve_residual_is_small((x, y) in cloud(), lambda in 1e-3f64..10.0) {
            let spec = KernelSpec::rbf(0.5);
            let m = train_rlsc(x.view(), &y, &spec, lambda, None).unwrap();
            let k = kernel_matrix(x.view(), &spec).unwrap().entries;
            for cls in 0..m.num_classes() {
                let a = m.dual_weights.column(cls);
                let lhs = k.dot(&a) + &a * lambda;
                for (i, v) in lhs.iter().enumerate() {
                    let target = if y[i] == cls { 1.0 } else { -1.0 };
                    prop_assert!((v - target).abs() <= 1e-8 * 2.0);
                }
            }
        }

        #[test]
        fn decision_values_shrink_with_lambda((x, y) in cloud()) {
            let spec = KernelSpec::rbf(0.5);
            let y_norm = (y.len() as f64).sqrt();
            let mut prev = [f64::INFINITY; 3];
            for lambda in [0.1, 1.0, 10.0, 100.0, 1000.0] {
                let m = train_rlsc(x.view(), &y, &spec, lambda, None).unwrap();
                let f = m.decision_values(x.view()).unwrap();
                for (cls, p) in prev.iter_mut().enumerate().take(m.num_classes()) {
                    let size = f.column(cls).iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!(size <= *p * (1.0 + 1e-12) + 1e-12);
                    *p = size;
                    let a = m.dual_weights.column(cls).iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!(a <= y_norm / lambda * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn labels_and_margins_ignore_support_order((x, y) in cloud(), q in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let spec = KernelSpec::rbf(0.5);
            let m = train_rlsc(x.view(), &y, &spec, 1e-2, None).unwrap();
            let rev: Vec<usize> = (0..x.nrows()).rev().collect();
            let xr = x.select(Axis(0), &rev);
            let yr: Vec<usize> = rev.iter().map(|&i| y[i]).collect();
            let mr = train_rlsc(xr.view(), &yr, &spec, 1e-2, None).unwrap();
            let query = Array2::from_shape_vec((1, 2), q).unwrap();
            let (la, ma) = predict(&m, query.view()).unwrap();
            let (lb, mb) = predict(&mr, query.view()).unwrap();
            prop_assert!((ma[0] - mb[0]).abs() <= 1e-6 * (1.0 + ma[0].abs()));
            if ma[0] > 1e-6 {
                prop_assert_eq!(la, lb);
            }
        }

        #[test]
        fn argmax_ignores_positive_rescaling((x, y) in cloud(), scale in 0.01f64..100.0) {
            let spec = KernelSpec::rbf(0.5);
            let m = train_rlsc(x.view(), &y, &spec, 1e-2, None).unwrap();
            let mut scaled = m.clone();
            scaled.dual_weights.mapv_inplace(|v| v * scale);
            let (a, _) = predict(&m, x.view()).unwrap();
            let (b, _) = predict(&scaled, x.view()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
