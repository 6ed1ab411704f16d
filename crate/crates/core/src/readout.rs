//! Linear readout trained by Moore-Penrose pseudoinverse, and NRMSE scoring.

use std::io::Write;

use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::engine::StateMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl TargetStats {
    pub fn of<T: Scalar>(values: impl IntoIterator<Item = T>) -> Self {
        let v: Vec<f64> = values.into_iter().map(|x| x.to_f64_lossy()).collect();
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel<T: Scalar> {
    /// `P x (rows of the state matrix)`.
    pub w_out: DMatrix<T>,
    pub target_stats: TargetStats,
}

/// Minimum-norm least-squares solution of `W X = Y` via SVD of `X^T`.
///
/// The SVD is checked against `X^T`; nalgebra occasionally returns a
/// factorization that does not reconstruct its input, and then the solution
/// is taken from the eigendecomposition of `X X^T` instead.
pub fn solve_min_norm<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    if x.ncols() == 0 || x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::ShapeMismatch("empty state or target matrix".into()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "state matrix has {} columns, targets have {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let xt = x.transpose();
    let scale = xt.norm();
    if scale == T::zero() {
        return Ok(DMatrix::zeros(y.nrows(), x.nrows()));
    }
    let tol = Float::sqrt(<T as Float>::epsilon()) * scale;

    let svd = xt.clone().svd(true, true);
    if let (Some(u), Some(v_t)) = (&svd.u, &svd.v_t) {
        let rebuilt = u * DMatrix::from_diagonal(&svd.singular_values) * v_t;
        if (rebuilt - &xt).norm() <= tol {
            let sigma_max = svd
                .singular_values
                .iter()
                .copied()
                .fold(T::zero(), Float::max);
            let sol = svd
                .solve(&y.transpose(), sigma_max * T::lit(PINV_RTOL))
                .map_err(|e| Error::Decomposition(e.to_string()))?;
            return Ok(sol.transpose());
        }
    }
    solve_min_norm_gram(x, y)
}

/// `W = Y X^T (X X^T)^+` from the symmetric eigendecomposition of the Gram
/// matrix. Squaring the condition number limits the usable cutoff to about
/// `sqrt(eps)` in singular-value terms.
fn solve_min_norm_gram<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    let gram = x * x.transpose();
    let eig = gram.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let rebuilt = q * DMatrix::from_diagonal(&eig.eigenvalues) * q.transpose();
    if (rebuilt - &gram).norm() > Float::sqrt(<T as Float>::epsilon()) * gram.norm() {
        return Err(Error::Decomposition(
            "neither SVD nor Gram eigendecomposition reconstructs the state matrix".into(),
        ));
    }
    let lambda_max = eig.eigenvalues.iter().copied().fold(T::zero(), Float::max);
    let cutoff = lambda_max * <T as Float>::epsilon() * T::from_count(gram.nrows() * 16);
    let inv = eig
        .eigenvalues
        .map(|l| if l > cutoff { T::one() / l } else { T::zero() });
    let gram_pinv = q * DMatrix::from_diagonal(&inv) * q.transpose();
    Ok(y * x.transpose() * gram_pinv)
}

/// Trains `w_out = Y X^+` on `states` (rows x T) against `targets` (P x T).
pub fn train<T: Scalar>(states: &DMatrix<T>, targets: &DMatrix<T>) -> Result<ReadoutModel<T>> {
    let w_out = solve_min_norm(states, targets)?;
    Ok(ReadoutModel {
        w_out,
        target_stats: TargetStats::of(targets.iter().copied()),
    })
}

/// `y_n = W_out x_n` for every column.
pub fn predict<T: Scalar>(model: &ReadoutModel<T>, states: &DMatrix<T>) -> Result<DMatrix<T>> {
    if model.w_out.ncols() != states.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} state rows, got {}",
            model.w_out.ncols(),
            states.nrows()
        )));
    }
    Ok(&model.w_out * states)
}

pub fn predict_states<T: Scalar>(
    model: &ReadoutModel<T>,
    states: &StateMatrix<T>,
) -> Result<DMatrix<T>> {
    predict(model, states.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Std,
    Range,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(Self::Std),
            "range" => Ok(Self::Range),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rmse: f64,
    pub nrmse: f64,
    pub normalization: Normalization,
}

/// RMSE divided by the population std (or range) of `targets`.
pub fn nrmse<T: Scalar>(
    predictions: &[T],
    targets: &[T],
    normalization: Normalization,
) -> Result<Score> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.len() < 2 {
        return Err(Error::ShapeMismatch(
            "nrmse needs at least 2 samples".into(),
        ));
    }
    let n = targets.len() as f64;
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let d = p.to_f64_lossy() - t.to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        / n;
    let rmse = mse.sqrt();
    let stats = TargetStats::of(targets.iter().copied());
    let scale = match normalization {
        Normalization::Std => stats.std,
        Normalization::Range => stats.max - stats.min,
    };
    if !(scale > 0.0) {
        return Err(Error::ZeroNormalizer);
    }
    Ok(Score {
        rmse,
        nrmse: rmse / scale,
        normalization,
    })
}

/// JSON form of a trained readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutFile {
    pub w_out: Vec<Vec<f64>>,
    pub target_stats: TargetStats,
}

impl<T: Scalar> ReadoutModel<T> {
    pub fn to_file(&self) -> ReadoutFile {
        ReadoutFile {
            w_out: self
                .w_out
                .row_iter()
                .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            target_stats: self.target_stats,
        }
    }

    pub fn from_file(file: &ReadoutFile) -> Result<Self> {
        let rows = file.w_out.len();
        let cols = file.w_out.first().map_or(0, Vec::len);
        if file.w_out.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged w_out".into()));
        }
        Ok(Self {
            w_out: DMatrix::from_fn(rows, cols, |i, j| T::lit(file.w_out[i][j])),
            target_stats: file.target_stats,
        })
    }
}

/// Writes `index,target,prediction` rows.
pub fn write_predictions_csv<T: Scalar, W: Write>(
    targets: &[T],
    predictions: &[T],
    mut out: W,
) -> Result<()> {
    writeln!(out, "index,target,prediction")?;
    for (i, (t, p)) in targets.iter().zip(predictions).enumerate() {
        writeln!(
            out,
            "{i},{:.16e},{:.16e}",
            t.to_f64_lossy(),
            p.to_f64_lossy()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn survives_svd_that_does_not_reconstruct() {
        // nalgebra's SVD returns a wrong factorization for this matrix
        #[rustfmt::skip]
        let x = DMatrix::from_row_slice(7, 13, &[
            1., 1., 1., 1., 1., 1., 1., 1., 1., 1., 1., 1., 1.,
            4., 1., 3., 2., 2., 1., 3., 0., 0., 2., 5., 5., 1.,
            4., 2., 5., 5., 3., 1., 1., 0., 0., 1., 5., 3., 1.,
            4., 4., 1., 4., 4., 3., 2., 0., 4., 4., 3., 4., 2.,
            4., 2., 3., 2., 0., 5., 4., 5., 0., 5., 5., 3., 0.,
            5., 1., 4., 2., 0., 4., 1., 2., 3., 4., 1., 5., 5.,
            5., 3., 1., 5., 2., 3., 4., 4., 0., 2., 0., 0., 5.,
        ]);
        let y = DMatrix::from_fn(1, 13, |_, j| ((j * 7 % 13) as f64 - 6.0) / 6.0);
        let w = solve_min_norm(&x, &y).unwrap();
        let normal = (&x * x.transpose())
            .cholesky()
            .unwrap()
            .solve(&(&x * y.transpose()))
            .transpose();
        assert!((&w - &normal).abs().max() < 1e-9);
    }

    #[test]
    fn recovers_known_weights_on_square_system() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.5, -2.0, 3.0, 4.0, 0.1, -1.0]);
        let w = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 2.5, 1.0, 0.0, -0.7]);
        let y = &w * &x;
        let model = train(&x, &y).unwrap();
        assert!((&model.w_out - &w).abs().max() < 1e-8);
        let back = predict(&model, &x).unwrap();
        assert!((&back - &y).abs().max() < 1e-8);
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 3.0, 0.0, 2.0, 5.0]);
        let y = DMatrix::zeros(1, 4);
        let model = train(&x, &y).unwrap();
        assert!(model.w_out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_row_stays_finite_and_splits_weight() {
        let x = DMatrix::from_row_slice(
            3,
            5,
            &[
                1.0, 1.0, 1.0, 1.0, 1.0, //
                0.0, 1.0, 2.0, 3.0, 4.0, //
                0.0, 1.0, 2.0, 3.0, 4.0,
            ],
        );
        let y = DMatrix::from_row_slice(1, 5, &[1.0, 3.0, 5.0, 7.0, 9.0]);
        let model = train(&x, &y).unwrap();
        assert!(model.w_out.iter().all(|v| v.is_finite()));
        // minimum norm splits the slope evenly across the duplicates
        assert_abs_diff_eq!(model.w_out[(0, 1)], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(model.w_out[(0, 2)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn predict_examples() {
        let model = ReadoutModel {
            w_out: DMatrix::from_row_slice(1, 3, &[0.25, 2.0, -1.0]),
            target_stats: TargetStats::of([0.0f64]),
        };
        let bias_only = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(predict(&model, &bias_only).unwrap()[(0, 0)], 0.25);
        let zero = ReadoutModel {
            w_out: DMatrix::<f64>::zeros(1, 3),
            ..model.clone()
        };
        assert!(predict(&zero, &bias_only)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(predict(&model, &DMatrix::<f64>::zeros(2, 1)).is_err());
    }

    #[test]
    fn shape_errors() {
        let x = DMatrix::<f64>::zeros(2, 3);
        assert!(train(&x, &DMatrix::zeros(1, 4)).is_err());
        assert!(train(&DMatrix::<f64>::zeros(0, 0), &DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn nrmse_examples() {
        let t = [1.0, 2.0, 3.0, 6.0];
        assert_eq!(nrmse(&t, &t, Normalization::Std).unwrap().nrmse, 0.0);
        let mean = [3.0; 4];
        assert_abs_diff_eq!(
            nrmse(&mean, &t, Normalization::Std).unwrap().nrmse,
            1.0,
            epsilon = 1e-12
        );
        let s = nrmse(&[0.5, 0.5], &[0.0, 1.0], Normalization::Range).unwrap();
        assert_abs_diff_eq!(s.rmse, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.nrmse, 0.5, epsilon = 1e-15);
        assert!(matches!(
            nrmse(&[1.0, 1.0], &[2.0, 2.0], Normalization::Std),
            Err(Error::ZeroNormalizer)
        ));
        assert!(nrmse(&[1.0], &[2.0], Normalization::Std).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let model = ReadoutModel {
            w_out: DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -7.25, 1e-300]),
            target_stats: TargetStats::of([1.0f64, 2.0]),
        };
        let text = serde_json::to_string(&model.to_file()).unwrap();
        let back = ReadoutModel::<f64>::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #[test]
        fn nrmse_shift_invariant(vals in proptest::collection::vec(-5.0f64..5.0, 3..30), shift in -100.0f64..100.0) {
            let preds: Vec<f64> = vals.iter().map(|v| v * 0.9 + 0.1).collect();
            let t0 = nrmse(&preds, &vals, Normalization::Std);
            prop_assume!(t0.is_ok());
            let ps: Vec<f64> = preds.iter().map(|v| v + shift).collect();
            let ts: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let t1 = nrmse(&ps, &ts, Normalization::Std).unwrap();
            prop_assert!((t0.unwrap().nrmse - t1.nrmse).abs() < 1e-8);
        }

        #[test]
        fn predict_is_linear(
            w in proptest::collection::vec(-3.0f64..3.0, 4),
            a in proptest::collection::vec(-3.0f64..3.0, 8),
            b in proptest::collection::vec(-3.0f64..3.0, 8),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let model = ReadoutModel { w_out: DMatrix::from_row_slice(1, 4, &w), target_stats: TargetStats::of([0.0f64]) };
            let xa = DMatrix::from_column_slice(4, 2, &a);
            let xb = DMatrix::from_column_slice(4, 2, &b);
            let lhs = predict(&model, &(&xa * alpha + &xb * beta)).unwrap();
            let rhs = predict(&model, &xa).unwrap() * alpha + predict(&model, &xb).unwrap() * beta;
            prop_assert!((lhs - rhs).abs().max() < 1e-9);
        }
    }
}
