use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// One cascade stage: `update = intercept + weights^T * features`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStage {
    /// `D x M`, feature dimension by output dimension.
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
}

impl LinearStage {
    pub fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        let f = DVector::from_column_slice(features);
        (self.weights.tr_mul(&f) + &self.intercept)
            .iter()
            .copied()
            .collect()
    }
}

/// Ridge least squares with an unpenalized intercept:
/// `min |Y - X W - 1 b^T|^2 + lambda |W|^2`.
///
/// With `lambda == 0` a rank-deficient design is reported as
/// [`Error::SingularSystem`] instead of being silently regularized.
pub fn fit_ridge_stage(
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    lambda: f64,
    stage: usize,
) -> Result<LinearStage> {
    let n = features.nrows();
    if n == 0 || targets.nrows() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: targets.nrows(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge strength {lambda}")));
    }
    let x_mean = features.row_mean().transpose();
    let y_mean = targets.row_mean().transpose();
    let mut xc = features.clone();
    for mut row in xc.row_iter_mut() {
        row -= x_mean.transpose();
    }
    let mut yc = targets.clone();
    for mut row in yc.row_iter_mut() {
        row -= y_mean.transpose();
    }

    let d = features.ncols();
    let mut gram = xc.tr_mul(&xc);
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let rhs = xc.tr_mul(&yc);
    let chol = Cholesky::new(gram).ok_or(Error::SingularSystem { stage })?;
    if lambda == 0.0 {
        let l = chol.l_dirty();
        let min_pivot = (0..d).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-12 * scale {
            return Err(Error::SingularSystem { stage });
        }
    }
    let weights = chol.solve(&rhs);
    let intercept = &y_mean - weights.tr_mul(&x_mean);
    Ok(LinearStage { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss-Jordan elimination with partial pivoting on the augmented normal
    /// equations `[X 1]^T [X 1] + diag(lambda, .., lambda, 0)`.
    fn brute_force_ridge(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = x[0].len();
        let m = y[0].len();
        let p = d + 1;
        let aug = |row: &Vec<f64>| {
            let mut r = row.clone();
            r.push(1.0);
            r
        };
        let mut a = vec![vec![0.0; p + m]; p];
        for (xr, yr) in x.iter().zip(y) {
            let xa = aug(xr);
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += xa[i] * xa[j];
                }
                for j in 0..m {
                    a[i][p + j] += xa[i] * yr[j];
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate().take(d) {
            row[i] += lambda;
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let div = a[col][col];
            for v in a[col].iter_mut() {
                *v /= div;
            }
            for r in 0..p {
                if r != col {
                    let f = a[r][col];
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let w = (0..d).map(|i| a[i][p..].to_vec()).collect();
        let b = a[d][p..].to_vec();
        (w, b)
    }

    fn instance() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let x = vec![
            vec![0.3, 1.2, -0.5],
            vec![1.1, -0.4, 0.9],
            vec![-0.7, 0.8, 0.2],
            vec![0.5, 0.5, -1.3],
            vec![2.0, -1.1, 0.4],
        ];
        let y = vec![
            vec![1.0, -0.2],
            vec![0.4, 0.9],
            vec![-0.6, 0.3],
            vec![0.2, -1.4],
            vec![1.7, 0.8],
        ];
        (x, y)
    }

    fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn matches_brute_force_solver() {
        let (x, y) = instance();
        for lambda in [0.0, 0.1, 1.0, 10.0] {
            let stage = fit_ridge_stage(&to_matrix(&x), &to_matrix(&y), lambda, 0).unwrap();
            let (w, b) = brute_force_ridge(&x, &y, lambda);
            for i in 0..3 {
                for j in 0..2 {
                    let rel = (stage.weights[(i, j)] - w[i][j]).abs() / w[i][j].abs().max(1e-12);
                    assert!(rel <= 1e-8, "lambda {lambda} w[{i}][{j}] rel {rel}");
                }
            }
            for j in 0..2 {
                let rel = (stage.intercept[j] - b[j]).abs() / b[j].abs().max(1e-12);
                assert!(rel <= 1e-8, "lambda {lambda} b[{j}] rel {rel}");
            }
        }
    }

    #[test]
    fn strong_ridge_returns_mean_target() {
        let (x, y) = instance();
        let stage = fit_ridge_stage(&to_matrix(&x), &to_matrix(&y), 1e12, 0).unwrap();
        assert!(stage.weights.iter().all(|w| w.abs() < 1e-9));
        let mean0 = y.iter().map(|r| r[0]).sum::<f64>() / 5.0;
        assert!((stage.intercept[0] - mean0).abs() < 1e-9);
        let out = stage.apply(&[5.0, -3.0, 2.0]);
        assert!((out[0] - mean0).abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let (mut x, y) = instance();
        for row in &mut x {
            row[2] = 2.0 * row[0] - row[1];
        }
        assert!(matches!(
            fit_ridge_stage(&to_matrix(&x), &to_matrix(&y), 0.0, 3),
            Err(Error::SingularSystem { stage: 3 })
        ));
        assert!(fit_ridge_stage(&to_matrix(&x), &to_matrix(&y), 0.5, 3).is_ok());
    }
}
