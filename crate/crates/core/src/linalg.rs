//! Small dense linear algebra for the data generator and the linear probes.

use crate::tensor::Array;

/// Orthonormal basis of the column space of a full-column-rank `m×k` matrix
/// (modified Gram-Schmidt, two passes).
pub fn orthonormal_columns(a: &Array<f64>) -> Array<f64> {
    let (m, k) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    for j in 0..k {
        for _ in 0..2 {
            for q in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let dot: f64 = done[q].iter().zip(&rest[0]).map(|(x, y)| x * y).sum();
                for (x, y) in rest[0].iter_mut().zip(&done[q]) {
                    *x -= dot * y;
                }
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "matrix is rank deficient");
        for x in &mut cols[j] {
            *x /= norm;
        }
    }
    let mut out = Array::zeros(&[m, k]);
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

/// Solves `A X = B` for symmetric positive definite `A` (`n×n`), `B: n×r`.
/// Returns `None` when the factorization breaks down.
pub fn cholesky_solve(a: &Array<f64>, b: &Array<f64>) -> Option<Array<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let r = b.cols();
    let mut x = b.clone();
    for c in 0..r {
        // forward: L y = b
        for i in 0..n {
            let mut s = x.get(i, c);
            for p in 0..i {
                s -= l[i * n + p] * x.get(p, c);
            }
            x.set(i, c, s / l[i * n + i]);
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for p in i + 1..n {
                s -= l[p * n + i] * x.get(p, c);
            }
            x.set(i, c, s / l[i * n + i]);
        }
    }
    Some(x)
}

/// Ridge regression with an unpenalized intercept. Returns the
/// `(d+1) × r` coefficient matrix, intercept in the last row.
pub fn ridge_fit(x: &Array<f64>, y: &Array<f64>, reg: f64) -> Option<Array<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let r = y.cols();
    let design = with_intercept(x);
    let mut gram = Array::zeros(&[d + 1, d + 1]);
    let mut rhs = Array::zeros(&[d + 1, r]);
    for i in 0..n {
        let row = design.row(i);
        for a in 0..=d {
            for b in 0..=a {
                let v = gram.get(a, b) + row[a] * row[b];
                gram.set(a, b, v);
            }
            for c in 0..r {
                let v = rhs.get(a, c) + row[a] * y.get(i, c);
                rhs.set(a, c, v);
            }
        }
    }
    for a in 0..=d {
        for b in 0..a {
            let v = gram.get(a, b);
            gram.set(b, a, v);
        }
    }
    for a in 0..d {
        let v = gram.get(a, a) + reg;
        gram.set(a, a, v);
    }
    // tiny jitter on the intercept keeps constant features solvable
    let v = gram.get(d, d) + 1e-12;
    gram.set(d, d, v);
    cholesky_solve(&gram, &rhs)
}

pub fn ridge_predict(x: &Array<f64>, coef: &Array<f64>) -> Array<f64> {
    let design = with_intercept(x);
    let (n, k) = (design.rows(), design.cols());
    let r = coef.cols();
    let data = crate::tensor::matmul_nn(design.data(), coef.data(), n, k, r);
    Array::from_shape_vec(&[n, r], data).expect("positive dims")
}

fn with_intercept(x: &Array<f64>) -> Array<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut data = Vec::with_capacity(n * (d + 1));
    for i in 0..n {
        data.extend_from_slice(x.row(i));
        data.push(1.0);
    }
    Array::from_shape_vec(&[n, d + 1], data).expect("positive dims")
}

/// Pooled coefficient of determination over all target columns:
/// `1 - Σ residual² / Σ (y - ȳ_col)²`.
pub fn r_squared(y: &Array<f64>, y_hat: &Array<f64>) -> f64 {
    let (n, r) = (y.rows(), y.cols());
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for c in 0..r {
        let mean = (0..n).map(|i| y.get(i, c)).sum::<f64>() / n as f64;
        for i in 0..n {
            ss_res += (y.get(i, c) - y_hat.get(i, c)).powi(2);
            ss_tot += (y.get(i, c) - mean).powi(2);
        }
    }
    if ss_tot == 0.0 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal() {
        let a = Array::from_rows(&[[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]]);
        let q = orthonormal_columns(&a);
        for i in 0..2 {
            for j in 0..2 {
                let dot: f64 = (0..3).map(|r| q.get(r, i) * q.get(r, j)).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ridge_recovers_exact_linear_map() {
        let x = Array::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 3.0]]);
        let y = Array::from_rows(&x.data().chunks(2).map(|r| [2.0 * r[0] - r[1] + 0.5]).collect::<Vec<_>>());
        let coef = ridge_fit(&x, &y, 1e-10).unwrap();
        assert!((coef.get(0, 0) - 2.0).abs() < 1e-8);
        assert!((coef.get(1, 0) + 1.0).abs() < 1e-8);
        assert!((coef.get(2, 0) - 0.5).abs() < 1e-8);
        assert!((r_squared(&y, &ridge_predict(&x, &coef)) - 1.0).abs() < 1e-12);
    }
}
