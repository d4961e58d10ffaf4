//! Nonnegative least squares by the Lawson-Hanson active-set method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Minimize `||a x - b||_2` subject to `x >= 0`.
///
/// Inner unconstrained solves use an SVD with a relative cutoff, so nearly
/// collinear passive columns (common with fine frequency dictionaries) do
/// not derail the iteration.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if b.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "nnls: matrix has {m} rows but target has {} entries",
            b.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("nnls input"));
    }

    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale * b.norm().max(1.0);

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 30;

    for _ in 0..max_outer {
        let residual = b - a * &x;
        let w = a.transpose() * residual;
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let j_star = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j_star] = true;

        // Inner loop: retreat along the segment from x to the unconstrained
        // solution until the passive set is consistent.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_subproblem(a, b, &idx);
            if z.iter().all(|&v| v > tol) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= tol {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                // Degenerate step: drop the entering column and stop here.
                passive[j_star] = false;
                x[j_star] = 0.0;
                break;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }

    Ok(x)
}

fn solve_subproblem(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx.iter());
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-12).expect("svd solve")
}

/// Stack a complex system into an equivalent real one: rows carry the real
/// parts, then the imaginary parts. Solutions are constrained real, which is
/// exactly the nonnegative-amplitude model.
pub fn stack_complex_system(a: &CMat, b: &CVec) -> (DMatrix<f64>, DVector<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut ar = DMatrix::zeros(2 * m, n);
    let mut br = DVector::zeros(2 * m);
    for i in 0..m {
        for j in 0..n {
            ar[(i, j)] = a[(i, j)].re;
            ar[(m + i, j)] = a[(i, j)].im;
        }
        br[i] = b[i].re;
        br[m + i] = b[i].im;
    }
    (ar, br)
}

/// Solve `min ||a x - b||` over real `x >= 0` for complex `a`, `b`.
pub fn nnls_complex(a: &CMat, b: &CVec) -> Result<DVector<f64>> {
    let (ar, br) = stack_complex_system(a, b);
    nnls(&ar, &br)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{atom, C64};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x_true = DVector::from_vec(vec![2.0, 3.0]);
        let b = &a * &x_true;
        let x = nnls(&a, &b).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn clamps_negative_component() {
        // Unconstrained optimum is x = (-1): constrained answer is 0.
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = DVector::from_vec(vec![-1.0, 0.5]);
        let x = nnls(&a, &b).unwrap();
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn randomized_kkt_conditions() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..30 {
            let m = rng.random_range(4..12);
            let n = rng.random_range(2..10);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5);
            let b = DVector::from_fn(m, |_, _| rng.random::<f64>() - 0.5);
            let x = nnls(&a, &b).unwrap();
            assert!(x.iter().all(|&v| v >= 0.0));
            let grad = a.transpose() * (&a * &x - &b);
            for j in 0..n {
                if x[j] > 1e-9 {
                    assert!(grad[j].abs() < 1e-7, "stationarity violated: {}", grad[j]);
                } else {
                    assert!(grad[j] > -1e-7, "dual feasibility violated: {}", grad[j]);
                }
            }
        }
    }

    #[test]
    fn complex_stack_recovers_amplitudes() {
        let n = 16;
        let taus = [0.15, 0.62];
        let amps = [1.5, 0.7];
        let mut b = CVec::zeros(n);
        let mut cols = Vec::new();
        for (&tau, &c) in taus.iter().zip(amps.iter()) {
            let a = atom(tau, n).unwrap();
            b += a.scale(c);
            cols.push(a);
        }
        let a = CMat::from_columns(&cols);
        let x = nnls_complex(&a, &b).unwrap();
        assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 0.7, epsilon = 1e-8);
        let _ = C64::new(0.0, 0.0);
    }
}
