//! Complex linear algebra on the unit circle: steering vectors, Hermitian
//! Toeplitz maps, eigenvalue utilities, and trigonometric polynomials.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative tolerance for the Hermitian-symmetry check.
const HERMITIAN_TOL: f64 = 1e-10;

/// Steering vector `[1, e^{i2pi tau}, ..., e^{i2pi(n-1) tau}]`.
///
/// `tau` must lie in `[0, 1)`; the ambient dimension `n` must be positive.
pub fn atom(tau: f64, n: usize) -> Result<CVec> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::TauOutOfRange(tau));
    }
    if n == 0 {
        return Err(Error::ShapeMismatch("atom dimension must be positive".into()));
    }
    Ok(CVec::from_fn(n, |j, _| {
        C64::from_polar(1.0, std::f64::consts::TAU * tau * j as f64)
    }))
}

/// Hermitian Toeplitz matrix with first column `x`. The imaginary part of
/// `x[0]` is discarded so the diagonal is exactly real.
pub fn toeplitz(x: &CVec) -> CMat {
    let n = x.len();
    CMat::from_fn(n, n, |j, k| {
        if j == k {
            C64::new(x[0].re, 0.0)
        } else if j > k {
            x[j - k]
        } else {
            x[k - j].conj()
        }
    })
}

/// Adjoint of the Toeplitz map: sums the subdiagonals,
/// `T*(H)[j] = sum_m H[m+j, m]`, so `T*(H)[0]` is the trace.
pub fn toeplitz_adjoint(h: &CMat) -> Result<CVec> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    let n = h.nrows();
    Ok(CVec::from_fn(n, |j, _| (0..n - j).map(|m| h[(m + j, m)]).sum()))
}

/// Frobenius inner product `<A, B> = tr(B^H A)`.
pub fn fro_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Symmetrize to the nearest Hermitian matrix, `(H + H^H)/2`.
pub fn hermitize(h: &CMat) -> CMat {
    let mut out = (h + h.adjoint()).scale(0.5);
    for j in 0..out.nrows().min(out.ncols()) {
        out[(j, j)] = C64::new(out[(j, j)].re, 0.0);
    }
    out
}

fn max_abs(h: &CMat) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_hermitian(h: &CMat) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    let scale = max_abs(h);
    let asym = max_abs(&(h - h.adjoint()));
    if asym > HERMITIAN_TOL * scale.max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn hermitian_eig(h: &CMat) -> Result<(DVector<f64>, CMat)> {
    check_hermitian(h)?;
    let eig = SymmetricEigen::new(hermitize(h));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Euclidean projection onto the positive semidefinite cone: negative
/// eigenvalues are clamped to zero.
pub fn psd_project(h: &CMat) -> Result<CMat> {
    let (values, vectors) = hermitian_eig(h)?;
    let n = values.len();
    if values.iter().all(|&v| v >= 0.0) {
        return Ok(hermitize(h));
    }
    let mut scaled = vectors.clone();
    for j in 0..n {
        let lam = values[j].max(0.0);
        scaled.column_mut(j).scale_mut(lam);
    }
    Ok(hermitize(&(scaled * vectors.adjoint())))
}

/// A unit-norm vector in the kernel of `v`, which must be strictly wide
/// (fewer rows than columns) so the kernel is nonempty.
///
/// Deterministic: of the right singular vectors with singular value at most
/// `1e-10` times the largest, the one of smallest index is chosen, then the
/// phase is normalized so the first nonzero entry is real and positive.
pub fn nullspace_vector(v: &CMat) -> Result<CVec> {
    let (p, m) = (v.nrows(), v.ncols());
    if p >= m {
        return Err(Error::NullspaceEmpty { rows: p, cols: m });
    }
    let gram = hermitize(&(v.adjoint() * v));
    let (values, vectors) = hermitian_eig(&gram)?;
    let sigma_max = values[0].max(0.0).sqrt();
    let pick = (0..m)
        .find(|&i| values[i].max(0.0).sqrt() <= 1e-10 * sigma_max)
        .unwrap_or(m - 1);
    let mut u: CVec = vectors.column(pick).into();

    // Kernel directions from the Gram matrix are only accurate to the square
    // root of machine precision; project out the row space twice to push the
    // residual down to rounding level.
    if sigma_max > 0.0 {
        let svd = v.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd of nonzero matrix");
        for _ in 0..2 {
            for (i, &s) in svd.singular_values.iter().enumerate() {
                if s > 1e-13 * sigma_max {
                    let row = v_t.row(i);
                    let coef: C64 = row.iter().zip(u.iter()).map(|(r, x)| r * x).sum();
                    for (j, r) in row.iter().enumerate() {
                        u[j] -= r.conj() * coef;
                    }
                }
            }
        }
    }

    let norm = u.norm();
    if norm < 1e-14 {
        return Err(Error::EigFailure);
    }
    u.unscale_mut(norm);
    if let Some(first) = u.iter().find(|z| z.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        u.scale_mut(1.0);
        for z in u.iter_mut() {
            *z *= phase;
        }
    }
    Ok(u)
}

/// Eigenvalues of a small general complex matrix via its Schur form.
pub fn general_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Dual coefficients `q` solving `e0 - Kq = t` with `K = diag(1, 1/2, ..., 1/2)`:
/// `q[0] = 1 - t[0]`, `q[j] = -2 t[j]`.
pub fn q_from_adjoint(t: &CVec) -> CVec {
    CVec::from_fn(t.len(), |j, _| {
        if j == 0 {
            C64::new(1.0, 0.0) - t[0]
        } else {
            -2.0 * t[j]
        }
    })
}

/// Sign convention for the exponent of a trigonometric polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentSign {
    /// `sum_n c_n e^{-i 2 pi n tau}`; pairing a coefficient vector against
    /// the conjugated steering vector. Dual polynomials use this.
    Negative,
    /// `sum_n c_n e^{+i 2 pi n tau}`.
    Positive,
}

/// Trigonometric polynomial `tau -> sum_n c_n e^{sign i 2 pi n tau}`,
/// periodic with period 1.
#[derive(Debug, Clone)]
pub struct TrigPolynomial {
    pub coeffs: CVec,
    pub sign: ExponentSign,
}

impl TrigPolynomial {
    pub fn new(coeffs: CVec) -> Self {
        Self { coeffs, sign: ExponentSign::Negative }
    }

    pub fn with_sign(coeffs: CVec, sign: ExponentSign) -> Self {
        Self { coeffs, sign }
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluate by Horner recursion in `z = e^{sign i 2 pi tau}`. The
    /// argument is reduced to `[0, 1)` first, so evaluation at `tau` and
    /// `tau + 1` agrees to rounding.
    pub fn eval(&self, tau: f64) -> C64 {
        let t = tau - tau.floor();
        let angle = match self.sign {
            ExponentSign::Negative => -std::f64::consts::TAU * t,
            ExponentSign::Positive => std::f64::consts::TAU * t,
        };
        let z = C64::from_polar(1.0, angle);
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn eval_re(&self, tau: f64) -> f64 {
        self.eval(tau).re
    }

    /// Derivative with respect to `tau`, as another polynomial of the same
    /// convention: coefficient `n` picks up a factor `sign i 2 pi n`.
    pub fn derivative(&self) -> TrigPolynomial {
        let s = match self.sign {
            ExponentSign::Negative => -std::f64::consts::TAU,
            ExponentSign::Positive => std::f64::consts::TAU,
        };
        let coeffs = CVec::from_fn(self.coeffs.len(), |n, _| {
            self.coeffs[n] * C64::new(0.0, s * n as f64)
        });
        TrigPolynomial { coeffs, sign: self.sign }
    }

    /// Values on the uniform grid `{g/G : g = 0..G-1}`.
    pub fn eval_grid(&self, grid_size: usize) -> Vec<C64> {
        (0..grid_size)
            .map(|g| self.eval(g as f64 / grid_size as f64))
            .collect()
    }
}
