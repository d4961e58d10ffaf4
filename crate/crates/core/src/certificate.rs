//! Constructive dual certificates for compressed positive recovery.
//!
//! Given true frequencies and a compression row set `I` with more rows than
//! sources, a unit vector `u` in the kernel of the steering matrix
//! restricted to `I` yields dual polynomial coefficients
//! `q = K^{-1}(e0 - T*(p p^H))` with `p = P_I^H u`. By construction
//! `1 - Re Q(tau) = |P(tau)|^2` with `P(tau) = p^H a(tau)`, which is a
//! nonnegative trigonometric polynomial vanishing exactly on the kernel
//! constraints, so `Q` interpolates 1 at every true source and stays at or
//! below 1 everywhere. A verified certificate of this shape proves the
//! compressed program recovers the truth on the lags it determines.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{validate_compression, CompressionReport, IndexSet};
use crate::linalg::{
    atom, nullspace_vector, q_from_adjoint, CMat, CVec, ExponentSign, TrigPolynomial, C64,
};

/// Thresholds of the four numerical certificate conditions.
pub const NONCONSTANT_MIN_NORM: f64 = 1e-8;
pub const INTERPOLATION_TOL: f64 = 1e-9;
pub const SOS_TOL: f64 = 1e-9;
/// Uniform verification grid density per ambient dimension.
pub const DEFAULT_GRID_FACTOR: usize = 16;
const MIN_GRID_FACTOR: usize = 4;

/// A constructed dual certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Kernel vector on the compression rows.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub u: CVec,
    /// `u` scattered into the ambient dimension.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub p: CVec,
    /// Dual polynomial coefficients; supported on `{0}` and the co-array of
    /// the compression set, exactly zero elsewhere.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub q: CVec,
    pub report: CertificateReport,
}

impl Certificate {
    /// `Q(tau) = sum_n q_n e^{-i 2 pi n tau}`.
    pub fn dual_polynomial(&self) -> TrigPolynomial {
        TrigPolynomial::new(self.q.clone())
    }

    /// `P(tau) = p^H a(tau)`, the square factor of `1 - Re Q`.
    pub fn square_factor(&self) -> TrigPolynomial {
        let coeffs = CVec::from_fn(self.p.len(), |m, _| self.p[m].conj());
        TrigPolynomial::with_sign(coeffs, ExponentSign::Positive)
    }
}

/// Residuals of the four certificate conditions, each with its pass flag.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// `||q - e0||` must exceed a threshold: the constant polynomial
    /// certifies nothing.
    pub q_minus_e0_norm: f64,
    pub nonconstant: bool,
    /// Worst `|1 - Re Q(tau_k)|` over the true sources.
    pub interpolation_residual: f64,
    pub interpolates: bool,
    /// Norm of `q` off the observation set; exactly zero by construction
    /// when the co-array of the compression rows is observed.
    pub off_support_norm: f64,
    pub supported: bool,
    /// Worst `|(1 - Re Q) - |P|^2|` over the verification grid.
    pub sos_residual: f64,
    /// Smallest `1 - Re Q` over the verification grid.
    pub min_one_minus_re_q: f64,
    pub nonnegative: bool,
    pub grid_size: usize,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.nonconstant && self.interpolates && self.supported && self.nonnegative
    }
}

fn validate_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::HypothesisViolated("no sources given".into()));
    }
    for (k, &tau) in taus.iter().enumerate() {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::TauOutOfRange(tau));
        }
        for &other in &taus[..k] {
            let diff = (tau - other).abs();
            if diff.min(1.0 - diff) < 1e-12 {
                return Err(Error::HypothesisViolated(format!(
                    "sources {other} and {tau} coincide"
                )));
            }
        }
    }
    Ok(())
}

/// Construct the certificate for sources `taus` under compression rows
/// `i_set`. Requires `0` in the set and strictly fewer sources than rows.
/// The stored report verifies against the minimal observation set, the
/// co-array of `i_set`.
pub fn construct(taus: &[f64], i_set: &IndexSet) -> Result<Certificate> {
    validate_taus(taus)?;
    let n = i_set.ambient();
    let m = i_set.len();
    let p = taus.len();
    if !i_set.contains(0) {
        return Err(Error::HypothesisViolated("compression set must contain index 0".into()));
    }
    if p >= m {
        return Err(Error::HypothesisViolated(format!(
            "{p} sources but only {m} compression rows; need p < rows"
        )));
    }

    // Rows are conjugated steering vectors restricted to the compression set.
    let idx = i_set.indices();
    let mut v = CMat::zeros(p, m);
    for (k, &tau) in taus.iter().enumerate() {
        let a = atom(tau, n)?;
        for (col, &i) in idx.iter().enumerate() {
            v[(k, col)] = a[i].conj();
        }
    }
    let u = nullspace_vector(&v)?;
    let p_full = i_set.selection().embed(&u)?;

    // T*(p p^H) via pair sums over the compression rows: exact zeros off
    // the co-array.
    let mut t = CVec::zeros(n);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate().take(a + 1) {
            let contrib = u[a] * u[b].conj();
            if ia == ib {
                t[0] += C64::new(contrib.re, 0.0);
            } else {
                t[ia - ib] += contrib;
            }
        }
    }
    let q = q_from_adjoint(&t);

    let omega_min = i_set.difference_set();
    let report = verify_coefficients(&q, &p_full, taus, &omega_min, DEFAULT_GRID_FACTOR * n);
    Ok(Certificate { u, p: p_full, q, report })
}

/// Re-verify a certificate against an arbitrary observation set and grid.
/// The grid is clamped below to four points per ambient dimension.
pub fn verify(
    certificate: &Certificate,
    taus: &[f64],
    omega: &IndexSet,
    grid_size: usize,
) -> CertificateReport {
    verify_coefficients(&certificate.q, &certificate.p, taus, omega, grid_size)
}

fn verify_coefficients(
    q: &CVec,
    p: &CVec,
    taus: &[f64],
    omega: &IndexSet,
    grid_size: usize,
) -> CertificateReport {
    let n = q.len();
    let grid_size = grid_size.max(MIN_GRID_FACTOR * n);
    let q_poly = TrigPolynomial::new(q.clone());
    let p_coeffs = CVec::from_fn(p.len(), |m, _| p[m].conj());
    let p_poly = TrigPolynomial::with_sign(p_coeffs, ExponentSign::Positive);

    let mut q_minus_e0_sq = 0.0;
    for j in 0..n {
        let target = if j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        q_minus_e0_sq += (q[j] - target).norm_sqr();
    }
    let q_minus_e0_norm = q_minus_e0_sq.sqrt();

    let interpolation_residual = taus
        .iter()
        .map(|&tau| (1.0 - q_poly.eval_re(tau)).abs())
        .fold(0.0, f64::max);

    let mut off_sq = 0.0;
    for j in 0..n {
        if !omega.contains(j) {
            off_sq += q[j].norm_sqr();
        }
    }
    let off_support_norm = off_sq.sqrt();

    let mut sos_residual: f64 = 0.0;
    let mut min_one_minus_re_q = f64::INFINITY;
    let mut check = |tau: f64| {
        let gap = 1.0 - q_poly.eval_re(tau);
        let sq = p_poly.eval(tau).norm_sqr();
        sos_residual = sos_residual.max((gap - sq).abs());
        min_one_minus_re_q = min_one_minus_re_q.min(gap);
    };
    for g in 0..grid_size {
        check(g as f64 / grid_size as f64);
    }
    for &tau in taus {
        check(tau);
    }

    CertificateReport {
        q_minus_e0_norm,
        nonconstant: q_minus_e0_norm > NONCONSTANT_MIN_NORM,
        interpolation_residual,
        interpolates: interpolation_residual <= INTERPOLATION_TOL,
        off_support_norm,
        supported: off_support_norm == 0.0,
        sos_residual,
        min_one_minus_re_q,
        nonnegative: sos_residual <= SOS_TOL && min_one_minus_re_q >= -SOS_TOL,
        grid_size,
    }
}

/// Full certification outcome for a claimed recovery instance.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyOutcome {
    pub certified: bool,
    pub hypotheses: CompressionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

/// Certify that the compressed program with rows `i_set` and observations
/// `omega` recovers the positive mixture at `taus`: checks the hypotheses,
/// constructs the certificate, and verifies all four conditions.
pub fn certify_with_details(
    taus: &[f64],
    amplitudes: &[f64],
    i_set: &IndexSet,
    omega: &IndexSet,
) -> Result<CertifyOutcome> {
    if amplitudes.len() != taus.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} amplitudes for {} sources",
            amplitudes.len(),
            taus.len()
        )));
    }
    if let Some(&bad) = amplitudes.iter().find(|&&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::HypothesisViolated(format!(
            "amplitudes must be positive, got {bad}"
        )));
    }
    validate_taus(taus)?;
    if i_set.ambient() != omega.ambient() {
        return Err(Error::ShapeMismatch(format!(
            "compression ambient {} vs observation ambient {}",
            i_set.ambient(),
            omega.ambient()
        )));
    }

    let hypotheses = validate_compression(i_set, omega, taus.len());
    if !hypotheses.all_pass() {
        return Ok(CertifyOutcome { certified: false, hypotheses, certificate: None });
    }
    let mut certificate = construct(taus, i_set)?;
    certificate.report =
        verify(&certificate, taus, omega, DEFAULT_GRID_FACTOR * i_set.ambient());
    let certified = certificate.report.all_pass();
    Ok(CertifyOutcome { certified, hypotheses, certificate: Some(certificate) })
}

/// Boolean form of [`certify_with_details`].
pub fn certify_recovery(
    taus: &[f64],
    amplitudes: &[f64],
    i_set: &IndexSet,
    omega: &IndexSet,
) -> Result<bool> {
    Ok(certify_with_details(taus, amplitudes, i_set, omega)?.certified)
}
