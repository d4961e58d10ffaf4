//! Turning solver output into source lists: peak extraction from the dual
//! polynomial, moment factorization of the recovered Toeplitz matrix, and
//! matching estimated sources to ground truth on the unit circle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{atom, general_eigenvalues, hermitian_eig, toeplitz, CMat, CVec};
use crate::nnls::nnls_complex;

/// Dual peaks at or above this level count as sources when data is exact.
pub const EXACT_PEAK_THRESHOLD: f64 = 1.0 - 1e-6;
/// Looser level for denoised solves on empirical statistics.
pub const NOISY_PEAK_THRESHOLD: f64 = 1.0 - 1e-2;
/// Eigenvalue cutoff relative to the largest, exact data.
pub const EXACT_RANK_TOL: f64 = 1e-8;
/// Eigenvalue cutoff for empirical covariances.
pub const NOISY_RANK_TOL: f64 = 1e-2;

/// How a [`SourceEstimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMethod {
    /// Maxima of the real part of the dual polynomial.
    DualPeaks,
    /// Eigendecomposition of the recovered Toeplitz matrix plus a matrix
    /// pencil on the signal subspace.
    MomentFactorization,
    /// Nonnegative least squares on a fixed frequency grid.
    Grid,
}

/// A list of recovered sources, sorted by frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceEstimate {
    pub taus: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub method: RecoveryMethod,
    /// Residual of the amplitude fit against the data the estimate was
    /// computed from; zero when no fit was performed.
    pub residual: f64,
}

impl SourceEstimate {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Two-column CSV with header, one row per source.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,amplitude\n");
        for (tau, amp) in self.taus.iter().zip(&self.amplitudes) {
            out.push_str(&format!("{tau:.17},{amp:.17}\n"));
        }
        out
    }
}

/// Distance between two points of the unit-circumference circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Locate maxima of `Re Q` on a uniform grid, keep those at or above
/// `threshold`, and sharpen each by parabolic interpolation of the three
/// neighbouring samples. Peaks closer than half an atom width `1/(2N)` are
/// merged, strongest first. A constant polynomial has no peaks.
pub fn peaks_of_dual(q: &CVec, grid_size: usize, threshold: f64) -> Vec<f64> {
    let n = q.len();
    if n == 0 {
        return Vec::new();
    }
    let g = grid_size.max(8);
    let poly = crate::linalg::TrigPolynomial::new(q.clone());
    let vals: Vec<f64> = (0..g).map(|i| poly.eval_re(i as f64 / g as f64)).collect();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        return Vec::new();
    }

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..g {
        let prev = vals[(i + g - 1) % g];
        let next = vals[(i + 1) % g];
        let here = vals[i];
        if here < prev || here < next {
            continue;
        }
        // Vertex of the parabola through the three samples; offset is in
        // grid cells and bounded by half a cell for a true local maximum.
        // The threshold is applied to the refined value so a peak sampled
        // slightly off its apex is not lost.
        let denom = prev - 2.0 * here + next;
        let delta = if denom.abs() > 1e-300 {
            (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let tau = ((i as f64 + delta) / g as f64).rem_euclid(1.0);
        let tau = if tau >= 1.0 { 0.0 } else { tau };
        let value = poly.eval_re(tau).max(here);
        if value >= threshold {
            candidates.push((value, tau));
        }
    }

    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let min_sep = 1.0 / (2.0 * n as f64);
    let mut taus: Vec<f64> = Vec::new();
    for &(_, tau) in &candidates {
        if taus.iter().all(|&kept| circle_distance(kept, tau) >= min_sep) {
            taus.push(tau);
        }
    }
    taus.sort_by(f64::total_cmp);
    taus
}

/// Factor a positive Toeplitz moment vector into atoms: eigendecompose
/// `T(x)`, read the numerical rank against `rank_tol` times the largest
/// eigenvalue, rotate the signal subspace onto itself shifted by one row to
/// extract the frequencies, then fit nonnegative amplitudes.
///
/// Errors if the matrix is decisively indefinite at the given tolerance.
pub fn vandermonde_decompose(x_hat: &CVec, rank_tol: f64) -> Result<SourceEstimate> {
    let m = x_hat.len();
    if m == 0 {
        return Err(Error::InvalidProblem("empty moment vector".into()));
    }
    let t = toeplitz(x_hat);
    let (eigvals, eigvecs) = hermitian_eig(&t)?;
    let lambda_max = eigvals[0].max(0.0);
    let cut = rank_tol * lambda_max;
    if eigvals[m - 1] < -cut.max(rank_tol) {
        return Err(Error::NotPsd(eigvals[m - 1]));
    }
    let mut rank = eigvals.iter().filter(|&&l| l > cut).count();
    if rank == 0 {
        return Ok(SourceEstimate {
            taus: Vec::new(),
            amplitudes: Vec::new(),
            method: RecoveryMethod::MomentFactorization,
            residual: x_hat.norm(),
        });
    }
    if m == 1 {
        return Err(Error::InvalidProblem(
            "one moment fixes total power but no frequency".into(),
        ));
    }
    // An M x M Toeplitz matrix identifies at most M-1 atoms.
    rank = rank.min(m - 1);

    // Signal subspace, split into rows 0..M-1 and 1..M; the pencil solving
    // U1 psi = U2 has the atom phases as eigenvalues.
    let u_sig = eigvecs.columns(0, rank).into_owned();
    let u1 = u_sig.rows(0, m - 1).into_owned();
    let u2 = u_sig.rows(1, m - 1).into_owned();
    let svd = u1.svd(true, true);
    let psi = svd
        .solve(&u2, 1e-12 * svd.singular_values.max().max(1.0))
        .map_err(|_| Error::EigFailure)?;
    let phases = general_eigenvalues(&psi)?;

    let mut taus: Vec<f64> = phases
        .iter()
        .map(|mu| {
            let mut tau = (mu.arg() / std::f64::consts::TAU).rem_euclid(1.0);
            if tau >= 1.0 {
                tau = 0.0;
            }
            tau
        })
        .collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup_by(|a, b| circle_distance(*a, *b) < 1e-12);

    fit_amplitudes(&taus, x_hat, RecoveryMethod::MomentFactorization)
}

/// Nonnegative amplitude fit of fixed frequencies to a moment vector,
/// dropping atoms whose fitted mass is negligible.
pub fn fit_amplitudes(
    taus: &[f64],
    moments: &CVec,
    method: RecoveryMethod,
) -> Result<SourceEstimate> {
    let m = moments.len();
    let mut a = CMat::zeros(m, taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        a.set_column(k, &atom(tau, m)?);
    }
    let c = nnls_complex(&a, moments)?;

    let c_max = c.max().max(0.0);
    let mut kept_taus = Vec::new();
    let mut kept_amps = Vec::new();
    for (k, &tau) in taus.iter().enumerate() {
        if c[k] > 1e-12 * c_max && c[k] > 0.0 {
            kept_taus.push(tau);
            kept_amps.push(c[k]);
        }
    }
    let mut fitted = CVec::zeros(m);
    for (&tau, &amp) in kept_taus.iter().zip(&kept_amps) {
        fitted += atom(tau, m)? * crate::linalg::C64::new(amp, 0.0);
    }
    let residual = (fitted - moments).norm();

    Ok(SourceEstimate { taus: kept_taus, amplitudes: kept_amps, method, residual })
}

/// One matched estimate/truth pair.
#[derive(Debug, Clone, Serialize)]
pub struct MatchedPair {
    pub estimate_index: usize,
    pub truth_index: usize,
    pub distance: f64,
}

/// Assignment of estimated sources to true ones under the circle metric.
#[derive(Debug, Clone, Serialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub missed_truth: Vec<usize>,
    pub spurious_estimates: Vec<usize>,
    /// Worst and mean pair distance; zero when nothing was matched.
    pub max_distance: f64,
    pub mean_distance: f64,
}

impl MatchReport {
    /// Every source matched, nothing invented, worst error within `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.missed_truth.is_empty() && self.spurious_estimates.is_empty() && self.max_distance <= tol
    }
}

/// Match estimates against ground truth. Equal-size lists are matched by
/// the best cyclic alignment of the two sorted sequences, which is optimal
/// for the max distance on a circle; otherwise pairs are chosen greedily by
/// increasing distance and the leftovers reported.
pub fn match_sources(estimates: &[f64], truth: &[f64]) -> MatchReport {
    let mut est_order: Vec<usize> = (0..estimates.len()).collect();
    est_order.sort_by(|&a, &b| estimates[a].total_cmp(&estimates[b]));
    let mut truth_order: Vec<usize> = (0..truth.len()).collect();
    truth_order.sort_by(|&a, &b| truth[a].total_cmp(&truth[b]));

    let mut pairs: Vec<MatchedPair> = Vec::new();
    let mut missed_truth = Vec::new();
    let mut spurious_estimates = Vec::new();

    if !estimates.is_empty() && estimates.len() == truth.len() {
        let p = truth.len();
        let mut best_shift = 0usize;
        let mut best_max = f64::INFINITY;
        for shift in 0..p {
            let worst = (0..p)
                .map(|k| {
                    circle_distance(estimates[est_order[k]], truth[truth_order[(k + shift) % p]])
                })
                .fold(0.0, f64::max);
            if worst < best_max {
                best_max = worst;
                best_shift = shift;
            }
        }
        for k in 0..p {
            let e = est_order[k];
            let t = truth_order[(k + best_shift) % p];
            pairs.push(MatchedPair {
                estimate_index: e,
                truth_index: t,
                distance: circle_distance(estimates[e], truth[t]),
            });
        }
    } else {
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (e, &te) in estimates.iter().enumerate() {
            for (t, &tt) in truth.iter().enumerate() {
                all.push((circle_distance(te, tt), e, t));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut est_used = vec![false; estimates.len()];
        let mut truth_used = vec![false; truth.len()];
        for (d, e, t) in all {
            if !est_used[e] && !truth_used[t] {
                est_used[e] = true;
                truth_used[t] = true;
                pairs.push(MatchedPair { estimate_index: e, truth_index: t, distance: d });
            }
        }
        missed_truth = truth_used
            .iter()
            .enumerate()
            .filter_map(|(t, &used)| (!used).then_some(t))
            .collect();
        spurious_estimates = est_used
            .iter()
            .enumerate()
            .filter_map(|(e, &used)| (!used).then_some(e))
            .collect();
    }

    let max_distance = pairs.iter().map(|p| p.distance).fold(0.0, f64::max);
    let mean_distance = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.distance).sum::<f64>() / pairs.len() as f64
    };
    MatchReport { pairs, missed_truth, spurious_estimates, max_distance, mean_distance }
}
