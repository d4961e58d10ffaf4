//! Semidefinite solver for positive line-spectrum programs.
//!
//! Both programs minimize over Hermitian-Toeplitz-constrained vectors `x`
//! with the semidefinite constraint compressed to a row subset `I`:
//! `P_I T(x) P_I^H >= 0`. Exact mode pins the observed lags and minimizes
//! `Re x[0]`; denoising mode trades data fidelity on the observed lags
//! against `lambda * Re x[0]`.
//!
//! The method is a two-block ADMM on the splitting `Z = P_I T(x) P_I^H`.
//! Because distinct lags occupy disjoint entries of the constrained block,
//! the x-update decouples into scalar problems per lag with closed forms.
//! The Z-update is a projection onto the positive semidefinite cone, and the
//! scaled dual variable converges (up to sign and scaling) to the dual
//! certificate of the program, from which the dual polynomial coefficients
//! are read off.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::IndexSet;
use crate::linalg::{hermitize, psd_project, q_from_adjoint, CMat, CVec, TrigPolynomial, C64};

/// Data-fit mode of the program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Equality on the observed lags, minimize `Re x[0]`.
    Exact,
    /// `1/2 ||x_O - y||^2 + lambda Re x[0]`.
    Denoise { lambda: f64 },
}

/// A recovery program instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Ambient number of lags `N`.
    pub ambient: usize,
    /// Observed lags, ambient `N`.
    pub omega: IndexSet,
    /// Observed values, aligned with `omega.indices()`.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub observed: CVec,
    /// Rows of the semidefinite block; the full set recovers the
    /// uncompressed program. Must contain lag 0.
    pub compression: IndexSet,
    pub mode: Mode,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ambient == 0 {
            return Err(Error::InvalidProblem("ambient dimension is zero".into()));
        }
        if self.omega.ambient() != self.ambient || self.compression.ambient() != self.ambient {
            return Err(Error::InvalidProblem(format!(
                "ambient mismatch: problem {}, omega {}, compression {}",
                self.ambient,
                self.omega.ambient(),
                self.compression.ambient()
            )));
        }
        if self.observed.len() != self.omega.len() {
            return Err(Error::InvalidProblem(format!(
                "{} observed values for {} observed lags",
                self.observed.len(),
                self.omega.len()
            )));
        }
        if !self.compression.contains(0) {
            return Err(Error::InvalidProblem("compression set must contain index 0".into()));
        }
        if self.observed.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("observed data"));
        }
        if let Mode::Denoise { lambda } = self.mode {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "denoising weight must be positive, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

/// ADMM parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Penalty parameter.
    pub rho: f64,
    /// Over-relaxation in `[1, 1.8]`.
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    /// Rescale `rho` when the primal and dual residuals drift apart.
    pub adaptive_rho: bool,
    /// Keep `(primal, dual)` residuals per iteration in the solution.
    pub record_residuals: bool,
    /// In exact mode, lags outside both the observation set and the
    /// compression co-array are unconstrained; when enabled, a converged
    /// solve fills them by a full-size semidefinite completion pinned on
    /// every determined lag.
    pub complete_free_lags: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            alpha: 1.5,
            eps_abs: 1e-7,
            eps_rel: 1e-6,
            max_iters: 50_000,
            adaptive_rho: true,
            record_residuals: false,
            complete_free_lags: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(1.0..=1.8).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "over-relaxation must lie in [1, 1.8], got {}",
                self.alpha
            )));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStatus {
    /// Every lag was determined by the program.
    NotNeeded,
    /// Free lags were filled by the completion solve.
    Completed,
    /// The completion solve did not converge; free lags remain zero.
    Failed,
    /// Completion disabled or mode was not exact.
    Skipped,
}

/// Solver output. `x_hat` lives in the ambient lag space; `q_hat` holds the
/// dual polynomial coefficients and `s_hat` the semidefinite dual block.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    #[serde(with = "crate::serde_util::complex_vec")]
    pub x_hat: CVec,
    #[serde(with = "crate::serde_util::complex_vec")]
    pub q_hat: CVec,
    #[serde(with = "crate::serde_util::complex_mat")]
    pub s_hat: CMat,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub completion: CompletionStatus,
    pub rho_final: f64,
    pub wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_history: Option<Vec<(f64, f64)>>,
}

impl SdpSolution {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Dual polynomial `Q(tau) = sum_n q_n e^{-i 2 pi n tau}`. Meaningful
    /// only when the solve converged; check `status` before trusting peaks.
    pub fn dual_polynomial(&self) -> TrigPolynomial {
        TrigPolynomial::new(self.q_hat.clone())
    }
}

/// Per-lag index tables for the compressed block.
struct LagTables {
    /// For each strictly positive lag of the compression co-array: the lag
    /// and the `(row, col)` pairs of the block it occupies (row > col).
    pairs: Vec<(usize, Vec<(usize, usize)>)>,
    block_size: usize,
}

impl LagTables {
    fn build(compression: &IndexSet) -> Self {
        let idx = compression.indices();
        let m = idx.len();
        let mut by_lag: std::collections::BTreeMap<usize, Vec<(usize, usize)>> =
            std::collections::BTreeMap::new();
        for a in 0..m {
            for b in 0..a {
                by_lag.entry(idx[a] - idx[b]).or_default().push((a, b));
            }
        }
        LagTables { pairs: by_lag.into_iter().collect(), block_size: m }
    }

    /// `P T(x) P^H` from the lag values.
    fn block(&self, x: &CVec) -> CMat {
        let m = self.block_size;
        let mut g = CMat::zeros(m, m);
        let diag = C64::new(x[0].re, 0.0);
        for a in 0..m {
            g[(a, a)] = diag;
        }
        for (lag, pairs) in &self.pairs {
            let v = x[*lag];
            let vc = v.conj();
            for &(a, b) in pairs {
                g[(a, b)] = v;
                g[(b, a)] = vc;
            }
        }
        g
    }

    /// Real-linear adjoint of `block` applied to a Hermitian matrix: the
    /// lag-0 component is the trace of the real part, each positive lag gets
    /// twice its entry sum. Returns the squared norm alongside the values.
    fn adjoint(&self, d: &CMat) -> (f64, Vec<C64>, f64) {
        let mut trace = 0.0;
        for a in 0..self.block_size {
            trace += d[(a, a)].re;
        }
        let mut comps = Vec::with_capacity(self.pairs.len());
        let mut norm_sq = trace * trace;
        for (_, pairs) in &self.pairs {
            let mut sum = C64::new(0.0, 0.0);
            for &(a, b) in pairs {
                sum += d[(a, b)];
            }
            let c = 2.0 * sum;
            norm_sq += c.norm_sqr();
            comps.push(c);
        }
        (trace, comps, norm_sq.sqrt())
    }
}

/// Solve a program instance. See the module docs for the splitting; the
/// returned duals are normalized so that `T*(P^H s_hat P) + K q_hat = e0`
/// holds at convergence, with `K = diag(1, 1/2, ..., 1/2)`.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<SdpSolution> {
    problem.validate()?;
    config.validate()?;
    let start = Instant::now();

    let n = problem.ambient;
    let tables = LagTables::build(&problem.compression);
    let m = tables.block_size;

    // Observed value per lag, for O(1) lookup.
    let mut observed_at = vec![None; n];
    for (k, &d) in problem.omega.indices().iter().enumerate() {
        observed_at[d] = Some(problem.observed[k]);
    }

    let mut rho = config.rho;
    let lambda = match problem.mode {
        Mode::Exact => 0.0,
        Mode::Denoise { lambda } => lambda,
    };

    // Initial iterate: observed values scattered to their lags.
    let mut x = CVec::zeros(n);
    for (d, v) in observed_at.iter().enumerate() {
        if let Some(v) = v {
            x[d] = if d == 0 { C64::new(v.re, 0.0) } else { *v };
        }
    }
    let mut z = psd_project(&tables.block(&x))?;
    let mut u = CMat::zeros(m, m);

    let mut history = config.record_residuals.then(Vec::new);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = config.max_iters;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;

    // sqrt of the number of real degrees of freedom in x, for the dual
    // tolerance scale.
    let x_dof = (1 + 2 * tables.pairs.len()) as f64;

    for iter in 0..config.max_iters {
        let w = &z - &u;

        // x-update: separable per lag.
        match problem.mode {
            Mode::Exact => {
                if let Some(v) = observed_at[0] {
                    x[0] = C64::new(v.re, 0.0);
                } else {
                    let mut trace = 0.0;
                    for a in 0..m {
                        trace += w[(a, a)].re;
                    }
                    x[0] = C64::new((trace - 1.0 / rho) / m as f64, 0.0);
                }
                for (lag, pairs) in &tables.pairs {
                    x[*lag] = match observed_at[*lag] {
                        Some(v) => v,
                        None => {
                            let sum: C64 = pairs.iter().map(|&(a, b)| w[(a, b)]).sum();
                            sum / pairs.len() as f64
                        }
                    };
                }
            }
            Mode::Denoise { lambda } => {
                let mut trace = 0.0;
                for a in 0..m {
                    trace += w[(a, a)].re;
                }
                let (obs, has) = match observed_at[0] {
                    Some(v) => (v.re, 1.0),
                    None => (0.0, 0.0),
                };
                x[0] = C64::new((rho * trace + has * obs - lambda) / (rho * m as f64 + has), 0.0);
                for (lag, pairs) in &tables.pairs {
                    let n_d = pairs.len() as f64;
                    let sum: C64 = pairs.iter().map(|&(a, b)| w[(a, b)]).sum();
                    x[*lag] = match observed_at[*lag] {
                        Some(y) => (2.0 * rho * sum + y) / (2.0 * rho * n_d + 1.0),
                        None => sum / n_d,
                    };
                }
            }
        }

        let gx = tables.block(&x);
        let g_relaxed = gx.scale(config.alpha) + z.scale(1.0 - config.alpha);
        let z_prev = z;
        z = psd_project(&(&g_relaxed + &u))?;
        u += &g_relaxed - &z;

        primal_residual = (&gx - &z).norm();
        let (_, _, dz_norm) = tables.adjoint(&(&z - &z_prev));
        dual_residual = rho * dz_norm;

        if let Some(h) = history.as_mut() {
            h.push((primal_residual, dual_residual));
        }

        if !primal_residual.is_finite() || !dual_residual.is_finite() {
            status = SolveStatus::Diverged;
            iterations = iter + 1;
            break;
        }

        let eps_pri =
            config.eps_abs * m as f64 + config.eps_rel * gx.norm().max(z.norm());
        let (_, _, gu_norm) = tables.adjoint(&u);
        let eps_dual = config.eps_abs * x_dof.sqrt() + config.eps_rel * rho * gu_norm;
        if primal_residual <= eps_pri && dual_residual <= eps_dual {
            status = SolveStatus::Converged;
            iterations = iter + 1;
            break;
        }

        if config.adaptive_rho {
            let pri_rel = primal_residual / eps_pri.max(f64::MIN_POSITIVE);
            let dual_rel = dual_residual / eps_dual.max(f64::MIN_POSITIVE);
            if pri_rel > 10.0 * dual_rel && rho < 1e6 {
                rho *= 2.0;
                u.scale_mut(0.5);
            } else if dual_rel > 10.0 * pri_rel && rho > 1e-6 {
                rho *= 0.5;
                u.scale_mut(2.0);
            }
        }
    }

    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        status = SolveStatus::Diverged;
    }

    // Dual extraction. The projection residual makes -rho*u positive
    // semidefinite by construction; denoising rescales by the fidelity
    // weight so the certificate normalization is shared across modes.
    let mut s_hat = hermitize(&u.scale(-rho));
    if lambda > 0.0 {
        s_hat.unscale_mut(lambda);
    }
    let (trace, comps, _) = tables.adjoint(&s_hat);
    let mut t = CVec::zeros(n);
    t[0] = C64::new(trace, 0.0);
    for ((lag, _), c) in tables.pairs.iter().zip(comps.iter()) {
        t[*lag] = c / 2.0;
    }
    let q_hat = q_from_adjoint(&t);

    let objective = match problem.mode {
        Mode::Exact => x[0].re,
        Mode::Denoise { lambda } => {
            let mut fit = 0.0;
            for (k, &d) in problem.omega.indices().iter().enumerate() {
                fit += (x[d] - problem.observed[k]).norm_sqr();
            }
            0.5 * fit + lambda * x[0].re
        }
    };

    let mut solution = SdpSolution {
        x_hat: x,
        q_hat,
        s_hat,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        status,
        completion: CompletionStatus::Skipped,
        rho_final: rho,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        residual_history: history,
    };

    // Lags outside both the observation set and the compression co-array do
    // not appear anywhere in the program; when the semidefinite block admits
    // a positive decomposition with fewer sources than determined lags, the
    // positive-semidefinite Toeplitz completion of the determined lags is
    // unique. Try the cheap route first: the dual polynomial of a converged
    // solve touches 1 exactly at the sources, so atoms at its peaks refit
    // on the determined lags reproduce them; when that fit checks out, the
    // same atoms extend the solution everywhere. Otherwise fall back to a
    // full-size completion solve.
    solution.completion = CompletionStatus::NotNeeded;
    if problem.mode == Mode::Exact && config.complete_free_lags {
        let mut determined = problem.compression.difference_set().union(&problem.omega)?;
        if determined.len() < n && solution.converged() {
            let values = CVec::from_vec(
                determined
                    .indices()
                    .iter()
                    .map(|&d| solution.x_hat[d])
                    .collect::<Vec<_>>(),
            );
            match complete_from_dual_peaks(&solution, &determined, &values) {
                Some(full) => {
                    solution.x_hat = full;
                    solution.completion = CompletionStatus::Completed;
                }
                None => {
                    let inner = ProblemSpec {
                        ambient: n,
                        omega: std::mem::replace(&mut determined, IndexSet::full(0)),
                        observed: values,
                        compression: IndexSet::full(n),
                        mode: Mode::Exact,
                    };
                    let inner_cfg = SolverConfig {
                        record_residuals: false,
                        complete_free_lags: false,
                        ..config.clone()
                    };
                    let completed = solve(&inner, &inner_cfg)?;
                    if completed.converged() {
                        solution.x_hat = completed.x_hat;
                        solution.completion = CompletionStatus::Completed;
                    } else {
                        solution.completion = CompletionStatus::Failed;
                    }
                }
            }
        } else if determined.len() < n {
            solution.completion = CompletionStatus::Failed;
        }
    }

    solution.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(solution)
}

/// Extend a converged exact solution from its determined lags to the full
/// ambient length by reading the support off the dual polynomial.
///
/// Peaks of `Re Q` near height 1 mark the sources. Each peak is polished to
/// a stationary point of `Re Q` by Newton's method, nonnegative powers are
/// refit on the determined lags, and the atomic extension is accepted only
/// when that fit reproduces the determined values to solver accuracy.
/// Returns `None` when any step falls through; the caller then solves a
/// full-size completion program instead.
fn complete_from_dual_peaks(
    solution: &SdpSolution,
    determined: &IndexSet,
    values: &CVec,
) -> Option<CVec> {
    let n = solution.x_hat.len();
    let mut taus =
        crate::recovery::peaks_of_dual(&solution.q_hat, (16 * n).max(512), 1.0 - 1e-4);
    if taus.is_empty() || taus.len() >= determined.len() {
        return None;
    }

    let poly = TrigPolynomial::new(solution.q_hat.clone());
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    let clamp = 1.0 / (16.0 * n as f64);
    for tau in taus.iter_mut() {
        for _ in 0..12 {
            let slope = d1.eval(*tau).re;
            let curve = d2.eval(*tau).re;
            if curve >= 0.0 || !slope.is_finite() || !curve.is_finite() {
                break;
            }
            let step = (slope / curve).clamp(-clamp, clamp);
            *tau = (*tau - step).rem_euclid(1.0);
            if step.abs() < 1e-15 {
                break;
            }
        }
    }

    let rows = determined.indices();
    let mut basis = CMat::zeros(rows.len(), taus.len());
    let mut atoms = Vec::with_capacity(taus.len());
    for (col, &tau) in taus.iter().enumerate() {
        let full = crate::linalg::atom(tau, n).ok()?;
        for (r, &lag) in rows.iter().enumerate() {
            basis[(r, col)] = full[lag];
        }
        atoms.push(full);
    }
    let powers = crate::nnls::nnls_complex(&basis, values).ok()?;

    let mut full = CVec::zeros(n);
    for (col, at) in atoms.iter().enumerate() {
        full += at.scale(powers[col]);
    }
    let mut err = 0.0;
    let mut scale = 0.0;
    for (r, &lag) in rows.iter().enumerate() {
        err += (full[lag] - values[r]).norm_sqr();
        scale += values[r].norm_sqr();
    }
    if err.sqrt() <= 1e-6 * (1.0 + scale.sqrt()) {
        Some(full)
    } else {
        None
    }
}

/// How well the extracted duals satisfy the dual constraints.
#[derive(Debug, Clone, Serialize)]
pub struct DualFeasibilityReport {
    /// `|| T*(P^H S P) + K q - e0 ||`.
    pub stationarity_residual: f64,
    /// Most negative eigenvalue of `s_hat` (0 when PSD).
    pub s_min_eigenvalue: f64,
    /// Norm of `q_hat` off the observation set.
    pub q_off_support_norm: f64,
}

impl DualFeasibilityReport {
    pub fn within(&self, tol: f64) -> bool {
        self.stationarity_residual <= tol
            && self.s_min_eigenvalue >= -tol
            && self.q_off_support_norm <= tol
    }
}

/// Evaluate the dual constraints for a solution of `problem`.
pub fn check_dual_feasibility(
    solution: &SdpSolution,
    problem: &ProblemSpec,
) -> Result<DualFeasibilityReport> {
    let n = problem.ambient;
    let sel = problem.compression.selection();
    let embedded = sel.embed_principal(&solution.s_hat)?;
    let t = crate::linalg::toeplitz_adjoint(&embedded)?;
    let mut residual_sq = 0.0;
    for j in 0..n {
        let k = if j == 0 { 1.0 } else { 0.5 };
        let target = if j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        residual_sq += (t[j] + k * solution.q_hat[j] - target).norm_sqr();
    }
    let (vals, _) = crate::linalg::hermitian_eig(&solution.s_hat)?;
    let min_eig = vals[vals.len() - 1].min(0.0);
    let mut off_sq = 0.0;
    for j in 0..n {
        if !problem.omega.contains(j) {
            off_sq += solution.q_hat[j].norm_sqr();
        }
    }
    Ok(DualFeasibilityReport {
        stationarity_residual: residual_sq.sqrt(),
        s_min_eigenvalue: min_eig,
        q_off_support_norm: off_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cantor_array;
    use crate::linalg::atom;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn mixture(taus: &[f64], amps: &[f64], n: usize) -> CVec {
        let mut x = CVec::zeros(n);
        for (&tau, &c) in taus.iter().zip(amps) {
            x += atom(tau, n).unwrap().scale(c);
        }
        x
    }

    fn exact_problem(x_star: &CVec, omega: IndexSet, compression: IndexSet) -> ProblemSpec {
        let observed = omega.selection().select(x_star).unwrap();
        ProblemSpec { ambient: x_star.len(), omega, observed, compression, mode: Mode::Exact }
    }

    #[test]
    fn single_source_full_observation() {
        let n = 8;
        let x_star = mixture(&[0.3], &[2.0], n);
        let problem = exact_problem(
            &x_star,
            IndexSet::full(n),
            IndexSet::new(vec![0, 1, 2], n).unwrap(),
        );
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert!((sol.x_hat - &x_star).norm() <= 1e-4 * x_star.norm());
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn zero_observations_give_zero() {
        let n = 6;
        let problem = exact_problem(
            &CVec::zeros(n),
            IndexSet::full(n),
            IndexSet::new(vec![0, 1, 3], n).unwrap(),
        );
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert!(sol.x_hat.norm() <= 1e-10);
        assert!(sol.objective.abs() <= 1e-10);
    }

    #[test]
    fn recovers_free_lags_through_coarray() {
        // Observations only on the co-array of a complete sparse set; the
        // remaining lags are determined by the positive structure.
        let n = 10;
        let i_set = cantor_array(3).unwrap();
        assert_eq!(i_set.ambient(), n);
        let taus = [0.12, 0.47, 0.81];
        let amps = [1.0, 0.6, 1.4];
        let x_star = mixture(&taus, &amps, n);
        let omega = i_set.difference_set();
        let problem = exact_problem(&x_star, omega, i_set);
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert_eq!(sol.completion, CompletionStatus::NotNeeded); // co-array is complete
        assert!((&sol.x_hat - &x_star).norm() <= 1e-4 * x_star.norm());
        assert_abs_diff_eq!(sol.objective, amps.iter().sum::<f64>(), epsilon = 1e-4);
    }

    #[test]
    fn completion_fills_undetermined_lags() {
        // compression {0,1,2} in ambient 8 with omega equal to its co-array:
        // lags 3..7 appear nowhere in the program and come from completion.
        let n = 8;
        let i_set = IndexSet::new(vec![0, 1, 2], n).unwrap();
        let omega = i_set.difference_set();
        assert_eq!(omega.indices(), &[0, 1, 2]);
        let x_star = mixture(&[0.2, 0.65], &[1.0, 0.8], n);
        let problem = exact_problem(&x_star, omega, i_set);
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert_eq!(sol.completion, CompletionStatus::Completed);
        assert!(
            (&sol.x_hat - &x_star).norm() <= 1e-4 * x_star.norm(),
            "completion error {}",
            (&sol.x_hat - &x_star).norm() / x_star.norm()
        );
    }

    #[test]
    fn scaling_equivariance() {
        let n = 12;
        let i_set = IndexSet::new(vec![0, 1, 4, 6], n).unwrap();
        let omega = i_set.difference_set();
        let x_star = mixture(&[0.21, 0.58], &[1.0, 0.5], n);
        let p1 = exact_problem(&x_star, omega.clone(), i_set.clone());
        let p2 = exact_problem(&x_star.scale(3.0), omega, i_set);
        let s1 = solve(&p1, &SolverConfig::default()).unwrap();
        let s2 = solve(&p2, &SolverConfig::default()).unwrap();
        assert!(s1.converged() && s2.converged());
        assert!((s2.x_hat - s1.x_hat.scale(3.0)).norm() <= 3e-4 * x_star.norm());
        assert_abs_diff_eq!(s2.objective, 3.0 * s1.objective, epsilon = 1e-3);
    }

    #[test]
    fn strong_duality_and_dual_feasibility() {
        let n = 12;
        let i_set = IndexSet::new(vec![0, 1, 3, 7], n).unwrap();
        let omega = i_set.difference_set();
        let x_star = mixture(&[0.15, 0.4, 0.77], &[1.0, 2.0, 0.5], n);
        let problem = exact_problem(&x_star, omega.clone(), i_set);
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());

        let report = check_dual_feasibility(&sol, &problem).unwrap();
        assert!(report.within(1e-5), "{report:?}");

        // dual objective Re<observed, q_O> matches the primal objective
        let mut dual_obj = 0.0;
        for (k, &d) in omega.indices().iter().enumerate() {
            dual_obj += (problem.observed[k].conj() * sol.q_hat[d]).re;
        }
        assert_abs_diff_eq!(dual_obj, sol.objective, epsilon = 1e-4);
    }

    #[test]
    fn denoise_shrinks_toward_data() {
        let n = 10;
        let i_set = cantor_array(3).unwrap();
        let omega = i_set.difference_set();
        let x_star = mixture(&[0.3, 0.72], &[1.5, 1.0], n);
        let observed = omega.selection().select(&x_star).unwrap();
        let small = ProblemSpec {
            ambient: n,
            omega: omega.clone(),
            observed: observed.clone(),
            compression: i_set.clone(),
            mode: Mode::Denoise { lambda: 1e-6 },
        };
        let sol = solve(&small, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        // with vanishing weight the denoiser reproduces the data
        let fit = omega.selection().select(&sol.x_hat).unwrap();
        assert!((fit - &observed).norm() <= 1e-4 * observed.norm());

        let heavy = ProblemSpec { mode: Mode::Denoise { lambda: 1e3 }, ..small };
        let sol = solve(&heavy, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        // overwhelming weight drives the estimate to zero
        assert!(sol.x_hat.norm() <= 1e-3 * x_star.norm());
    }

    #[test]
    fn compressed_matches_uncompressed() {
        let n = 12;
        let x_star = mixture(&[0.1, 0.52, 0.9], &[1.0, 0.7, 1.2], n);
        let omega = IndexSet::full(n);
        let full = exact_problem(&x_star, omega.clone(), IndexSet::full(n));
        let compressed =
            exact_problem(&x_star, omega, IndexSet::new(vec![0, 1, 2, 5, 8], n).unwrap());
        let s1 = solve(&full, &SolverConfig::default()).unwrap();
        let s2 = solve(&compressed, &SolverConfig::default()).unwrap();
        assert!(s1.converged() && s2.converged());
        assert!((s1.x_hat - &x_star).norm() <= 1e-4 * x_star.norm());
        assert!((s2.x_hat - &x_star).norm() <= 1e-4 * x_star.norm());
        assert_abs_diff_eq!(s1.objective, s2.objective, epsilon = 1e-4);
    }

    #[test]
    fn dual_polynomial_interpolates_at_sources() {
        // partial observations keep the dual informative
        let n = 16;
        let taus = [0.22, 0.61];
        let x_star = mixture(&taus, &[1.0, 0.8], n);
        let omega = IndexSet::new((0..10).collect(), n).unwrap();
        let problem = exact_problem(&x_star, omega, IndexSet::full(n));
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        let q = sol.dual_polynomial();
        for &tau in &taus {
            assert!((q.eval_re(tau) - 1.0).abs() <= 1e-4, "Re Q({tau}) = {}", q.eval_re(tau));
        }
        let max_on_grid = (0..4096)
            .map(|g| q.eval_re(g as f64 / 4096.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_on_grid <= 1.0 + 1e-4, "max Re Q = {max_on_grid}");
    }

    #[test]
    fn rejects_invalid_problems() {
        let n = 6;
        let omega = IndexSet::full(n);
        let observed = CVec::zeros(n);
        let no_zero = ProblemSpec {
            ambient: n,
            omega: omega.clone(),
            observed: observed.clone(),
            compression: IndexSet::new(vec![1, 2], n).unwrap(),
            mode: Mode::Exact,
        };
        assert!(matches!(solve(&no_zero, &SolverConfig::default()), Err(Error::InvalidProblem(_))));

        let bad_lambda = ProblemSpec {
            ambient: n,
            omega,
            observed,
            compression: IndexSet::full(n),
            mode: Mode::Denoise { lambda: 0.0 },
        };
        assert!(solve(&bad_lambda, &SolverConfig::default()).is_err());

        let mut cfg = SolverConfig::default();
        cfg.alpha = 2.5;
        let x_star = mixture(&[0.5], &[1.0], n);
        let p = exact_problem(&x_star, IndexSet::full(n), IndexSet::full(n));
        assert!(matches!(solve(&p, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn problem_spec_json_roundtrip() {
        let n = 5;
        let problem = ProblemSpec {
            ambient: n,
            omega: IndexSet::new(vec![0, 2], n).unwrap(),
            observed: CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.25, -0.5)]),
            compression: IndexSet::full(n),
            mode: Mode::Denoise { lambda: 0.3 },
        };
        let json = serde_json::to_string(&problem).unwrap();
        let back: ProblemSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.ambient, problem.ambient);
        assert_eq!(back.omega, problem.omega);
        assert_eq!(back.observed, problem.observed);
        assert!(matches!(back.mode, Mode::Denoise { lambda } if (lambda - 0.3).abs() < 1e-15));

        let cfg_json = serde_json::to_string(&SolverConfig::default()).unwrap();
        let cfg: SolverConfig = serde_json::from_str(&cfg_json).unwrap();
        assert_eq!(cfg.max_iters, SolverConfig::default().max_iters);
        // defaults fill missing fields
        let sparse: SolverConfig = serde_json::from_str("{\"rho\": 2.0}").unwrap();
        assert_eq!(sparse.rho, 2.0);
        assert_eq!(sparse.eps_abs, SolverConfig::default().eps_abs);
    }

    #[test]
    fn random_instances_recover() {
        let mut rng = StdRng::seed_from_u64(1234);
        for trial in 0..8 {
            let n = rng.random_range(8..=16);
            let m = rng.random_range(3..=5usize);
            let mut idx = vec![0usize];
            while idx.len() < m {
                let cand = rng.random_range(1..n);
                if !idx.contains(&cand) {
                    idx.push(cand);
                }
            }
            let i_set = IndexSet::new(idx, n).unwrap();
            let p = rng.random_range(1..i_set.len());
            let taus: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            let amps: Vec<f64> = (0..p).map(|_| 0.5 + 1.5 * rng.random::<f64>()).collect();
            let x_star = mixture(&taus, &amps, n);
            // The program determines x only on the observed lags and the
            // compression co-array; a positive p-atom mixture is pinned down
            // by its first p+1 lags, so observing those keeps the remaining
            // lags identifiable for the completion step.
            let omega = i_set
                .difference_set()
                .union(&IndexSet::new((0..=p).collect(), n).unwrap())
                .unwrap();
            let problem = exact_problem(&x_star, omega, i_set);
            let sol = solve(&problem, &SolverConfig::default()).unwrap();
            assert!(sol.converged(), "trial {trial} did not converge");
            let rel = (&sol.x_hat - &x_star).norm() / x_star.norm();
            assert!(rel <= 1e-4, "trial {trial}: relative error {rel}");
        }
    }
}
