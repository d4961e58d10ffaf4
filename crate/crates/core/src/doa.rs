//! Direction finding from second-order statistics of a sparse array.
//!
//! Uncorrelated zero-mean sources hit an array whose element positions form
//! an integer set `J`; the covariance of the element snapshots is
//! `A diag(powers) A^H + sigma2 I`. Averaging the empirical covariance
//! along equal element differences produces noisy samples of the positive
//! moment vector on the co-array of `J`, which the denoising program cleans
//! up into a full positive moment vector whose dual polynomial localizes
//! the sources.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::IndexSet;
use crate::linalg::{atom, hermitize, CMat, CVec, C64};
use crate::nnls::nnls_complex;
use crate::recovery::{
    fit_amplitudes, match_sources, peaks_of_dual, MatchReport, RecoveryMethod, SourceEstimate,
    NOISY_PEAK_THRESHOLD,
};
use crate::solver::{solve, Mode, ProblemSpec, SolveStatus, SolverConfig};

/// Backward elimination keeps this many candidates beyond the model order
/// before exhaustive subset scoring.
const ORDER_POOL_EXTRA: usize = 4;
/// How many of the top-ranked subsets get coordinate-descent refinement.
const ORDER_POLISH_TOP: usize = 25;
/// Half-width of the per-source refinement window, in units of `1/N`.
const ORDER_POLISH_RADIUS: f64 = 0.35;
/// Refinement sweeps over the selected set.
const ORDER_POLISH_ROUNDS: usize = 2;
/// Grid points per side inside the refinement window.
const ORDER_POLISH_STEPS: i32 = 8;

/// Ground-truth mixture of uncorrelated point sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceModel {
    /// Source frequencies in `[0, 1)`.
    pub taus: Vec<f64>,
    /// Source powers, strictly positive.
    pub powers: Vec<f64>,
    /// Ambient number of lags `N` (one past the largest element position).
    pub aperture: usize,
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        if self.taus.len() != self.powers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} powers for {} sources",
                self.powers.len(),
                self.taus.len()
            )));
        }
        if self.taus.is_empty() {
            return Err(Error::InvalidProblem("model has no sources".into()));
        }
        if self.aperture == 0 {
            return Err(Error::InvalidProblem("aperture is zero".into()));
        }
        for (k, &tau) in self.taus.iter().enumerate() {
            if !(0.0..1.0).contains(&tau) {
                return Err(Error::TauOutOfRange(tau));
            }
            for &other in &self.taus[..k] {
                let d = (tau - other).abs();
                if d.min(1.0 - d) < 1e-12 {
                    return Err(Error::InvalidProblem(format!(
                        "sources {other} and {tau} coincide"
                    )));
                }
            }
        }
        if let Some(&bad) = self.powers.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "powers must be positive, got {bad}"
            )));
        }
        Ok(())
    }

    /// The noiseless moment vector `sum_k powers[k] a(tau_k)`.
    pub fn x_star(&self) -> Result<CVec> {
        let mut x = CVec::zeros(self.aperture);
        for (&tau, &p) in self.taus.iter().zip(&self.powers) {
            x += atom(tau, self.aperture)? * C64::new(p, 0.0);
        }
        Ok(x)
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Noise power giving the requested signal-to-noise ratio in dB.
    pub fn sigma2_for_snr_db(&self, snr_db: f64) -> f64 {
        self.total_power() / 10f64.powf(snr_db / 10.0)
    }
}

/// Raw array snapshots plus the noise level they were drawn at.
#[derive(Debug, Clone)]
pub struct SnapshotBatch {
    pub array: IndexSet,
    /// One column per snapshot, rows aligned with `array.indices()`.
    pub snapshots: CMat,
    pub sigma2: f64,
}

/// Draw `num_snapshots` array observations with circular complex Gaussian
/// source coefficients (variance = power) and element noise (variance =
/// `sigma2`). The draw order is fixed: per snapshot, each source's real
/// then imaginary part, then each element's noise real then imaginary
/// part, so a seed reproduces the batch bit for bit.
pub fn simulate_snapshots(
    model: &SourceModel,
    array: &IndexSet,
    num_snapshots: usize,
    sigma2: f64,
    seed: u64,
) -> Result<SnapshotBatch> {
    model.validate()?;
    if array.ambient() != model.aperture {
        return Err(Error::ShapeMismatch(format!(
            "array ambient {} vs model aperture {}",
            array.ambient(),
            model.aperture
        )));
    }
    if num_snapshots == 0 {
        return Err(Error::InvalidProblem("need at least one snapshot".into()));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidProblem(format!("noise power {sigma2} invalid")));
    }

    let steering: Vec<CVec> = model
        .taus
        .iter()
        .map(|&tau| Ok(array.selection().select(&atom(tau, model.aperture)?)?))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let m = array.len();
    let mut snapshots = CMat::zeros(m, num_snapshots);
    for l in 0..num_snapshots {
        let mut col = CVec::zeros(m);
        for (k, a) in steering.iter().enumerate() {
            let s = (model.powers[k] / 2.0).sqrt();
            let c = C64::new(s * unit.sample(&mut rng), s * unit.sample(&mut rng));
            col += a * c;
        }
        let ns = (sigma2 / 2.0).sqrt();
        for j in 0..m {
            col[j] += C64::new(ns * unit.sample(&mut rng), ns * unit.sample(&mut rng));
        }
        snapshots.set_column(l, &col);
    }
    Ok(SnapshotBatch { array: array.clone(), snapshots, sigma2 })
}

/// `(1/L) sum_l u_l u_l^H`, symmetrized.
pub fn empirical_covariance(batch: &SnapshotBatch) -> CMat {
    let m = batch.snapshots.nrows();
    let l = batch.snapshots.ncols();
    let mut sigma = CMat::zeros(m, m);
    for col in batch.snapshots.column_iter() {
        sigma += &col * col.adjoint();
    }
    sigma /= C64::new(l as f64, 0.0);
    hermitize(&sigma)
}

/// Co-array moment estimates: per-lag means of a covariance estimate.
#[derive(Debug, Clone, Serialize)]
pub struct CoarrayObservation {
    /// Lags carrying an estimate: the difference set of the array.
    pub omega: IndexSet,
    /// Estimates aligned with `omega.indices()`; the lag-0 entry has the
    /// known noise power removed and is real.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub y: CVec,
    /// Number of element pairs averaged per lag, aligned with `omega`.
    pub weights: Vec<usize>,
}

/// Average a covariance matrix along equal element differences and remove
/// the noise contribution from lag zero.
pub fn coarray_average(sigma: &CMat, array: &IndexSet, sigma2: f64) -> Result<CoarrayObservation> {
    let m = array.len();
    if sigma.nrows() != m || sigma.ncols() != m {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {}x{} for an array of {} elements",
            sigma.nrows(),
            sigma.ncols(),
            m
        )));
    }
    let idx = array.indices();
    let omega = array.difference_set();
    let mut sums = vec![C64::new(0.0, 0.0); omega.len()];
    let mut counts = vec![0usize; omega.len()];
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            if ia < ib {
                continue;
            }
            let lag = ia - ib;
            let pos = omega.position(lag).expect("lag is in the difference set");
            sums[pos] += sigma[(a, b)];
            counts[pos] += 1;
        }
    }
    let mut y = CVec::zeros(omega.len());
    for (pos, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        y[pos] = s / C64::new(c as f64, 0.0);
    }
    // Noise only shows on the diagonal; what remains of lag 0 is a power.
    let zero_pos = omega.position(0).expect("difference set contains 0");
    y[zero_pos] = C64::new(y[zero_pos].re - sigma2, 0.0);
    Ok(CoarrayObservation { omega, y, weights: counts })
}

/// Best nonnegative-amplitude fit of atoms at `taus` to the observed lags.
/// Each lag row is scaled by the square root of its pair count, so lags
/// averaged over more element pairs (hence lower variance) count more.
/// Returns the weighted residual and the fitted amplitudes; an infeasible
/// fit scores as infinite.
fn weighted_fit(taus: &[f64], obs: &CoarrayObservation, n: usize) -> (f64, Vec<f64>) {
    if taus.is_empty() {
        return (f64::INFINITY, Vec::new());
    }
    let rows = obs.y.len();
    let mut a = CMat::zeros(rows, taus.len());
    let mut yw = obs.y.clone();
    for (k, &tau) in taus.iter().enumerate() {
        let full = match atom(tau, n) {
            Ok(v) => v,
            Err(_) => return (f64::INFINITY, Vec::new()),
        };
        for (d, &lag) in obs.omega.indices().iter().enumerate() {
            a[(d, k)] = full[lag];
        }
    }
    for d in 0..rows {
        let s = C64::from((obs.weights[d] as f64).sqrt());
        yw[d] *= s;
        for k in 0..taus.len() {
            a[(d, k)] *= s;
        }
    }
    match nnls_complex(&a, &yw) {
        Ok(c) => {
            let mut fit = CVec::zeros(rows);
            for k in 0..taus.len() {
                for d in 0..rows {
                    fit[d] += a[(d, k)] * C64::from(c[k]);
                }
            }
            ((yw - fit).norm(), c.iter().copied().collect())
        }
        Err(_) => (f64::INFINITY, Vec::new()),
    }
}

/// All `k`-element index subsets of `0..n` in lexicographic order.
fn index_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// One coordinate-descent pass cycle over `subset`: each position scans a
/// window of `ORDER_POLISH_RADIUS / n` around itself and keeps any move
/// that lowers the weighted fit residual. Returns the refined positions
/// and their residual.
fn polish_positions(subset: &[f64], obs: &CoarrayObservation, n: usize) -> (Vec<f64>, f64) {
    let mut pos = subset.to_vec();
    let mut best = weighted_fit(&pos, obs, n).0;
    let radius = ORDER_POLISH_RADIUS / n as f64;
    for _ in 0..ORDER_POLISH_ROUNDS {
        for k in 0..pos.len() {
            let center = pos[k];
            for i in -ORDER_POLISH_STEPS..=ORDER_POLISH_STEPS {
                if i == 0 {
                    continue;
                }
                let t = (center + i as f64 * radius / ORDER_POLISH_STEPS as f64).rem_euclid(1.0);
                let mut trial = pos.clone();
                trial[k] = t;
                let r = weighted_fit(&trial, obs, n).0;
                if r < best {
                    best = r;
                    pos = trial;
                }
            }
        }
    }
    (pos, best)
}

/// Pick exactly `order` source locations out of a larger candidate list by
/// how well atoms at those locations explain the observed lags.
///
/// Stages: greedy backward elimination under the weighted fit residual
/// down to a pool of `order + ORDER_POOL_EXTRA`, exhaustive scoring of
/// every `order`-subset of the pool, then coordinate-descent refinement of
/// the `ORDER_POLISH_TOP` best subsets. The refined set with the lowest
/// residual wins. With `order` or fewer candidates the list only gets the
/// refinement pass.
pub fn select_by_model_order(
    candidates: &[f64],
    order: usize,
    obs: &CoarrayObservation,
    n: usize,
) -> Vec<f64> {
    let mut pool = candidates.to_vec();
    while pool.len() > order + ORDER_POOL_EXTRA {
        let mut drop_i = 0;
        let mut drop_r = f64::INFINITY;
        for i in 0..pool.len() {
            let mut trial = pool.clone();
            trial.remove(i);
            let r = weighted_fit(&trial, obs, n).0;
            if r < drop_r {
                drop_r = r;
                drop_i = i;
            }
        }
        pool.remove(drop_i);
    }
    let (mut positions, _) = if pool.len() <= order {
        polish_positions(&pool, obs, n)
    } else {
        let mut scored: Vec<(f64, Vec<f64>)> = index_subsets(pool.len(), order)
            .into_iter()
            .map(|combo| {
                let subset: Vec<f64> = combo.iter().map(|&i| pool[i]).collect();
                (weighted_fit(&subset, obs, n).0, subset)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut winner = (Vec::new(), f64::INFINITY);
        for (_, subset) in scored.into_iter().take(ORDER_POLISH_TOP) {
            let (pos, r) = polish_positions(&subset, obs, n);
            if r < winner.1 {
                winner = (pos, r);
            }
        }
        winner
    };
    positions.sort_by(f64::total_cmp);
    positions
}

/// Pipeline settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DoaConfig {
    pub num_snapshots: usize,
    pub snr_db: f64,
    pub seed: u64,
    /// Weight on total power in the denoising objective.
    pub lambda: f64,
    /// Dual polynomial evaluation grid.
    pub grid_size: usize,
    /// Peak acceptance level on `Re Q`.
    pub peak_threshold: f64,
    /// Known source count. When set, exactly this many locations are kept,
    /// chosen from the dual-polynomial peaks by weighted fit residual; when
    /// unset every peak above the threshold is reported.
    pub num_sources: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for DoaConfig {
    fn default() -> Self {
        Self {
            num_snapshots: 100,
            snr_db: 0.0,
            seed: 0,
            lambda: 0.1,
            grid_size: 4096,
            peak_threshold: NOISY_PEAK_THRESHOLD,
            num_sources: None,
            solver: SolverConfig::default(),
        }
    }
}

/// End-to-end result of one direction-finding run.
#[derive(Debug, Clone, Serialize)]
pub struct DoaOutcome {
    pub estimate: SourceEstimate,
    /// Estimated sources against the generating model.
    pub truth_match: MatchReport,
    pub observation: CoarrayObservation,
    pub sigma2: f64,
    /// Number of solver iterations and convergence status.
    pub iterations: usize,
    pub status: SolveStatus,
    pub objective: f64,
    /// Dual polynomial coefficients used for peak extraction.
    #[serde(with = "crate::serde_util::complex_vec")]
    pub q_hat: CVec,
    /// Whether the instance sits inside the recovery guarantee: fewer
    /// sources than elements and an array spanning lags 0 and N-1.
    pub guarantee: bool,
}

/// Simulate snapshots, average onto the co-array, denoise under the
/// compressed semidefinite constraint, and read sources off the dual
/// polynomial with nonnegative amplitude refitting.
pub fn run_doa(model: &SourceModel, array: &IndexSet, config: &DoaConfig) -> Result<DoaOutcome> {
    model.validate()?;
    let sigma2 = model.sigma2_for_snr_db(config.snr_db);
    let batch = simulate_snapshots(model, array, config.num_snapshots, sigma2, config.seed)?;
    let sigma = empirical_covariance(&batch);
    let observation = coarray_average(&sigma, array, sigma2)?;
    doa_from_observation(model, array, observation, sigma2, config)
}

/// The inference half of [`run_doa`], reusable on externally supplied
/// co-array estimates.
pub fn doa_from_observation(
    model: &SourceModel,
    array: &IndexSet,
    observation: CoarrayObservation,
    sigma2: f64,
    config: &DoaConfig,
) -> Result<DoaOutcome> {
    let n = model.aperture;
    let problem = ProblemSpec {
        ambient: n,
        omega: observation.omega.clone(),
        observed: observation.y.clone(),
        compression: array.clone(),
        mode: Mode::Denoise { lambda: config.lambda },
    };
    let solution = solve(&problem, &config.solver)?;

    let raw_peaks = peaks_of_dual(&solution.q_hat, config.grid_size, config.peak_threshold);
    let estimate = if raw_peaks.is_empty() {
        SourceEstimate {
            taus: Vec::new(),
            amplitudes: Vec::new(),
            method: RecoveryMethod::DualPeaks,
            residual: observation.y.norm(),
        }
    } else if let Some(order) = config.num_sources {
        // The known model order pins the support size: keep exactly that
        // many locations, even if some fit at zero power.
        let taus = select_by_model_order(&raw_peaks, order, &observation, n);
        let (_, mut amplitudes) = weighted_fit(&taus, &observation, n);
        if amplitudes.len() != taus.len() {
            amplitudes = vec![0.0; taus.len()];
        }
        let mut fitted = CVec::zeros(observation.y.len());
        for (&tau, &amp) in taus.iter().zip(&amplitudes) {
            fitted += observation.omega.selection().select(&atom(tau, n)?)? * C64::from(amp);
        }
        SourceEstimate {
            taus,
            amplitudes,
            method: RecoveryMethod::DualPeaks,
            residual: (fitted - &observation.y).norm(),
        }
    } else {
        let taus = raw_peaks;
        // Refit powers on the observed lags only; the peak positions come
        // from the dual, the masses from the data.
        let mut est = fit_amplitudes(&taus, &observation.y, RecoveryMethod::DualPeaks)?;
        // fit_amplitudes fits against full-length moments; rebuild against
        // the observed lags when the co-array has holes.
        if !observation.omega.is_full() {
            let mut a = CMat::zeros(observation.omega.len(), taus.len());
            for (k, &tau) in taus.iter().enumerate() {
                let col = observation.omega.selection().select(&atom(tau, n)?)?;
                a.set_column(k, &col);
            }
            let c = crate::nnls::nnls_complex(&a, &observation.y)?;
            let mut kept_taus = Vec::new();
            let mut kept_amps = Vec::new();
            let c_max = c.max().max(0.0);
            for (k, &tau) in taus.iter().enumerate() {
                if c[k] > 1e-12 * c_max && c[k] > 0.0 {
                    kept_taus.push(tau);
                    kept_amps.push(c[k]);
                }
            }
            let mut fitted = CVec::zeros(observation.omega.len());
            for (&tau, &amp) in kept_taus.iter().zip(&kept_amps) {
                fitted +=
                    observation.omega.selection().select(&atom(tau, n)?)? * C64::new(amp, 0.0);
            }
            est = SourceEstimate {
                taus: kept_taus,
                amplitudes: kept_amps,
                method: RecoveryMethod::DualPeaks,
                residual: (fitted - &observation.y).norm(),
            };
        }
        est
    };

    let truth_match = match_sources(&estimate.taus, &model.taus);
    let guarantee = model.taus.len() < array.len()
        && array.contains(0)
        && array.contains(n.saturating_sub(1));

    Ok(DoaOutcome {
        truth_match,
        observation,
        sigma2,
        iterations: solution.iterations,
        status: solution.status,
        objective: solution.objective,
        q_hat: solution.q_hat.clone(),
        guarantee,
        estimate,
    })
}
