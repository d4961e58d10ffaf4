use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use canm::linalg::CVec;

fn err(e: canm::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn index_set(indices: Vec<usize>, ambient: usize) -> PyResult<canm::geometry::IndexSet> {
    canm::geometry::IndexSet::new(indices, ambient).map_err(err)
}

fn to_cvec(x: Vec<Complex64>) -> CVec {
    CVec::from_vec(x)
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Moment atom `[1, e^{i 2 pi tau}, ..., e^{i 2 pi (n-1) tau}]`.
#[pyfunction]
fn atom(tau: f64, n: usize) -> PyResult<Vec<Complex64>> {
    Ok(canm::linalg::atom(tau, n).map_err(err)?.iter().copied().collect())
}

/// Hermitian Toeplitz lift of a lag vector, returned row-major.
#[pyfunction]
fn toeplitz(x: Vec<Complex64>) -> Vec<Vec<Complex64>> {
    let t = canm::linalg::toeplitz(&to_cvec(x));
    (0..t.nrows())
        .map(|i| (0..t.ncols()).map(|j| t[(i, j)]).collect())
        .collect()
}

/// Element positions and ambient size of the sparse ruler of the given
/// order.
#[pyfunction]
fn cantor_array(order: u32) -> PyResult<(Vec<usize>, usize)> {
    let set = canm::geometry::cantor_array(order).map_err(err)?;
    Ok((set.indices().to_vec(), set.ambient()))
}

/// All nonnegative pairwise differences of the index set.
#[pyfunction]
fn difference_set(indices: Vec<usize>, ambient: usize) -> PyResult<Vec<usize>> {
    Ok(index_set(indices, ambient)?.difference_set().indices().to_vec())
}

/// Whether the differences of the set cover every lag `0..ambient`.
#[pyfunction]
fn is_complete(indices: Vec<usize>, ambient: usize) -> PyResult<bool> {
    Ok(index_set(indices, ambient)?.difference_set().is_full())
}

/// Build the dual certificate for sources `taus` under the compression
/// rows `indices`. Returns the polynomial coefficients and whether all
/// four certificate conditions verify on the minimal observation set.
#[pyfunction]
fn construct_certificate(
    taus: Vec<f64>,
    indices: Vec<usize>,
    ambient: usize,
) -> PyResult<(Vec<Complex64>, bool)> {
    let i_set = index_set(indices, ambient)?;
    let cert = canm::certificate::construct(&taus, &i_set).map_err(err)?;
    let pass = cert.report.all_pass();
    Ok((cert.q.iter().copied().collect(), pass))
}

/// Full certification of a recovery instance, as a JSON report.
#[pyfunction]
fn certify(
    taus: Vec<f64>,
    amplitudes: Vec<f64>,
    i_indices: Vec<usize>,
    omega_indices: Vec<usize>,
    ambient: usize,
) -> PyResult<String> {
    let i_set = index_set(i_indices, ambient)?;
    let omega = index_set(omega_indices, ambient)?;
    let outcome = canm::certificate::certify_with_details(&taus, &amplitudes, &i_set, &omega)
        .map_err(err)?;
    json(&outcome)
}

/// Solve the program described by a scenario JSON document; the solution
/// comes back as JSON.
#[pyfunction]
fn solve_scenario(py: Python<'_>, scenario_json: &str) -> PyResult<String> {
    let scenario = canm::scenario::Scenario::from_json(scenario_json).map_err(err)?;
    let problem = scenario.problem().map_err(err)?;
    let solver = scenario.solver.clone();
    let solution = py
        .detach(move || canm::solver::solve(&problem, &solver))
        .map_err(err)?;
    json(&solution)
}

/// Run the snapshot-statistics pipeline described by a scenario JSON
/// document; the outcome comes back as JSON.
#[pyfunction]
fn run_doa(py: Python<'_>, scenario_json: &str) -> PyResult<String> {
    let scenario = canm::scenario::Scenario::from_json(scenario_json).map_err(err)?;
    let model = scenario.model().map_err(err)?;
    let array = scenario.array.build().map_err(err)?;
    let config = canm::doa::DoaConfig {
        num_snapshots: scenario
            .snapshots
            .ok_or_else(|| PyValueError::new_err("scenario needs a snapshot count"))?,
        snr_db: scenario
            .snr_db
            .ok_or_else(|| PyValueError::new_err("scenario needs snr_db"))?,
        seed: scenario.seed,
        lambda: scenario.lambda.unwrap_or(0.1),
        grid_size: scenario.grid_size.unwrap_or(4096),
        peak_threshold: scenario
            .peak_threshold
            .unwrap_or(canm::recovery::NOISY_PEAK_THRESHOLD),
        num_sources: scenario.num_sources,
        solver: scenario.solver.clone(),
    };
    let outcome = py
        .detach(move || canm::doa::run_doa(&model, &array, &config))
        .map_err(err)?;
    json(&outcome)
}

/// Recover source locations and powers from a full lag vector whose
/// Toeplitz lift is (numerically) positive semidefinite.
#[pyfunction]
fn vandermonde_decompose(
    x: Vec<Complex64>,
    rank_tol: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let est = canm::recovery::vandermonde_decompose(&to_cvec(x), rank_tol).map_err(err)?;
    Ok((est.taus, est.amplitudes))
}

/// Locations where `Re Q` peaks above the threshold on a uniform grid,
/// refined by local interpolation.
#[pyfunction]
fn peaks_of_dual(q: Vec<Complex64>, grid_size: usize, threshold: f64) -> Vec<f64> {
    canm::recovery::peaks_of_dual(&to_cvec(q), grid_size, threshold)
}

#[pymodule]
fn canm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(atom, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz, m)?)?;
    m.add_function(wrap_pyfunction!(cantor_array, m)?)?;
    m.add_function(wrap_pyfunction!(difference_set, m)?)?;
    m.add_function(wrap_pyfunction!(is_complete, m)?)?;
    m.add_function(wrap_pyfunction!(construct_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_doa, m)?)?;
    m.add_function(wrap_pyfunction!(vandermonde_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(peaks_of_dual, m)?)?;
    Ok(())
}
