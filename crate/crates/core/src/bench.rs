//! Timing harness contrasting the full-size program with its compressed
//! variant on self-similar sparse arrays of growing order.
//!
//! Each trial draws one random positive mixture, observes its exact moments
//! on the (complete) co-array, and solves the same denoising instance twice:
//! once with the semidefinite block on all lags and once with the block
//! compressed to the array rows. Only the solve call is timed. Denoising
//! mode keeps the iteration count meaningful: in exact mode a complete
//! co-array pins every lag and both programs converge immediately.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{cantor_array, IndexSet};
use crate::linalg::{atom, CVec, C64};
use crate::solver::{solve, Mode, ProblemSpec, SolverConfig};

/// Benchmark settings. Distinct trials reuse the generator, so a seed fixes
/// the whole table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub orders: Vec<u32>,
    /// Sources per trial.
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    pub lambda: f64,
    pub solver: SolverConfig,
}

fn bench_solver_defaults() -> SolverConfig {
    SolverConfig {
        eps_abs: 1e-6,
        eps_rel: 1e-5,
        ..SolverConfig::default()
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            orders: vec![3, 4, 5, 6],
            p: 8,
            trials: 10,
            seed: 0,
            lambda: 0.1,
            solver: bench_solver_defaults(),
        }
    }
}

/// One row of the timing table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub order: u32,
    /// Number of lags spanned by the array.
    pub aperture: usize,
    pub elements: usize,
    pub full_mean_seconds: f64,
    pub compressed_mean_seconds: f64,
    /// Ratio of the two means.
    pub speedup: f64,
    pub full_failures: usize,
    pub compressed_failures: usize,
    pub trials: usize,
}

/// Render rows as CSV with a header.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "order,aperture,elements,full_mean_seconds,compressed_mean_seconds,speedup,full_failures,compressed_failures,trials\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.3},{},{},{}\n",
            r.order,
            r.aperture,
            r.elements,
            r.full_mean_seconds,
            r.compressed_mean_seconds,
            r.speedup,
            r.full_failures,
            r.compressed_failures,
            r.trials,
        ));
    }
    out
}

/// Run the table. Both programs see identical data within a trial; wall
/// time is taken from the solver itself and excludes instance setup.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.solver.validate()?;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    for &order in &config.orders {
        let array = cantor_array(order)?;
        let n = array.ambient();
        let omega = array.difference_set();

        let mut full_total = 0.0;
        let mut compressed_total = 0.0;
        let mut full_failures = 0;
        let mut compressed_failures = 0;
        for _ in 0..config.trials {
            let mut x = CVec::zeros(n);
            for _ in 0..config.p {
                let tau = rng.random::<f64>();
                let amp = rng.random_range(0.5..2.0);
                x += atom(tau, n)? * C64::new(amp, 0.0);
            }
            let observed = omega.selection().select(&x)?;
            let base = ProblemSpec {
                ambient: n,
                omega: omega.clone(),
                observed,
                compression: IndexSet::full(n),
                mode: Mode::Denoise { lambda: config.lambda },
            };

            let full = solve(&base, &config.solver)?;
            full_total += full.wall_time_seconds;
            if !full.converged() {
                full_failures += 1;
            }

            let compressed_problem = ProblemSpec { compression: array.clone(), ..base };
            let compressed = solve(&compressed_problem, &config.solver)?;
            compressed_total += compressed.wall_time_seconds;
            if !compressed.converged() {
                compressed_failures += 1;
            }
        }

        let full_mean = full_total / config.trials as f64;
        let compressed_mean = compressed_total / config.trials as f64;
        rows.push(BenchRow {
            order,
            aperture: n,
            elements: array.len(),
            full_mean_seconds: full_mean,
            compressed_mean_seconds: compressed_mean,
            speedup: full_mean / compressed_mean,
            full_failures,
            compressed_failures,
            trials: config.trials,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_orders_compress_no_slower() {
        let config = BenchConfig {
            orders: vec![3, 4],
            trials: 3,
            seed: 1,
            ..BenchConfig::default()
        };
        let rows = run_bench(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].aperture, 10);
        assert_eq!(rows[0].elements, 8);
        assert_eq!(rows[1].aperture, 28);
        assert_eq!(rows[1].elements, 16);
        for row in &rows {
            assert_eq!(row.full_failures, 0);
            assert_eq!(row.compressed_failures, 0);
            assert!(row.full_mean_seconds > 0.0);
            assert!(row.compressed_mean_seconds > 0.0);
        }
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("order,aperture"));
        assert_eq!(csv.trim().lines().count(), 3);
    }
}
