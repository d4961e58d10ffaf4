//! Throwaway diagnostics for the criterion-1 instance stream: why does the
//! atomic completion path reject, and what does each fallback cost?

use canm::geometry::IndexSet;
use canm::linalg::{atom, CMat, CVec, TrigPolynomial, C64};
use canm::nnls::nnls_complex;
use canm::recovery::{circle_distance, peaks_of_dual};
use canm::solver::{solve, Mode, ProblemSpec, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    n: usize,
    taus: Vec<f64>,
    amps: Vec<f64>,
    i_set: IndexSet,
    omega: IndexSet,
    x_star: CVec,
}

fn draw_instance(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize, p_hi: usize, min_sep: f64) -> Instance {
    let n = rng.random_range(n_lo..=n_hi);
    let p = rng.random_range(1..=p_hi);
    let rows = (p + 1 + rng.random_range(0..=3)).min(n);
    let mut indices = vec![0usize];
    while indices.len() < rows {
        let candidate = rng.random_range(1..n);
        if !indices.contains(&candidate) {
            indices.push(candidate);
        }
    }
    let i_set = IndexSet::new(indices, n).unwrap();
    let mut lags: Vec<usize> = i_set.difference_set().indices().to_vec();
    for lag in 0..=p.min(n - 1) {
        if !lags.contains(&lag) {
            lags.push(lag);
        }
    }
    let omega = IndexSet::new(lags, n).unwrap();
    let mut taus: Vec<f64> = Vec::with_capacity(p);
    while taus.len() < p {
        let t = rng.random::<f64>();
        if taus.iter().all(|&s| circle_distance(s, t) > min_sep) {
            taus.push(t);
        }
    }
    taus.sort_by(f64::total_cmp);
    let amps: Vec<f64> = (0..p).map(|_| 0.5 + 1.5 * rng.random::<f64>()).collect();
    let mut x_star = CVec::zeros(n);
    for (&t, &c) in taus.iter().zip(&amps) {
        x_star += atom(t, n).unwrap() * C64::from(c);
    }
    Instance { n, taus, amps, i_set, omega, x_star }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let config = SolverConfig {
        eps_abs: 1e-9,
        eps_rel: 1e-8,
        max_iters: 200_000,
        complete_free_lags: false,
        ..SolverConfig::default()
    };
    let mut fallbacks = 0;
    for idx in 0..100 {
        let inst = draw_instance(&mut rng, 12, 64, 4, 1e-9);
        let problem = ProblemSpec {
            ambient: inst.n,
            omega: inst.omega.clone(),
            observed: inst.omega.selection().select(&inst.x_star).unwrap(),
            compression: inst.i_set.clone(),
            mode: Mode::Exact,
        };
        let t0 = std::time::Instant::now();
        let solution = solve(&problem, &config).unwrap();
        let outer_secs = t0.elapsed().as_secs_f64();
        let determined = inst.i_set.difference_set().union(&inst.omega).unwrap();
        if determined.len() == inst.n {
            continue;
        }
        let n = inst.n;
        let p = inst.taus.len();
        let minsep = (0..p)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| circle_distance(inst.taus[i], inst.taus[j]))
            .fold(f64::INFINITY, f64::min);

        // Step 1: peak extraction exactly as the library does it.
        let taus_merged = peaks_of_dual(&solution.q_hat, (16 * n).max(512), 1.0 - 1e-4);

        // Merge-free scan on a finer grid for comparison.
        let poly = TrigPolynomial::new(solution.q_hat.clone());
        let g = 64 * n;
        let vals: Vec<f64> = (0..g).map(|i| poly.eval_re(i as f64 / g as f64)).collect();
        let mut raw_peaks = Vec::new();
        for i in 0..g {
            let prev = vals[(i + g - 1) % g];
            let next = vals[(i + 1) % g];
            if vals[i] >= prev && vals[i] > next && vals[i] >= 1.0 - 1e-4 {
                raw_peaks.push(i as f64 / g as f64);
            }
        }

        // Dual polynomial height at each true source.
        let min_height = inst
            .taus
            .iter()
            .map(|&t| poly.eval_re(t))
            .fold(f64::INFINITY, f64::min);

        // Step 2: Newton polish + NNLS fit, as the library does.
        let d1 = poly.derivative();
        let d2 = d1.derivative();
        let clamp = 1.0 / (16.0 * n as f64);
        let mut taus_pol = taus_merged.clone();
        for tau in taus_pol.iter_mut() {
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
        let values = CVec::from_vec(
            rows.iter().map(|&d| solution.x_hat[d]).collect::<Vec<_>>(),
        );
        let fit_rel = if taus_pol.is_empty() {
            f64::INFINITY
        } else {
            let mut basis = CMat::zeros(rows.len(), taus_pol.len());
            for (col, &tau) in taus_pol.iter().enumerate() {
                let full = atom(tau, n).unwrap();
                for (r, &lag) in rows.iter().enumerate() {
                    basis[(r, col)] = full[lag];
                }
            }
            match nnls_complex(&basis, &values) {
                Ok(powers) => {
                    let mut fitted = CVec::zeros(rows.len());
                    for (col, &tau) in taus_pol.iter().enumerate() {
                        let full = atom(tau, n).unwrap();
                        for (r, &lag) in rows.iter().enumerate() {
                            fitted[r] += full[lag] * powers[col];
                        }
                    }
                    (&fitted - &values).norm() / (1.0 + values.norm())
                }
                Err(_) => f64::INFINITY,
            }
        };
        let guard = taus_pol.len() >= determined.len();
        let accept = !guard && !taus_pol.is_empty() && fit_rel <= 1e-6;
        if !accept {
            fallbacks += 1;
        }
        println!(
            "inst {idx:3}: n={n:2} p={p} |det|={det} minsep*n={msn:8.3} outer={os:6.2}s it={it:6} \
             peaks={pk} raw={raw} minh={mh:+.2e} fit={fr:.2e} {verdict}",
            det = determined.len(),
            msn = minsep * n as f64,
            os = outer_secs,
            it = solution.iterations,
            pk = taus_merged.len(),
            raw = raw_peaks.len(),
            mh = min_height - 1.0,
            fr = fit_rel,
            verdict = if accept { "ACCEPT" } else { "FALLBACK" },
        );
        let _ = inst.amps;
    }
    println!("fallbacks: {fallbacks}");
}
