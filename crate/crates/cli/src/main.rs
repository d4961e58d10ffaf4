//! Command-line front end: array inspection, certificate checking, program
//! solving, the snapshot pipeline, and the timing table. Every command
//! writes JSON/CSV next to a manifest describing exactly what ran.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use canm::bench::{bench_csv, run_bench, BenchConfig};
use canm::certificate;
use canm::doa::{run_doa, DoaConfig};
use canm::error::Error;
use canm::geometry::cantor_array;
use canm::linalg::TrigPolynomial;
use canm::recovery::{
    match_sources, vandermonde_decompose, EXACT_RANK_TOL, NOISY_PEAK_THRESHOLD, NOISY_RANK_TOL,
};
use canm::scenario::{RunManifest, Scenario, ScenarioMode};
use canm::solver::{solve, SolveStatus};

#[derive(Parser)]
#[command(
    name = "canm",
    version,
    about = "Positive line-spectrum recovery with compressed semidefinite programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a fractal sparse array and check its co-array for holes
    Cantor(CantorArgs),
    /// Construct and verify the dual certificate for a scenario
    Certify(ScenarioIo),
    /// Solve a scenario's program and estimate the sources
    Recover(ScenarioIo),
    /// Simulate snapshots and run the statistics pipeline
    Doa(ScenarioIo),
    /// Time the full program against the compressed one across orders
    Bench(BenchArgs),
}

#[derive(Args)]
struct CantorArgs {
    /// Construction order (1 gives {0,1})
    #[arg(long)]
    order: u32,
    /// Directory for JSON output; stdout only when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioIo {
    /// Scenario JSON path
    #[arg(long)]
    config: PathBuf,
    /// Directory for outputs (default: current directory)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the evaluation grid size
    #[arg(long)]
    grid: Option<usize>,
    /// Override the solver's absolute tolerance (relative becomes 10x);
    /// certificate conditions are fixed and unaffected
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Optional BenchConfig JSON; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated construction orders
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u32>>,
    /// Sources per trial
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the solver's absolute tolerance (relative becomes 10x)
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cantor(args) => cmd_cantor(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Recover(args) => cmd_recover(args),
        Command::Doa(args) => cmd_doa(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Schema(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Write one file under the output directory and log it in the manifest.
fn emit(dir: &Path, manifest: &mut RunManifest, name: &str, content: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Schema(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display())))?;
    manifest.record_output(&path);
    Ok(())
}

/// JSON payloads name the manifest written next to them.
const MANIFEST_NAME: &str = "manifest.json";

fn with_manifest_ref(mut value: serde_json::Value) -> serde_json::Value {
    if let Some(map) = value.as_object_mut() {
        map.insert("manifest".into(), json!(MANIFEST_NAME));
    }
    value
}

fn finish(dir: &Path, manifest: &mut RunManifest) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Schema(e.to_string()))? + "\n";
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, text)
        .map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn pretty(value: &serde_json::Value) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))? + "\n")
}

fn dual_polynomial_csv(q: &canm::linalg::CVec, grid_size: usize) -> String {
    let poly = TrigPolynomial::new(q.clone());
    let mut out = String::from("tau,re_q\n");
    for g in 0..grid_size {
        let tau = g as f64 / grid_size as f64;
        out.push_str(&format!("{tau:.8},{:.12}\n", poly.eval_re(tau)));
    }
    out
}

fn load_scenario(args: &ScenarioIo) -> Result<Scenario, Error> {
    let mut scenario = Scenario::load(&args.config)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(grid) = args.grid {
        scenario.grid_size = Some(grid);
    }
    if let Some(tol) = args.tol {
        scenario.solver.eps_abs = tol;
        scenario.solver.eps_rel = 10.0 * tol;
        scenario.solver.validate()?;
    }
    Ok(scenario)
}

fn scenario_manifest(command: &str, args: &ScenarioIo, scenario: &Scenario) -> Result<RunManifest, Error> {
    Ok(RunManifest::new(
        command,
        args.config.to_str(),
        serde_json::to_value(scenario).map_err(|e| Error::Schema(e.to_string()))?,
        scenario.seed,
    ))
}

fn cmd_cantor(args: CantorArgs) -> Result<ExitCode, Error> {
    let array = cantor_array(args.order)?;
    let coarray = array.difference_set();
    let complete = coarray.is_complete();
    println!(
        "order {}: {} elements, aperture {}, co-array complete: {}",
        args.order,
        array.len(),
        array.ambient(),
        complete
    );
    println!("elements: {:?}", array.indices());

    if let Some(dir) = &args.out {
        let mut manifest = RunManifest::new(
            "cantor",
            None,
            json!({"order": args.order}),
            0,
        );
        let payload = with_manifest_ref(json!({
            "order": args.order,
            "elements": array.indices(),
            "ambient": array.ambient(),
            "cardinality": array.len(),
            "coarray": coarray.indices(),
            "complete": complete,
        }));
        emit(dir, &mut manifest, "cantor.json", &pretty(&payload)?)?;
        finish(dir, &mut manifest)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(args: ScenarioIo) -> Result<ExitCode, Error> {
    let scenario = load_scenario(&args)?;
    let array = scenario.array.build()?;
    let omega = scenario.resolve_omega(&array)?;
    let compression = scenario.resolve_compression(&array)?;

    let outcome =
        certificate::certify_with_details(&scenario.taus, &scenario.powers, &compression, &omega)?;

    let mut manifest = scenario_manifest("certify", &args, &scenario)?;
    let payload = with_manifest_ref(
        serde_json::to_value(&outcome).map_err(|e| Error::Schema(e.to_string()))?,
    );
    emit(&args.out, &mut manifest, "certificate.json", &pretty(&payload)?)?;
    finish(&args.out, &mut manifest)?;

    if outcome.certified {
        println!("certified: every hypothesis and certificate condition holds");
        return Ok(ExitCode::SUCCESS);
    }
    if !outcome.hypotheses.sources_below_rows {
        println!(
            "not certified: p < M violated ({} sources, {} rows)",
            outcome.hypotheses.num_sources, outcome.hypotheses.num_rows
        );
    } else if !outcome.hypotheses.boundary_missing.is_empty() {
        println!(
            "not certified: observation set is missing co-array lags {:?}",
            outcome.hypotheses.boundary_missing
        );
    } else if !outcome.hypotheses.contains_zero {
        println!("not certified: compression set does not contain lag 0");
    } else if let Some(cert) = &outcome.certificate {
        println!("not certified: a certificate condition failed: {:?}", cert.report);
    }
    Ok(ExitCode::from(1))
}

fn cmd_recover(args: ScenarioIo) -> Result<ExitCode, Error> {
    let scenario = load_scenario(&args)?;
    let problem = scenario.problem()?;
    let solution = solve(&problem, &scenario.solver)?;

    let rank_tol = match scenario.mode {
        ScenarioMode::Exact => EXACT_RANK_TOL,
        ScenarioMode::Denoise => NOISY_RANK_TOL,
    };
    let estimate = vandermonde_decompose(&solution.x_hat, rank_tol)?;
    let truth_match = match_sources(&estimate.taus, &scenario.taus);
    let grid_size = scenario.grid_size.unwrap_or(4096);

    println!(
        "status {:?} after {} iterations, objective {:.6}",
        solution.status, solution.iterations, solution.objective
    );
    println!(
        "{} sources estimated; worst frequency error {:.3e}",
        estimate.len(),
        truth_match.max_distance
    );

    let mut manifest = scenario_manifest("recover", &args, &scenario)?;
    let payload = with_manifest_ref(json!({
        "estimate": estimate,
        "truth_match": truth_match,
        "objective": solution.objective,
        "iterations": solution.iterations,
        "status": solution.status,
        "primal_residual": solution.primal_residual,
        "dual_residual": solution.dual_residual,
        "completion": solution.completion,
        "wall_time_seconds": solution.wall_time_seconds,
    }));
    emit(&args.out, &mut manifest, "estimate.json", &pretty(&payload)?)?;
    emit(&args.out, &mut manifest, "estimate.csv", &estimate.to_csv())?;
    emit(
        &args.out,
        &mut manifest,
        "dual_polynomial.csv",
        &dual_polynomial_csv(&solution.q_hat, grid_size),
    )?;
    finish(&args.out, &mut manifest)?;

    if matches!(solution.status, SolveStatus::Converged) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("solver did not converge");
        Ok(ExitCode::from(1))
    }
}

fn cmd_doa(args: ScenarioIo) -> Result<ExitCode, Error> {
    let scenario = load_scenario(&args)?;
    let model = scenario.model()?;
    let array = scenario.array.build()?;
    let config = DoaConfig {
        num_snapshots: scenario.snapshots.ok_or_else(|| {
            Error::Schema("the statistics pipeline requires a snapshot count".into())
        })?,
        snr_db: scenario
            .snr_db
            .ok_or_else(|| Error::Schema("the statistics pipeline requires snr_db".into()))?,
        seed: scenario.seed,
        lambda: scenario.lambda.unwrap_or(0.1),
        grid_size: scenario.grid_size.unwrap_or(4096),
        peak_threshold: scenario.peak_threshold.unwrap_or(NOISY_PEAK_THRESHOLD),
        num_sources: scenario.num_sources,
        solver: scenario.solver.clone(),
    };
    let outcome = run_doa(&model, &array, &config)?;

    println!(
        "status {:?} after {} iterations; {} peaks; worst matched error {:.3e}; guarantee: {}",
        outcome.status,
        outcome.iterations,
        outcome.estimate.len(),
        outcome.truth_match.max_distance,
        outcome.guarantee
    );

    let mut manifest = scenario_manifest("doa", &args, &scenario)?;
    let payload = with_manifest_ref(
        serde_json::to_value(&outcome).map_err(|e| Error::Schema(e.to_string()))?,
    );
    emit(&args.out, &mut manifest, "doa.json", &pretty(&payload)?)?;
    emit(&args.out, &mut manifest, "estimate.csv", &outcome.estimate.to_csv())?;
    emit(
        &args.out,
        &mut manifest,
        "dual_polynomial.csv",
        &dual_polynomial_csv(&outcome.q_hat, config.grid_size),
    )?;
    finish(&args.out, &mut manifest)?;

    if matches!(outcome.status, SolveStatus::Converged) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("solver did not converge");
        Ok(ExitCode::from(1))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<BenchConfig>(&text)
                .map_err(|e| Error::Schema(e.to_string()))?
        }
        None => BenchConfig::default(),
    };
    if let Some(orders) = args.orders {
        config.orders = orders;
    }
    if let Some(p) = args.p {
        config.p = p;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tol) = args.tol {
        config.solver.eps_abs = tol;
        config.solver.eps_rel = 10.0 * tol;
    }
    config.solver.validate()?;

    let rows = run_bench(&config)?;
    let csv = bench_csv(&rows);
    print!("{csv}");
    for row in &rows {
        if row.full_failures + row.compressed_failures > 0 {
            eprintln!(
                "order {}: {} full / {} compressed solves hit the iteration cap",
                row.order, row.full_failures, row.compressed_failures
            );
        }
    }

    let mut manifest = RunManifest::new(
        "bench",
        args.config.as_deref().and_then(Path::to_str),
        serde_json::to_value(&config).map_err(|e| Error::Schema(e.to_string()))?,
        config.seed,
    );
    let payload = with_manifest_ref(json!({ "rows": rows }));
    emit(&args.out, &mut manifest, "bench.json", &pretty(&payload)?)?;
    emit(&args.out, &mut manifest, "bench.csv", &csv)?;
    finish(&args.out, &mut manifest)?;
    Ok(ExitCode::SUCCESS)
}
