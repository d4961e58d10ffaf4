//! Line-spectrum recovery with positive amplitudes: atomic-norm programs,
//! a compressed semidefinite variant for sparse arrays, constructive dual
//! certificates, and a direction-finding pipeline built on second-order
//! statistics.

pub mod bench;
pub mod certificate;
pub mod doa;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod nnls;
pub mod oracle;
pub mod recovery;
pub mod scenario;
pub mod serde_util;
pub mod solver;

pub use bench::{bench_csv, run_bench, BenchConfig, BenchRow};
pub use certificate::{certify_recovery, certify_with_details, Certificate, CertificateReport};
pub use doa::{
    coarray_average, empirical_covariance, run_doa, select_by_model_order, simulate_snapshots,
    DoaConfig, DoaOutcome,
    SourceModel,
};
pub use error::{Error, Result};
pub use geometry::{cantor_array, validate_compression, CompressionReport, IndexSet, SelectionOperator};
pub use linalg::{
    atom, fro_inner, general_eigenvalues, hermitian_eig, hermitize, nullspace_vector, psd_project,
    q_from_adjoint, toeplitz, toeplitz_adjoint, ExponentSign, TrigPolynomial, C64, CMat, CVec,
};
pub use nnls::{nnls, nnls_complex, stack_complex_system};
pub use oracle::{cross_validate, grid_recover, CrossValidation, GridProblem, GridSolution};
pub use recovery::{
    circle_distance, match_sources, peaks_of_dual, vandermonde_decompose, MatchReport,
    RecoveryMethod, SourceEstimate,
};
pub use scenario::{ArraySpec, RunManifest, Scenario, ScenarioMode, SetSpec};
pub use solver::{
    solve, CompletionStatus, Mode, ProblemSpec, SdpSolution, SolveStatus, SolverConfig,
};
