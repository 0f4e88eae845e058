//! Certification of quantum nonclassicality from matrices of phase-space
//! distribution values.
//!
//! The library evaluates Gaussian-smoothed phase-space distributions of
//! bosonic states in a truncated Fock basis, assembles Hadamard-factored
//! matrices of those values at tuples of points, and tests the matrices for
//! positive semidefiniteness: any negative eigenvalue, leading principal
//! minor, or determinant certifies that the state has no classical (positive
//! P-function) model. On top of the evaluation core sit closed-form witness
//! criteria, parameter-search helpers that hunt for the strongest violation,
//! and a Monte Carlo simulator of a click-detector scheme that estimates the
//! same matrices from finite counting statistics.

pub mod detector;
pub mod error;
pub mod expectation;
pub mod fock;
pub mod optimize;
pub mod phase;
pub mod special;
pub mod state;
pub mod states;
pub mod witness;

pub use detector::{
    bootstrap_det, estimate_matrix, joint_noclick_probability, lo_to_alpha, sample_entry,
    BootstrapSummary, DetectorModel, EstimatedMatrix, SchemeConfig,
};
pub use error::{Error, Result};
pub use expectation::{
    check_normalization, displaced_poly_gaussian, distribution, gaussian_pair_expectation,
    nexp, nonlinear_pair_expectation, nonlinear_pair_expectation_fd, GridSpec,
    NormalizationCheck, DEFAULT_NONLINEAR_ORDER, MAX_WINDOW,
};
pub use phase::{pair_geometry, s_from_sigma, sigma_from_s, PairGeometry, PhasePoint, WidthParameter};
pub use state::DensityMatrix;
pub use states::{analytic_q, make_state, optimal_point, AnalyticQ, StateKind, StateSpec};
pub use optimize::{
    evaluate_criterion, minimize, scan, CriterionSpec, FreeParam, ScanAxis, ScanCell, ScanTable,
    SearchResult, SearchSpec, Strategy, DEFAULT_AMPLITUDE_RADIUS, DEFAULT_GRID_RESOLUTION,
};
pub use witness::{
    build_matrix, chebyshev_criterion, nonlinear_pair_criterion, pair_criterion, qq_multi,
    qq_pair, report, three_by_three, wigner_husimi_two_mode, wq_criterion, PhaseSpaceMatrix,
    QSource, WitnessReport, POSITIVITY_TOLERANCE,
};

/// Complex amplitude type used throughout the crate.
pub use num_complex::Complex64;
