//! Polynomial transformation of block-encoded matrices.

mod circuit;
mod phases;
mod poly;
mod prepare;

pub use circuit::{apply_qsvt, svt_oracle, QsvtCircuit};
pub use phases::{qsp_eval, qsp_unitary, solve_from_coeffs, solve_phase_factors, PhaseFactorSequence};
pub use poly::{
    approximate_target, approximate_target_capped, chebyshev_eval, degree_budget, target_f, target_g,
    PolynomialTarget, DEFAULT_DEGREE_CAP, DEGREE_C, POLY_BOUND,
};
pub use prepare::{prepare_value_state, stage_eps, PrepareOptions, ValueState};
