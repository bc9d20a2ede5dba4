//! Preparation of the normalized value vector (I + M)^{-T} V^T / |.| by
//! repeated post-selected QSVT inversion.
//!
//! Each stage applies an odd P(x) ~ a/(2x) on [a, 1], a = sigma_min/gamma, to the
//! transposed block-encoding, which realises (sigma_min / 2) (I + M)^{-1}.

use super::circuit::apply_qsvt;
use super::phases::{solve_phase_factors, PhaseFactorSequence};
use super::poly::{approximate_target_capped, PolynomialTarget, DEFAULT_DEGREE_CAP};
use crate::block_encoding::{assemble_block_encoding, BlockEncoding};
use crate::error::{QvarError, Result};
use crate::market::{MarketParams, PriceGrid};
use crate::pde::assemble_operator;
use crate::qcore::{grover_rudolph_prepare, RegisterLayout, StateVector};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct PrepareOptions {
    pub success_floor: f64,
    pub degree_cap: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self { success_floor: 1e-6, degree_cap: DEFAULT_DEGREE_CAP }
    }
}

#[derive(Debug, Clone)]
pub struct ValueState {
    pub state: StateVector,
    pub success_probability: f64,
    pub stages: usize,
    /// Degree of the per-stage polynomial.
    pub stage_degree: usize,
    /// Total block-encoding queries (sum of stage degrees).
    pub total_degree: usize,
    /// gamma / sigma_min of I + M.
    pub norm: f64,
    /// sigma_max / sigma_min of I + M.
    pub condition: f64,
    pub stage_eps: f64,
    pub phase_residual: f64,
    pub polynomial: Option<PolynomialTarget>,
    pub gamma: f64,
}

/// Per-stage sup error so that T stages stay within `eps1` in l2.
pub fn stage_eps(eps1: f64, stages: usize, condition: f64) -> f64 {
    (eps1 / (2.0 * stages.max(1) as f64 * condition)).min(0.1)
}

pub fn prepare_value_state(
    payoff: &[f64],
    params: &MarketParams,
    grid: &PriceGrid,
    eps1: f64,
    opts: PrepareOptions,
) -> Result<ValueState> {
    if payoff.len() != grid.len() {
        return Err(QvarError::Dimension("payoff length differs from grid".into()));
    }
    if !(eps1 > 0.0 && eps1 < 1.0) {
        return Err(QvarError::InvalidParam(format!("eps1 = {eps1}")));
    }
    let initial = grover_rudolph_prepare(payoff)?;
    let layout = RegisterLayout::new(&[("index", grid.n)])?;
    let stages = params.backward_steps();
    if stages == 0 {
        return Ok(ValueState {
            state: StateVector { amplitudes: initial.amplitudes, layout },
            success_probability: 0.25,
            stages: 0,
            stage_degree: 0,
            total_degree: 0,
            norm: 1.0,
            condition: 1.0,
            stage_eps: eps1,
            phase_residual: 0.0,
            polynomial: None,
            gamma: 1.0,
        });
    }
    let m_tilde = assemble_operator(params, grid)?.plus_identity();
    let be = assemble_block_encoding(&m_tilde)?;
    let sv = m_tilde.to_dense().singular_values();
    let s_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = sv.iter().copied().fold(0.0, f64::max);
    if !(s_min > 0.0) {
        return Err(QvarError::Numerical("I + M is singular".into()));
    }
    let norm = (be.gamma / s_min).max(1.0);
    let condition = s_max / s_min;
    let eps_s = stage_eps(eps1, stages, condition);
    let poly = approximate_target_capped(1, norm, eps_s, opts.degree_cap)?;
    let phases = solve_phase_factors(&poly)?;
    let (amplitudes, prob) = run_stages(&be.adjoint(), &phases, initial.amplitudes, stages)?;
    if prob < opts.success_floor {
        return Err(QvarError::LowSuccess { prob, floor: opts.success_floor });
    }
    Ok(ValueState {
        state: StateVector::from_amplitudes(amplitudes, layout)?,
        success_probability: prob,
        stages,
        stage_degree: poly.degree,
        total_degree: poly.degree * stages,
        norm,
        condition,
        stage_eps: eps_s,
        phase_residual: phases.residual,
        polynomial: Some(poly),
        gamma: be.gamma,
    })
}

fn run_stages(
    be: &BlockEncoding,
    phases: &PhaseFactorSequence,
    mut x: Vec<Complex64>,
    stages: usize,
) -> Result<(Vec<Complex64>, f64)> {
    let circuit = apply_qsvt(be, phases)?;
    let mut prob = 1.0;
    for _ in 0..stages {
        let y = circuit.project(&x)?;
        let p: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        if !(p > 0.0) {
            return Err(QvarError::LowSuccess { prob: 0.0, floor: 0.0 });
        }
        prob *= p;
        let scale = 1.0 / p.sqrt();
        x = y.into_iter().map(|z| z * scale).collect();
    }
    Ok((x, prob))
}
