//! Symmetric QSP phase factors by fixed-point iteration on Chebyshev coefficients.
//!
//! Convention: U(x) = e^{i phi_0 Z} prod_k W(x) e^{i phi_k Z} with
//! W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]]; the polynomial is Re U(x)_00.

use super::poly::{chebyshev_eval, PolynomialTarget};
use crate::error::{QvarError, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, PI};

pub const MAX_ITERS: usize = 10_000;
pub const RESIDUAL_TARGET: f64 = 1e-8;
const COEFF_TOL: f64 = 1e-13;
const CHECK_NODES: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct PhaseFactorSequence {
    /// d + 1 phases in the W(x) convention.
    pub phases: Vec<f64>,
    pub parity: usize,
    pub degree: usize,
    pub iterations: usize,
    /// Max deviation from the target over the check nodes.
    pub residual: f64,
}

type Mat2 = [[Complex64; 2]; 2];

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn z_rotation(phi: f64) -> Mat2 {
    let zero = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, phi), zero], [zero, Complex64::from_polar(1.0, -phi)]]
}

pub fn qsp_unitary(phases: &[f64], x: f64) -> Mat2 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let w = [[Complex64::new(x, 0.0), Complex64::new(0.0, s)], [Complex64::new(0.0, s), Complex64::new(x, 0.0)]];
    let mut u = z_rotation(phases[0]);
    for &phi in &phases[1..] {
        u = mul(&mul(&u, &w), &z_rotation(phi));
    }
    u
}

pub fn qsp_eval(phases: &[f64], x: f64) -> f64 {
    qsp_unitary(phases, x)[0][0].re
}

fn reduced_len(degree: usize) -> usize {
    degree / 2 + 1
}

fn full_phases(reduced: &[f64], degree: usize) -> Vec<f64> {
    let mut phi: Vec<f64> = if degree % 2 == 1 {
        reduced.iter().rev().chain(reduced.iter()).copied().collect()
    } else {
        reduced[1..].iter().rev().chain(reduced.iter()).copied().collect()
    };
    phi[0] += FRAC_PI_4;
    let last = phi.len() - 1;
    phi[last] += FRAC_PI_4;
    phi
}

/// Chebyshev coefficients (of the target parity) of the QSP polynomial.
fn coefficient_map(reduced: &[f64], degree: usize) -> Vec<f64> {
    let parity = degree % 2;
    let phases = full_phases(reduced, degree);
    let m = 2 * reduced.len();
    let thetas: Vec<f64> = (0..m).map(|j| PI * (j as f64 + 0.5) / m as f64).collect();
    let values: Vec<f64> = thetas.iter().map(|t| qsp_eval(&phases, t.cos())).collect();
    (0..reduced.len())
        .map(|k| {
            let deg = (2 * k + parity) as f64;
            let s: f64 = values.iter().zip(&thetas).map(|(v, t)| v * (deg * t).cos()).sum();
            let c = 2.0 * s / m as f64;
            if parity == 0 && k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

fn node_residual(phases: &[f64], coeffs: &[f64], parity: usize) -> f64 {
    (0..CHECK_NODES)
        .map(|j| (PI * (j as f64 + 0.5) / CHECK_NODES as f64).cos())
        .map(|x| (qsp_eval(phases, x) - chebyshev_eval(coeffs, parity, x)).abs())
        .fold(0.0, f64::max)
}

pub fn solve_phase_factors(p: &PolynomialTarget) -> Result<PhaseFactorSequence> {
    solve_from_coeffs(&p.coeffs, p.parity)
}

pub fn solve_from_coeffs(coeffs: &[f64], parity: usize) -> Result<PhaseFactorSequence> {
    let degree = 2 * (coeffs.len().max(1) - 1) + parity;
    let top = coeffs.len() - 1;
    if coeffs[..top].iter().all(|&c| c == 0.0) && coeffs[top] == 1.0 {
        let phases = vec![0.0; degree + 1];
        let residual = node_residual(&phases, coeffs, parity);
        return Ok(PhaseFactorSequence { phases, parity, degree, iterations: 0, residual });
    }
    let mut reduced = vec![0.0; reduced_len(degree)];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    while iterations < MAX_ITERS {
        let f = coefficient_map(&reduced, degree);
        err = f.iter().zip(coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err < COEFF_TOL || !err.is_finite() {
            break;
        }
        for (k, psi) in reduced.iter_mut().enumerate() {
            let slope = if parity == 0 && k == 0 { -1.0 } else { -2.0 };
            *psi -= (f[k] - coeffs[k]) / slope;
        }
        iterations += 1;
    }
    let phases = full_phases(&reduced, degree);
    let residual = node_residual(&phases, coeffs, parity);
    if !(residual <= RESIDUAL_TARGET) {
        return Err(QvarError::PhaseSolver { iters: iterations, residual: residual.max(err) });
    }
    Ok(PhaseFactorSequence { phases, parity, degree, iterations, residual })
}

impl PhaseFactorSequence {
    /// Phases for the reflection form e^{i phi (2 Pi - I)} with alternating U, U^dagger.
    ///
    /// The reflection-form product equals (-i)^d times the W-form product.
    pub fn reflection_phases(&self) -> Vec<f64> {
        let d = self.degree;
        let mut out = self.phases.clone();
        if d == 0 {
            return out;
        }
        for (k, phi) in out.iter_mut().enumerate() {
            if k == 0 || k == d {
                *phi -= FRAC_PI_4;
            } else {
                *phi -= 2.0 * FRAC_PI_4;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_polynomial() {
        let s = solve_from_coeffs(&[1.0], 1).unwrap();
        assert_eq!(s.phases, vec![0.0, 0.0]);
        for x in [-0.7, 0.0, 0.3, 1.0] {
            assert!((qsp_eval(&s.phases, x) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn second_chebyshev() {
        let s = solve_from_coeffs(&[0.0, 1.0], 0).unwrap();
        for j in 0..64 {
            let x = (PI * (j as f64 + 0.5) / 64.0).cos();
            assert!((qsp_eval(&s.phases, x) - (2.0 * x * x - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn generic_low_degree() {
        let c = [0.2, -0.3, 0.1];
        let s = solve_from_coeffs(&c, 1).unwrap();
        assert!(s.residual < 1e-10);
        let c = [0.1, 0.4, -0.2];
        let s = solve_from_coeffs(&c, 0).unwrap();
        assert!(s.residual < 1e-10);
        assert_eq!(s.phases.len(), 5);
    }

    #[test]
    fn phases_are_symmetric() {
        let s = solve_from_coeffs(&[0.3, 0.2, -0.1, 0.05], 1).unwrap();
        let n = s.phases.len();
        for k in 0..n {
            assert!((s.phases[k] - s.phases[n - 1 - k]).abs() < 1e-15);
        }
    }
}
