//! Bounded parity-definite Chebyshev approximations of the QSVT target.

use crate::error::{QvarError, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Constant of the degree budget d <= C * T * norm * ln(1/eps).
pub const DEGREE_C: f64 = 8.0;
pub const DEFAULT_DEGREE_CAP: usize = 512;
/// Bound imposed on |P| at the constraint nodes.
pub const POLY_BOUND: f64 = 0.9;
const RIDGE: f64 = 1e-12;
const MAX_ACTIVE_SET_ITERS: usize = 400;
const WINDOW_SAMPLES: usize = 10_000;
const BOUND_SAMPLES: usize = 20_001;

#[derive(Debug, Clone, Serialize)]
pub struct PolynomialTarget {
    pub t_tilde: usize,
    pub norm: f64,
    pub eps: f64,
    /// 0 for even, 1 for odd.
    pub parity: usize,
    /// Coefficient of T_{2k+parity} at position k.
    pub coeffs: Vec<f64>,
    pub degree: usize,
    /// Measured sup error on the window.
    pub sup_error: f64,
    /// Measured max |P| on [-1, 1].
    pub max_abs: f64,
}

/// g(x) = (x / norm)^(-T) / 2.
pub fn target_g(x: f64, t_tilde: usize, norm: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(QvarError::InvalidParam(format!("target_g needs x > 0, got {x}")));
    }
    Ok(0.5 * (x / norm).powi(-(t_tilde as i32)))
}

/// The bounded rescaling g(x) * norm^(-2T) = (x * norm)^(-T) / 2, at most 1/2 on the window.
pub fn target_f(x: f64, t_tilde: usize, norm: f64) -> f64 {
    0.5 * (x * norm).powi(-(t_tilde as i32))
}

pub fn degree_budget(t_tilde: usize, norm: f64, eps: f64) -> usize {
    (DEGREE_C * t_tilde.max(1) as f64 * norm * (1.0 / eps).ln()).ceil() as usize
}

/// Evaluates sum_k c_k T_{2k+p}(x).
pub fn chebyshev_eval(coeffs: &[f64], parity: usize, x: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let top = 2 * (coeffs.len() - 1) + parity;
    let (mut t_prev, mut t_cur) = (1.0, x);
    let mut acc = 0.0;
    for deg in 0..=top {
        let t = match deg {
            0 => 1.0,
            1 => x,
            _ => {
                let next = 2.0 * x * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
                next
            }
        };
        if deg % 2 == parity {
            acc += coeffs[(deg - parity) / 2] * t;
        }
    }
    acc
}

fn basis(xs: &[f64], degree: usize, parity: usize) -> DMatrix<f64> {
    let cols = (degree - parity) / 2 + 1;
    DMatrix::from_fn(xs.len(), cols, |i, k| ((2 * k + parity) as f64 * xs[i].clamp(-1.0, 1.0).acos()).cos())
}

fn chebyshev_points(count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| (std::f64::consts::PI * (i as f64 + 0.5) / count as f64).cos())
}

/// Least squares on the window subject to |P| <= POLY_BOUND on [0, 1] nodes (primal active set).
fn constrained_fit(t_tilde: usize, norm: f64, degree: usize, parity: usize) -> Vec<f64> {
    let a = 1.0 / norm;
    let nw = 4 * degree + 8;
    let xw: Vec<f64> = chebyshev_points(nw).map(|c| a + (1.0 - a) * (1.0 - c) / 2.0).collect();
    let xo: Vec<f64> = chebyshev_points(16 * degree + 32).filter(|&x| x >= 0.0).collect();
    let aw = basis(&xw, degree, parity);
    let ao = basis(&xo, degree, parity);
    let f = DVector::from_iterator(nw, xw.iter().map(|&x| target_f(x, t_tilde, norm)));
    let w = 1.0 / nw as f64;
    let cols = aw.ncols();
    let h = aw.transpose() * &aw * w + DMatrix::identity(cols, cols) * RIDGE;
    let g = aw.transpose() * &f * w;
    let unconstrained = h.clone().cholesky().map(|c| c.solve(&g)).unwrap_or_else(|| g.clone());

    let mut active: Vec<(usize, f64)> = Vec::new();
    let mut c = unconstrained.clone();
    for _ in 0..MAX_ACTIVE_SET_ITERS {
        if active.is_empty() {
            c = unconstrained.clone();
        } else {
            let k = active.len();
            let mut kkt = DMatrix::zeros(cols + k, cols + k);
            kkt.view_mut((0, 0), (cols, cols)).copy_from(&h);
            let mut rhs = DVector::zeros(cols + k);
            rhs.rows_mut(0, cols).copy_from(&g);
            for (r, (i, s)) in active.iter().enumerate() {
                for col in 0..cols {
                    let v = s * ao[(*i, col)];
                    kkt[(cols + r, col)] = v;
                    kkt[(col, cols + r)] = v;
                }
                rhs[cols + r] = POLY_BOUND;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { break };
            let (worst, mu) = (0..k).map(|r| (r, sol[cols + r])).fold((0, f64::INFINITY), |acc, x| {
                if x.1 < acc.1 {
                    x
                } else {
                    acc
                }
            });
            c = sol.rows(0, cols).into_owned();
            if mu < -1e-14 {
                active.remove(worst);
                continue;
            }
        }
        let vals = &ao * &c;
        let (idx, viol) = vals
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs() - POLY_BOUND))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if viol <= 1e-12 {
            break;
        }
        active.push((idx, vals[idx].signum()));
    }
    c.iter().copied().collect()
}

fn measure(coeffs: &[f64], parity: usize, t_tilde: usize, norm: f64) -> (f64, f64) {
    let a = 1.0 / norm;
    let sup_error = (0..WINDOW_SAMPLES)
        .map(|i| a + (1.0 - a) * i as f64 / (WINDOW_SAMPLES - 1) as f64)
        .map(|x| (chebyshev_eval(coeffs, parity, x) - target_f(x, t_tilde, norm)).abs())
        .fold(0.0, f64::max);
    let max_abs = (0..BOUND_SAMPLES)
        .map(|i| i as f64 / (BOUND_SAMPLES - 1) as f64)
        .map(|x| chebyshev_eval(coeffs, parity, x).abs())
        .fold(0.0, f64::max);
    (sup_error, max_abs)
}

pub fn approximate_target(t_tilde: usize, norm: f64, eps: f64) -> Result<PolynomialTarget> {
    approximate_target_capped(t_tilde, norm, eps, DEFAULT_DEGREE_CAP)
}

/// Lowest degree of the natural parity whose fit meets `eps` on [1/norm, 1] with |P| <= 1.
pub fn approximate_target_capped(t_tilde: usize, norm: f64, eps: f64, cap: usize) -> Result<PolynomialTarget> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(QvarError::InvalidParam(format!("eps = {eps} outside (0, 1/2]")));
    }
    if !(norm >= 1.0) || !norm.is_finite() {
        return Err(QvarError::InvalidParam(format!("norm = {norm} < 1")));
    }
    let parity = t_tilde % 2;
    if t_tilde == 0 {
        return Ok(PolynomialTarget {
            t_tilde,
            norm,
            eps,
            parity,
            coeffs: vec![0.5],
            degree: 0,
            sup_error: 0.0,
            max_abs: 0.5,
        });
    }
    let mut best = f64::INFINITY;
    let mut degree = parity.max(1);
    if degree % 2 != parity {
        degree += 1;
    }
    while degree <= cap {
        let coeffs = constrained_fit(t_tilde, norm, degree, parity);
        let (sup_error, max_abs) = measure(&coeffs, parity, t_tilde, norm);
        best = best.min(sup_error);
        if sup_error <= eps && max_abs <= 1.0 {
            return Ok(PolynomialTarget { t_tilde, norm, eps, parity, coeffs, degree, sup_error, max_abs });
        }
        degree += 2;
    }
    Err(QvarError::DegreeCap { cap, best_err: best })
}

impl PolynomialTarget {
    pub fn eval(&self, x: f64) -> f64 {
        chebyshev_eval(&self.coeffs, self.parity, x)
    }

    /// Wraps explicit Chebyshev coefficients of one parity.
    pub fn from_coeffs(coeffs: Vec<f64>, parity: usize) -> Self {
        let degree = 2 * (coeffs.len().max(1) - 1) + parity;
        let max_abs = (0..BOUND_SAMPLES)
            .map(|i| i as f64 / (BOUND_SAMPLES - 1) as f64)
            .map(|x| chebyshev_eval(&coeffs, parity, x).abs())
            .fold(0.0, f64::max);
        Self { t_tilde: 0, norm: 1.0, eps: 0.5, parity, coeffs, degree, sup_error: 0.0, max_abs }
    }

    pub fn budget(&self) -> usize {
        degree_budget(self.t_tilde, self.norm, self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_examples() {
        assert_eq!(target_g(2.0, 5, 2.0).unwrap(), 0.5);
        assert_eq!(target_g(0.3, 0, 2.0).unwrap(), 0.5);
        assert_eq!(target_g(1.0, 1, 2.0).unwrap(), 1.0);
        assert!(target_g(0.0, 1, 2.0).is_err());
    }

    #[test]
    fn clenshaw_free_eval_matches_cosines() {
        let c = [0.3, -0.2, 0.05];
        for x in [-0.9f64, -0.1, 0.4, 1.0] {
            let t = x.acos();
            let direct = 0.3 * t.cos() - 0.2 * (3.0 * t).cos() + 0.05 * (5.0 * t).cos();
            assert!((chebyshev_eval(&c, 1, x) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_exponent_is_constant_half() {
        let p = approximate_target(0, 3.0, 1e-3).unwrap();
        assert_eq!(p.degree, 0);
        assert_eq!(p.eval(0.7), 0.5);
    }

    #[test]
    fn single_step_window_error() {
        let p = approximate_target(1, 2.0, 1e-3).unwrap();
        assert_eq!(p.parity, 1);
        for i in 0..10_000 {
            let x = 0.5 + 0.5 * i as f64 / 9_999.0;
            assert!((p.eval(x) - target_f(x, 1, 2.0)).abs() <= 1e-3);
        }
        assert!(p.max_abs <= 1.0);
        assert!(p.degree <= p.budget());
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(approximate_target(1, 2.0, 0.0).is_err());
        assert!(approximate_target(1, 0.5, 1e-3).is_err());
        assert!(matches!(approximate_target_capped(8, 4.0, 1e-8, 9), Err(QvarError::DegreeCap { .. })));
    }
}
