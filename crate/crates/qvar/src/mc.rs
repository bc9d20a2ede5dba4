//! Deterministic logistic-increment scenario generator.

use crate::error::{QvarError, Result};
use crate::fixed::FixedPointCode;
use crate::market::MarketParams;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub l: usize,
    pub t: f64,
    pub code: FixedPointCode,
    /// Register codes, one per path (path k stored at index k-1).
    pub codes: Vec<u64>,
    pub prices: Vec<f64>,
}

pub fn logistic_increment(j: usize, l: usize) -> f64 {
    let x = j as f64 / l as f64;
    4.0 * x * (1.0 - x)
}

pub fn euler_forward(j: usize, l: usize, x: f64, params: &MarketParams) -> f64 {
    (1.0 + params.mu * params.dtau) * x + params.alpha * logistic_increment(j, l) * x.sqrt()
}

pub fn euler_inverse(j: usize, l: usize, y: f64, params: &MarketParams) -> Result<f64> {
    let a = 1.0 + params.mu * params.dtau;
    if a <= 0.0 {
        return Err(QvarError::InvalidParam(format!("1 + mu*dtau = {a} <= 0")));
    }
    let b = params.alpha * logistic_increment(j, l);
    let inner = (y + b * b / (4.0 * a)) / a;
    if inner < 0.0 {
        return Err(QvarError::InvalidParam(format!("y = {y} outside the image of F")));
    }
    let root = inner.sqrt() - b / (2.0 * a);
    Ok(root * root)
}

/// Evolves L paths for t_bar/dtau steps, quantizing after every step.
pub fn simulate_paths(params: &MarketParams, s0: f64, l: usize, code: FixedPointCode) -> Result<PathSet> {
    if l == 0 || !l.is_power_of_two() {
        return Err(QvarError::InvalidParam(format!("L = {l} is not a power of two")));
    }
    if !(s0 >= 0.0) {
        return Err(QvarError::InvalidParam(format!("s0 = {s0} < 0")));
    }
    let start = code.quantize(s0)?;
    let steps = params.forward_steps();
    let mut codes = vec![start; l];
    for (k, c) in codes.iter_mut().enumerate() {
        for _ in 0..steps {
            *c = code.quantize(euler_forward(k + 1, l, code.decode(*c), params))?;
        }
    }
    let prices = codes.iter().map(|&c| code.decode(c)).collect();
    Ok(PathSet { l, t: params.t_bar, code, codes, prices })
}
