//! Fully implicit finite-difference pricing under CEV local volatility.

use crate::error::{QvarError, Result};
use crate::market::{payoff_vector, MarketParams, PayoffSpec, PriceGrid};
use nalgebra::DMatrix;

/// Pivot magnitudes below this abort the Thomas solve.
pub const PIVOT_GUARD: f64 = 1e-12;

/// Tridiagonal M with `sub[0]` and `sup[len-1]` unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub t: f64,
    pub values: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let len = self.len();
        DMatrix::from_fn(len, len, |i, j| {
            if i == j {
                self.diag[i]
            } else if j + 1 == i {
                self.sub[i]
            } else if i + 1 == j {
                self.sup[i]
            } else {
                0.0
            }
        })
    }

    /// The matrix I + M.
    pub fn plus_identity(&self) -> TridiagonalOperator {
        let mut out = self.clone();
        for d in out.diag.iter_mut() {
            *d += 1.0;
        }
        out
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let len = self.len();
        (0..len)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.sub[i] * v[i - 1];
                }
                if i + 1 < len {
                    acc += self.sup[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Solves (I + M) x = rhs by the Thomas algorithm.
    pub fn solve_shifted(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        thomas_solve(&self.plus_identity(), rhs)
    }
}

/// Thomas algorithm without pivoting.
pub fn thomas_solve(a: &TridiagonalOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    let len = a.len();
    if rhs.len() != len {
        return Err(QvarError::Dimension(format!("rhs {} vs matrix {}", rhs.len(), len)));
    }
    let mut c = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut pivot = a.diag[0];
    if pivot.abs() < PIVOT_GUARD || !pivot.is_finite() {
        return Err(QvarError::SingularPivot { row: 0, pivot });
    }
    c[0] = if len > 1 { a.sup[0] / pivot } else { 0.0 };
    d[0] = rhs[0] / pivot;
    for i in 1..len {
        pivot = a.diag[i] - a.sub[i] * c[i - 1];
        if pivot.abs() < PIVOT_GUARD || !pivot.is_finite() {
            return Err(QvarError::SingularPivot { row: i, pivot });
        }
        c[i] = if i + 1 < len { a.sup[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - a.sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..len - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Upwind coefficients (alpha_j, beta_j) of an interior node, with sigma^2 S^2 = alpha^2 S.
pub fn interior_coefficients(params: &MarketParams, grid: &PriceGrid, j: usize) -> (f64, f64) {
    let s = &grid.nodes;
    let var = params.alpha * params.alpha * s[j];
    let span = s[j + 1] - s[j - 1];
    let lo = s[j] - s[j - 1];
    let hi = s[j + 1] - s[j];
    let a = var / (lo * span) - params.r * s[j] / lo;
    let b = var / (hi * span);
    (a, b)
}

pub fn assemble_operator(params: &MarketParams, grid: &PriceGrid) -> Result<TridiagonalOperator> {
    let len = grid.len();
    if len < 2 {
        return Err(QvarError::InvalidParam("grid needs at least two nodes".into()));
    }
    let dt = params.dtau;
    let mut sub = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut sup = vec![0.0; len];
    diag[0] = params.r * dt;
    for j in 1..len - 1 {
        if grid.nodes[j] <= 0.0 {
            return Err(QvarError::InvalidParam(format!("interior node {j} has S <= 0")));
        }
        let (a, b) = interior_coefficients(params, grid, j);
        sub[j] = -dt * a;
        sup[j] = -dt * b;
        diag[j] = dt * (a + b) + params.r * dt;
    }
    let last = len - 1;
    let h = grid.nodes[last] - grid.nodes[last - 1];
    let c = dt * params.r * grid.nodes[last] / h;
    diag[last] = params.r * dt - c;
    sub[last] = c;
    let op = TridiagonalOperator { sub, diag, sup, n: grid.n };
    if op.diag.iter().chain(&op.sub).chain(&op.sup).any(|x| !x.is_finite()) {
        return Err(QvarError::Numerical("non-finite operator entry".into()));
    }
    Ok(op)
}

pub fn implicit_step(op: &TridiagonalOperator, v: &ValueSurface, dtau: f64) -> Result<ValueSurface> {
    Ok(ValueSurface { t: v.t - dtau, values: op.solve_shifted(&v.values)? })
}

pub fn price_european(params: &MarketParams, grid: &PriceGrid, spec: &PayoffSpec) -> Result<ValueSurface> {
    let op = assemble_operator(params, grid)?;
    let mut v = ValueSurface { t: params.t_exp, values: payoff_vector(spec, grid) };
    for _ in 0..params.backward_steps() {
        v = implicit_step(&op, &v, params.dtau)?;
    }
    v.t = params.t_bar;
    Ok(v)
}

pub fn price_american(params: &MarketParams, grid: &PriceGrid, spec: &PayoffSpec) -> Result<ValueSurface> {
    let op = assemble_operator(params, grid)?;
    let payoff = payoff_vector(spec, grid);
    let mut v = ValueSurface { t: params.t_exp, values: payoff.clone() };
    for _ in 0..params.backward_steps() {
        v = implicit_step(&op, &v, params.dtau)?;
        for (x, p) in v.values.iter_mut().zip(&payoff) {
            *x = x.max(*p);
        }
    }
    v.t = params.t_bar;
    Ok(v)
}

/// Linear interpolation of a surface at price `s`, clamped to the grid ends.
pub fn interpolate(grid: &PriceGrid, values: &[f64], s: f64) -> f64 {
    let nodes = &grid.nodes;
    if s <= nodes[0] {
        return values[0];
    }
    let last = nodes.len() - 1;
    if s >= nodes[last] {
        return values[last];
    }
    let i = nodes.partition_point(|&x| x <= s);
    let w = (s - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
    values[i - 1] * (1.0 - w) + values[i] * w
}
