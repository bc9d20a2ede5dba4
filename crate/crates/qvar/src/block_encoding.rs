//! Block-encoding of a tridiagonal matrix by the sparse-access construction
//! U = (I (x) H^2 (x) I)(I (x) U_c) U_R (I (x) H^2 (x) I).
//!
//! Qubit order, most significant first: rotation qubit, two branch qubits, system.

use crate::error::{QvarError, Result};
use crate::pde::TridiagonalOperator;
use crate::qcore::real_unitarity_error;
use nalgebra::DMatrix;

/// Padded branch count (power of two for the Hadamard pair).
pub const BRANCHES: usize = 4;
/// Rotation qubit plus two branch qubits.
pub const ANCILLAS: usize = 3;
/// Certification threshold at construction.
pub const CERT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BlockEncoding {
    pub u: DMatrix<f64>,
    pub gamma: f64,
    pub a: usize,
    pub eps: f64,
    pub n: usize,
    pub kappa: f64,
}

/// Row index of the l-th nonzero of column j, clamped at the boundary.
///
/// Branch 3 is the padding branch and points back at j.
pub fn column_index(j: usize, l: usize, dim: usize) -> usize {
    if l >= 3 {
        return j;
    }
    (j + l).saturating_sub(1).min(dim - 1)
}

/// Target row used by U_c: cyclic for the three live branches so U_c is a permutation.
fn branch_target(j: usize, l: usize, dim: usize) -> usize {
    if l >= 3 {
        j
    } else {
        (j + dim + l - 1) % dim
    }
}

/// Entry carried by branch l of column j (zero for wrapped and padding branches).
fn branch_entry(m: &TridiagonalOperator, j: usize, l: usize) -> f64 {
    let dim = m.len();
    match l {
        0 if j > 0 => m.sup[j - 1],
        1 => m.diag[j],
        2 if j + 1 < dim => m.sub[j + 1],
        _ => 0.0,
    }
}

pub fn max_abs_entry(m: &TridiagonalOperator) -> f64 {
    let dim = m.len();
    (0..dim)
        .flat_map(|j| (0..3).map(move |l| (j, l)))
        .map(|(j, l)| branch_entry(m, j, l).abs())
        .fold(0.0, f64::max)
}

fn hadamard_pair(n: usize) -> DMatrix<f64> {
    let dim = 1usize << (n + ANCILLAS);
    let sys = 1usize << n;
    DMatrix::from_fn(dim, dim, |row, col| {
        let (r_rot, r_br, r_sys) = (row >> (n + 2), (row >> n) & 3, row % sys);
        let (c_rot, c_br, c_sys) = (col >> (n + 2), (col >> n) & 3, col % sys);
        if r_rot != c_rot || r_sys != c_sys {
            return 0.0;
        }
        let sign = if (r_br & c_br).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        0.5 * sign
    })
}

fn build_unitary(m: &TridiagonalOperator, kappa: f64, perturb: Option<(usize, usize, f64)>) -> DMatrix<f64> {
    let n = m.n;
    let sys = 1usize << n;
    let dim = 1usize << (n + ANCILLAS);
    let idx = |rot: usize, l: usize, j: usize| (rot << (n + 2)) | (l << n) | j;

    let mut ur = DMatrix::<f64>::zeros(dim, dim);
    for l in 0..BRANCHES {
        for j in 0..sys {
            let a = (branch_entry(m, j, l) / kappa).clamp(-1.0, 1.0);
            let mut theta = a.acos();
            if let Some((pl, pj, delta)) = perturb {
                if pl == l && pj == j {
                    theta += delta;
                }
            }
            let (c, s) = (theta.cos(), theta.sin());
            ur[(idx(0, l, j), idx(0, l, j))] = c;
            ur[(idx(1, l, j), idx(0, l, j))] = s;
            ur[(idx(0, l, j), idx(1, l, j))] = -s;
            ur[(idx(1, l, j), idx(1, l, j))] = c;
        }
    }
    let mut uc = DMatrix::<f64>::zeros(dim, dim);
    for rot in 0..2 {
        for l in 0..BRANCHES {
            for j in 0..sys {
                uc[(idx(rot, l, branch_target(j, l, sys)), idx(rot, l, j))] = 1.0;
            }
        }
    }
    let h = hadamard_pair(n);
    &h * uc * ur * &h
}

/// Top-left 2^n block of a unitary with ancillas in the most significant qubits.
pub fn top_left_block(u: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let sys = 1usize << n;
    u.view((0, 0), (sys, sys)).into_owned()
}

/// Spectral norm of a dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn assemble_block_encoding(m: &TridiagonalOperator) -> Result<BlockEncoding> {
    let kappa = max_abs_entry(m);
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(QvarError::InvalidParam("matrix has no nonzero finite entries".into()));
    }
    let u = build_unitary(m, kappa, None);
    let mut be = BlockEncoding { u, gamma: BRANCHES as f64 * kappa, a: ANCILLAS, eps: 0.0, n: m.n, kappa };
    let unit = real_unitarity_error(&be.u);
    if unit > CERT_TOL {
        return Err(QvarError::NotUnitary(unit));
    }
    be.eps = verify_block_encoding(&be, m);
    if be.eps > CERT_TOL {
        return Err(QvarError::Certification(be.eps));
    }
    Ok(be)
}

/// ||M - gamma * block(U)||_2.
pub fn verify_block_encoding(be: &BlockEncoding, m: &TridiagonalOperator) -> f64 {
    let block = top_left_block(&be.u, be.n);
    spectral_norm(&(m.to_dense() - block * be.gamma))
}

impl BlockEncoding {
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn block(&self) -> DMatrix<f64> {
        top_left_block(&self.u, self.n)
    }

    /// U^T encodes the transpose with the same (gamma, a, eps).
    pub fn adjoint(&self) -> BlockEncoding {
        BlockEncoding { u: self.u.transpose(), ..self.clone() }
    }

    /// Same construction with one branch rotation angle shifted by `delta`.
    pub fn perturbed(m: &TridiagonalOperator, l: usize, j: usize, delta: f64) -> BlockEncoding {
        let kappa = max_abs_entry(m);
        let u = build_unitary(m, kappa, Some((l, j, delta)));
        let mut be = BlockEncoding { u, gamma: BRANCHES as f64 * kappa, a: ANCILLAS, eps: 0.0, n: m.n, kappa };
        be.eps = verify_block_encoding(&be, m);
        be
    }
}
