//! Alternating-phase QSVT circuit with a one-qubit real-part combination.
//!
//! Qubit order, most significant first: combination qubit, block-encoding
//! ancillas, system. Post-selecting every ancilla on zero yields P^(SV).

use super::phases::PhaseFactorSequence;
use crate::block_encoding::BlockEncoding;
use crate::error::{QvarError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct QsvtCircuit {
    u: DMatrix<f64>,
    n: usize,
    be_ancillas: usize,
    phases: Vec<f64>,
    degree: usize,
}

pub fn apply_qsvt(be: &BlockEncoding, phases: &PhaseFactorSequence) -> Result<QsvtCircuit> {
    if phases.phases.len() != phases.degree + 1 {
        return Err(QvarError::Dimension("phase count must be degree + 1".into()));
    }
    if be.u.nrows() != 1usize << (be.n + be.a) {
        return Err(QvarError::Dimension("block-encoding size does not match n + a".into()));
    }
    Ok(QsvtCircuit {
        u: be.u.clone(),
        n: be.n,
        be_ancillas: be.a,
        phases: phases.reflection_phases(),
        degree: phases.degree,
    })
}

fn matvec(u: &DMatrix<f64>, x: &[Complex64], transpose: bool) -> Vec<Complex64> {
    let dim = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    if transpose {
        for (i, o) in out.iter_mut().enumerate() {
            let col = u.column(i);
            *o = col.iter().zip(x).map(|(a, b)| b * *a).sum();
        }
    } else {
        for (j, xj) in x.iter().enumerate() {
            if *xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(u.column(j).iter()) {
                *o += xj * *a;
            }
        }
    }
    out
}

impl QsvtCircuit {
    /// Ancilla count of the full circuit (block-encoding ancillas plus one).
    pub fn ancillas(&self) -> usize {
        self.be_ancillas + 1
    }

    pub fn dim(&self) -> usize {
        1usize << (self.n + self.ancillas())
    }

    /// Block-encoding queries per application.
    pub fn oracle_calls(&self) -> usize {
        self.degree
    }

    fn projector_phase(&self, x: &mut [Complex64], phi: f64) {
        let sys = 1usize << self.n;
        let inside = Complex64::from_polar(1.0, phi);
        let outside = Complex64::from_polar(1.0, -phi);
        for (i, a) in x.iter_mut().enumerate() {
            *a *= if i < sys { inside } else { outside };
        }
    }

    /// Reflection-form U_Phi on the block-encoding register, phases scaled by `sign`.
    fn signal_unitary(&self, x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let d = self.degree;
        let mut v = x.to_vec();
        self.projector_phase(&mut v, sign * self.phases[d]);
        for k in (1..=d).rev() {
            v = matvec(&self.u, &v, (d - k) % 2 == 1);
            self.projector_phase(&mut v, sign * self.phases[k - 1]);
        }
        v
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let half = self.dim() / 2;
        if x.len() != 2 * half {
            return Err(QvarError::Dimension(format!("vector of length {} for circuit of dim {}", x.len(), 2 * half)));
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let w0: Vec<Complex64> = (0..half).map(|i| (x[i] + x[half + i]) * r).collect();
        let w1: Vec<Complex64> = (0..half).map(|i| (x[i] - x[half + i]) * r).collect();
        let phase = Complex64::new(0.0, 1.0).powu(self.degree as u32);
        let y0: Vec<Complex64> = self.signal_unitary(&w0, 1.0).into_iter().map(|z| z * phase).collect();
        let y1: Vec<Complex64> = self.signal_unitary(&w1, -1.0).into_iter().map(|z| z * phase.conj()).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * half];
        for i in 0..half {
            out[i] = (y0[i] + y1[i]) * r;
            out[half + i] = (y0[i] - y1[i]) * r;
        }
        Ok(out)
    }

    /// Applies the circuit to |0^a>|x> and returns the all-zero-ancilla component.
    pub fn project(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let sys = 1usize << self.n;
        if x.len() != sys {
            return Err(QvarError::Dimension(format!("system vector of length {}", x.len())));
        }
        let mut full = vec![Complex64::new(0.0, 0.0); self.dim()];
        full[..sys].copy_from_slice(x);
        Ok(self.apply(&full)?[..sys].to_vec())
    }

    /// Top-left 2^n block.
    pub fn block(&self) -> DMatrix<Complex64> {
        let sys = 1usize << self.n;
        let mut out = DMatrix::from_element(sys, sys, Complex64::new(0.0, 0.0));
        for j in 0..sys {
            let mut e = vec![Complex64::new(0.0, 0.0); sys];
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.project(&e).expect("dimension checked");
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for j in 0..dim {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[j] = Complex64::new(1.0, 0.0);
            for (i, v) in self.apply(&e).expect("dimension checked").into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Dense SVD oracle: sum_k P(s_k)|w_k><v_k| for odd P, sum_k P(s_k)|v_k><v_k| for even P.
pub fn svt_oracle<F: Fn(f64) -> f64>(a: &DMatrix<f64>, parity: usize, p: F) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let w = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let dim = a.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    for (k, s) in svd.singular_values.iter().enumerate() {
        let ps = p(*s);
        let left = if parity == 1 { w.column(k).into_owned() } else { vt.row(k).transpose() };
        out += left * vt.row(k) * ps;
    }
    out
}
