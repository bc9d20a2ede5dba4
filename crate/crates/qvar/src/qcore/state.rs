use super::density::DensityMatrix;
use super::layout::{Register, RegisterLayout};
use super::unitarity_error;
use crate::error::{QvarError, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rustfft::{FftDirection, FftPlanner};
use std::collections::BTreeMap;

const NORM_TOL: f64 = 1e-10;
const MAGIC: &[u8; 4] = b"QVSV";

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub layout: RegisterLayout,
}

impl StateVector {
    /// The all-zero basis state.
    pub fn zero(layout: RegisterLayout) -> Self {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes, layout }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>, layout: RegisterLayout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(QvarError::Dimension(format!(
                "{} amplitudes for {} qubits",
                amplitudes.len(),
                layout.total()
            )));
        }
        let s = Self { amplitudes, layout };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QvarError::InvalidParam(format!("state norm^2 = {norm}")));
        }
        Ok(s)
    }

    /// Builds a state from real amplitudes, normalizing them.
    pub fn from_real_normalized(values: &[f64], layout: RegisterLayout) -> Result<Self> {
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QvarError::InvalidParam("zero vector".into()));
        }
        let amps = values.iter().map(|&x| Complex64::new(x / norm, 0.0)).collect();
        Self::from_amplitudes(amps, layout)
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.total()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(QvarError::Dimension("inner product of states with different layouts".into()));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    fn registers(&self, names: &[&str]) -> Result<Vec<Register>> {
        let regs: Vec<Register> = names
            .iter()
            .map(|n| self.layout.get(n).cloned())
            .collect::<Result<_>>()?;
        for (i, a) in regs.iter().enumerate() {
            for b in &regs[i + 1..] {
                if a.name == b.name {
                    return Err(QvarError::InvalidParam(format!("register {} listed twice", a.name)));
                }
            }
        }
        Ok(regs)
    }

    /// Full-index bit masks for each qubit of the listed registers, most significant first.
    fn qubit_masks(&self, regs: &[Register]) -> Vec<usize> {
        let total = self.layout.total();
        regs.iter()
            .flat_map(|r| (0..r.width).map(move |b| 1usize << (total - r.offset - 1 - b)))
            .collect()
    }

    /// Applies `u` to the concatenation of `names` (first name most significant).
    pub fn apply_unitary(&mut self, names: &[&str], u: &DMatrix<Complex64>) -> Result<()> {
        let regs = self.registers(names)?;
        let masks = self.qubit_masks(&regs);
        let sub_dim = 1usize << masks.len();
        if u.nrows() != sub_dim || u.ncols() != sub_dim {
            return Err(QvarError::Dimension(format!("unitary {}x{} on {} qubits", u.nrows(), u.ncols(), masks.len())));
        }
        let err = unitarity_error(u);
        if err > NORM_TOL {
            return Err(QvarError::NotUnitary(err));
        }
        let offsets = sub_offsets(&masks);
        let all: usize = masks.iter().sum();
        let mut buf = DVector::from_element(sub_dim, Complex64::new(0.0, 0.0));
        for base in 0..self.amplitudes.len() {
            if base & all != 0 {
                continue;
            }
            for (s, off) in offsets.iter().enumerate() {
                buf[s] = self.amplitudes[base | off];
            }
            let out = u * &buf;
            for (s, off) in offsets.iter().enumerate() {
                self.amplitudes[base | off] = out[s];
            }
        }
        Ok(())
    }

    /// Applies a basis permutation; `f` must be a bijection on indices.
    pub fn apply_permutation<F: Fn(usize) -> usize>(&mut self, f: F) -> Result<()> {
        let dim = self.amplitudes.len();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        let mut hit = vec![false; dim];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let j = f(i);
            if j >= dim || hit[j] {
                return Err(QvarError::NotUnitary(1.0));
            }
            hit[j] = true;
            out[j] = *a;
        }
        self.amplitudes = out;
        Ok(())
    }

    fn fft_register(&mut self, name: &str, direction: FftDirection) -> Result<()> {
        let reg = self.layout.get(name)?.clone();
        let masks = self.qubit_masks(std::slice::from_ref(&reg));
        let offsets = sub_offsets(&masks);
        let all: usize = masks.iter().sum();
        let n = offsets.len();
        let fft = FftPlanner::new().plan_fft(n, direction);
        let scale = 1.0 / (n as f64).sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for base in 0..self.amplitudes.len() {
            if base & all != 0 {
                continue;
            }
            for (s, off) in offsets.iter().enumerate() {
                buf[s] = self.amplitudes[base | off];
            }
            fft.process(&mut buf);
            for (s, off) in offsets.iter().enumerate() {
                self.amplitudes[base | off] = buf[s] * scale;
            }
        }
        Ok(())
    }

    /// |j> -> sum_k e^{2 pi i jk/N} |k> / sqrt(N) on one register.
    pub fn qft(&mut self, name: &str) -> Result<()> {
        self.fft_register(name, FftDirection::Inverse)
    }

    pub fn inverse_qft(&mut self, name: &str) -> Result<()> {
        self.fft_register(name, FftDirection::Forward)
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let regs = self.registers(keep)?;
        let masks = self.qubit_masks(&regs);
        let offsets = sub_offsets(&masks);
        let all: usize = masks.iter().sum();
        let k = offsets.len();
        let mut rho = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
        for base in 0..self.amplitudes.len() {
            if base & all != 0 {
                continue;
            }
            for (a, oa) in offsets.iter().enumerate() {
                let x = self.amplitudes[base | oa];
                if x == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (b, ob) in offsets.iter().enumerate() {
                    rho[(a, b)] += x * self.amplitudes[base | ob].conj();
                }
            }
        }
        Ok(DensityMatrix { entries: rho })
    }

    /// Marginal probabilities of a register's values.
    pub fn exact_distribution(&self, name: &str) -> Result<Vec<f64>> {
        let reg = self.layout.get(name)?.clone();
        let mut p = vec![0.0; 1usize << reg.width];
        for (i, a) in self.amplitudes.iter().enumerate() {
            p[self.layout.read(i, &reg)] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Seeded i.i.d. sampling of a register; returns outcome counts.
    pub fn measure_register(&self, name: &str, shots: usize, seed: u64) -> Result<BTreeMap<usize, usize>> {
        if shots == 0 {
            return Err(QvarError::InvalidParam("shots must be >= 1".into()));
        }
        let p = self.exact_distribution(name)?;
        let dist = WeightedIndex::new(&p).map_err(|e| QvarError::Numerical(e.to_string()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            *counts.entry(dist.sample(&mut rng)).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Flat little-endian encoding: magic, q, register table, interleaved re/im.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.amplitudes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.layout.total() as u32).to_le_bytes());
        out.extend_from_slice(&(self.layout.registers().len() as u32).to_le_bytes());
        for r in self.layout.registers() {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.width as u32).to_le_bytes());
        }
        for a in &self.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || QvarError::InvalidParam("malformed state encoding".into());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(bad)?;
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad());
        }
        let read_u32 = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize;
        let q = read_u32(take(4)?);
        let nregs = read_u32(take(4)?);
        let mut names = Vec::with_capacity(nregs);
        for _ in 0..nregs {
            let len = read_u32(take(4)?);
            let name = String::from_utf8(take(len)?.to_vec()).map_err(|_| bad())?;
            let width = read_u32(take(4)?);
            names.push((name, width));
        }
        let spec: Vec<(&str, usize)> = names.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        let layout = RegisterLayout::with_cap(&spec, usize::MAX)?;
        if layout.total() != q {
            return Err(bad());
        }
        let mut amps = Vec::with_capacity(layout.dim());
        for _ in 0..layout.dim() {
            let re = f64::from_le_bytes(take(8)?.try_into().map_err(|_| bad())?);
            let im = f64::from_le_bytes(take(8)?.try_into().map_err(|_| bad())?);
            amps.push(Complex64::new(re, im));
        }
        Ok(Self { amplitudes: amps, layout })
    }
}

fn sub_offsets(masks: &[usize]) -> Vec<usize> {
    let k = masks.len();
    (0..1usize << k)
        .map(|s| {
            masks
                .iter()
                .enumerate()
                .filter(|(b, _)| s >> (k - 1 - b) & 1 == 1)
                .map(|(_, m)| m)
                .sum()
        })
        .collect()
}

/// Dense QFT matrix of width `bits`.
pub fn qft_matrix(bits: usize) -> DMatrix<Complex64> {
    let n = 1usize << bits;
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |k, j| {
        let angle = 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
        Complex64::from_polar(scale, angle)
    })
}

/// Prepares v/|v| with the binary-tree rotation scheme.
pub fn grover_rudolph_prepare(v: &[f64]) -> Result<StateVector> {
    let len = v.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(QvarError::InvalidParam(format!("length {len} is not 2^n")));
    }
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(QvarError::InvalidParam("entries must be finite and non-negative".into()));
    }
    let n = len.trailing_zeros() as usize;
    let mass: Vec<f64> = v.iter().map(|x| x * x).collect();
    if mass.iter().sum::<f64>() == 0.0 {
        return Err(QvarError::InvalidParam("zero vector".into()));
    }
    let mut amps = vec![1.0f64];
    for level in 0..n {
        let block = len >> level;
        let half = block / 2;
        let mut next = Vec::with_capacity(amps.len() * 2);
        for (node, &a) in amps.iter().enumerate() {
            let lo = node * block;
            let left: f64 = mass[lo..lo + half].iter().sum();
            let right: f64 = mass[lo + half..lo + block].iter().sum();
            let theta = if left + right == 0.0 { 0.0 } else { right.sqrt().atan2(left.sqrt()) };
            next.push(a * theta.cos());
            next.push(a * theta.sin());
        }
        amps = next;
    }
    let layout = RegisterLayout::new(&[("data", n)])?;
    StateVector::from_amplitudes(amps.into_iter().map(|x| Complex64::new(x, 0.0)).collect(), layout)
}
