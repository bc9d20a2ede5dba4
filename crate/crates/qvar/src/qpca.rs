//! Density-matrix exponentiation and phase estimation for the price-to-value lookup.
//!
//! rho is diagonal in the price-code basis, so each populated price code is an
//! eigenstate and QPE acts branch by branch. QPE unit time is pi: eigenvalue
//! lambda in [0, 1] appears as phase -lambda/2 and decodes from a p-bit code c as
//! ((2^p - c) mod 2^p) / 2^(p-1).

use crate::error::{QvarError, Result};
use crate::fixed::FixedPointCode;
use crate::market::PriceGrid;
use crate::mc::PathSet;
use crate::qcore::{DensityMatrix, RegisterLayout, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// QPE unit evolution time.
pub const UNIT_TIME: f64 = PI;
/// Largest phase register supported by the trotterized branch simulation.
pub const MAX_TROTTER_PHASE_BITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMode {
    ExactExponential,
    Trotterized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaJob {
    /// Value-register bits.
    pub m: usize,
    /// Phase-register bits.
    pub phase_bits: usize,
    /// Swap slices per unit time.
    pub n_trotter: usize,
    pub mode: PcaMode,
}

impl PcaJob {
    /// Default phase register of 2m + 2 bits: the square root halves precision.
    pub fn new(m: usize, mode: PcaMode) -> Self {
        Self { m, phase_bits: 2 * m + 2, n_trotter: 32, mode }
    }

    pub fn n_qpe(&self) -> usize {
        1usize << self.phase_bits
    }

    pub fn delta_t(&self) -> f64 {
        UNIT_TIME / self.n_trotter as f64
    }

    /// Longest controlled evolution, (2^p - 1) unit times.
    pub fn tau(&self) -> f64 {
        (self.n_qpe() - 1) as f64 * UNIT_TIME
    }

    /// Slices (and rho copies) per QPE branch in trotterized mode.
    pub fn slices(&self) -> usize {
        (self.n_qpe() - 1) * self.n_trotter
    }

    pub fn trotter_budget(&self) -> f64 {
        self.slices() as f64 * self.delta_t().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.phase_bits < 2 {
            return Err(QvarError::InvalidParam("PCA job needs m >= 1 and at least 2 phase bits".into()));
        }
        if self.n_trotter == 0 {
            return Err(QvarError::InvalidParam("n_trotter must be >= 1".into()));
        }
        if self.mode == PcaMode::Trotterized && self.phase_bits > MAX_TROTTER_PHASE_BITS {
            return Err(QvarError::InvalidParam(format!(
                "trotterized QPE supports at most {MAX_TROTTER_PHASE_BITS} phase bits"
            )));
        }
        Ok(())
    }
}

/// Fixed-point codes of the grid nodes; all must be distinct.
pub fn grid_codes(grid: &PriceGrid, code: &FixedPointCode) -> Result<Vec<u64>> {
    let codes: Vec<u64> = grid.nodes.iter().map(|&s| code.quantize(s)).collect::<Result<_>>()?;
    for j in 1..codes.len() {
        if codes[j] == codes[j - 1] {
            return Err(QvarError::DuplicateCodes(j - 1, j));
        }
    }
    Ok(codes)
}

/// |j>|y> -> |j>|y xor code(S_j)> on registers "index" and "price"; self-inverse.
pub fn load_grid_register(state: &StateVector, grid: &PriceGrid, code: &FixedPointCode) -> Result<StateVector> {
    let codes = grid_codes(grid, code)?;
    let layout = state.layout.clone();
    let index = layout.get("index")?.clone();
    let price = layout.get("price")?.clone();
    if index.width != grid.n || price.width != code.width() {
        return Err(QvarError::Dimension("index/price register widths do not match grid/code".into()));
    }
    let mut out = state.clone();
    out.apply_permutation(|i| {
        let j = layout.read(i, &index);
        let y = layout.read(i, &price);
        layout.write(i, &price, y ^ codes[j] as usize)
    })?;
    Ok(out)
}

/// Reduced density matrix on the price register after loading grid codes.
pub fn reduced_rho(value_state: &StateVector, grid: &PriceGrid, code: &FixedPointCode) -> Result<DensityMatrix> {
    let n = grid.n;
    if value_state.amplitudes.len() != grid.len() {
        return Err(QvarError::Dimension("value state does not match grid".into()));
    }
    let layout = RegisterLayout::new(&[("index", n), ("price", code.width())])?;
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
    let shift = code.width();
    for (j, a) in value_state.amplitudes.iter().enumerate() {
        amps[j << shift] = *a;
    }
    let loaded = load_grid_register(&StateVector::from_amplitudes(amps, layout)?, grid, code)?;
    loaded.partial_trace(&["price"])
}

/// exp(-i rho t) sigma exp(i rho t) through the eigendecomposition of rho.
pub fn exact_evolution(sigma: &DMatrix<Complex64>, rho: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = rho.clone().symmetric_eigen();
    let phases = DMatrix::from_fn(rho.nrows(), rho.nrows(), |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -eig.eigenvalues[i] * t)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    &u * sigma * u.adjoint()
}

/// One partial-swap slice: cos^2 sigma - i sin cos [rho, sigma] + sin^2 Tr(sigma) rho.
pub fn trotter_slice(sigma: &DMatrix<Complex64>, rho: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let (s, c) = dt.sin_cos();
    let comm = rho * sigma - sigma * rho;
    sigma * Complex64::new(c * c, 0.0) - comm * Complex64::new(0.0, s * c) + rho * (sigma.trace() * s * s)
}

/// Dense swap-interaction slice: Tr_copy[e^{-iS dt}(sigma (x) rho)e^{iS dt}].
pub fn swap_slice_dense(sigma: &DMatrix<Complex64>, rho: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let d = sigma.nrows();
    let joint = sigma.kronecker(rho);
    let swap = DMatrix::from_fn(d * d, d * d, |r, c| {
        let (a, b) = (c / d, c % d);
        if r == b * d + a {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let (s, c) = dt.sin_cos();
    let u = DMatrix::identity(d * d, d * d) * Complex64::new(c, 0.0) - swap * Complex64::new(0.0, s);
    let evolved = &u * joint * u.adjoint();
    DMatrix::from_fn(d, d, |i, j| (0..d).map(|k| evolved[(i * d + k, j * d + k)]).sum())
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub sigma: DensityMatrix,
    pub slices: usize,
}

pub fn evolve_exp_rho(sigma: &DensityMatrix, rho: &DensityMatrix, tau: f64, job: &PcaJob) -> Result<Evolution> {
    if sigma.dim() != rho.dim() {
        return Err(QvarError::Dimension("sigma and rho sizes differ".into()));
    }
    match job.mode {
        PcaMode::ExactExponential => Ok(Evolution {
            sigma: DensityMatrix { entries: exact_evolution(&sigma.entries, &rho.entries, tau) },
            slices: 0,
        }),
        PcaMode::Trotterized => {
            let n = job.n_trotter;
            let dt = tau / n as f64;
            let mut x = sigma.entries.clone();
            for _ in 0..n {
                x = trotter_slice(&x, &rho.entries, dt);
            }
            Ok(Evolution { sigma: DensityMatrix { entries: x }, slices: n })
        }
    }
}

pub fn decode_phase(c: usize, phase_bits: usize) -> f64 {
    let n = 1usize << phase_bits;
    ((n - c) % n) as f64 / (1usize << (phase_bits - 1)) as f64
}

/// Value-register code of sqrt(lambda): round(sqrt(lambda) 2^m), saturating at 2^m - 1.
pub fn sqrt_code(lambda: f64, m: usize) -> u64 {
    FixedPointCode { frac_bits: m, int_bits: 0 }.quantize_saturating(lambda.max(0.0).sqrt())
}

/// Outcome distribution of exact QPE for eigenvalue `lambda`.
pub fn qpe_distribution_exact(lambda: f64, phase_bits: usize) -> Result<Vec<f64>> {
    let layout = RegisterLayout::with_cap(&[("phase", phase_bits)], usize::MAX)?;
    let n = layout.dim();
    let amp = 1.0 / (n as f64).sqrt();
    let amps = (0..n).map(|l| Complex64::from_polar(amp, -lambda * UNIT_TIME * l as f64)).collect();
    let mut s = StateVector::from_amplitudes(amps, layout)?;
    s.inverse_qft("phase")?;
    s.exact_distribution("phase")
}

fn matrix_power(a: &DMatrix<f64>, mut e: usize) -> DMatrix<f64> {
    let mut base = a.clone();
    let mut acc = DMatrix::identity(a.nrows(), a.ncols());
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

/// Outcome distribution of QPE with swap-slice controlled evolutions.
///
/// `spectrum` lists rho's nonzero diagonal entries with `branch` indexing the
/// eigenstate being estimated; every coherence stays diagonal on that support.
pub fn qpe_distribution_trotter(spectrum: &[f64], branch: usize, job: &PcaJob) -> Result<Vec<f64>> {
    job.validate()?;
    let k = spectrum.len();
    let p = job.phase_bits;
    let n = 1usize << p;
    let dt = job.delta_t();
    let (s, c) = dt.sin_cos();
    let both = DMatrix::from_fn(k, k, |i, j| (if i == j { c * c } else { 0.0 }) + s * s * spectrum[i]);
    let ket: Vec<Complex64> = spectrum.iter().map(|&l| Complex64::new(c, -s * l)).collect();
    let bra: Vec<Complex64> = spectrum.iter().map(|&l| Complex64::new(c, s * l)).collect();

    let mut coh = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut start = vec![Complex64::new(0.0, 0.0); k];
    start[branch] = Complex64::new(1.0, 0.0);
    let mut stack = vec![(0usize, 0usize, 0usize, start)];
    while let Some((bit, l, lp, d)) = stack.pop() {
        if bit == p {
            coh[(l, lp)] = d.iter().sum::<Complex64>() / n as f64;
            continue;
        }
        let reps = (1usize << bit) * job.n_trotter;
        let both_pow = matrix_power(&both, reps);
        for (x, y) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
            let next: Vec<Complex64> = match (x, y) {
                (0, 0) => d.clone(),
                (1, 0) => d.iter().zip(&ket).map(|(a, f)| a * f.powu(reps as u32)).collect(),
                (0, 1) => d.iter().zip(&bra).map(|(a, f)| a * f.powu(reps as u32)).collect(),
                _ => (0..k).map(|i| (0..k).map(|j| d[j] * both_pow[(i, j)]).sum()).collect(),
            };
            stack.push((bit + 1, l | (x << bit), lp | (y << bit), next));
        }
    }
    let omega = |a: usize| Complex64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * PI * a as f64 / n as f64);
    let mut probs = vec![0.0; n];
    for (yv, pr) in probs.iter_mut().enumerate() {
        let f: Vec<Complex64> = (0..n).map(|l| omega((yv * l) % n)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..n {
            for lp in 0..n {
                acc += f[l] * coh[(l, lp)] * f[lp].conj();
            }
        }
        *pr = acc.re;
    }
    Ok(probs)
}

/// Coherent QPE on a state with "price" and "phase" registers (phase zeroed).
pub fn qpe_write_eigenvalues(state: &StateVector, rho: &DensityMatrix, job: &PcaJob) -> Result<StateVector> {
    job.validate()?;
    let layout = state.layout.clone();
    let price = layout.get("price")?.clone();
    let phase = layout.get("phase")?.clone();
    if phase.width != job.phase_bits || rho.dim() != 1usize << price.width {
        return Err(QvarError::Dimension("phase/price register widths do not match job/rho".into()));
    }
    let off = (0..rho.dim())
        .flat_map(|i| (0..rho.dim()).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| rho.entries[(i, j)].norm())
        .fold(0.0, f64::max);
    if off > 1e-12 {
        return Err(QvarError::Numerical(format!("rho is not diagonal in the price basis ({off:e})")));
    }
    let diag = rho.diagonal();
    let support: Vec<usize> = (0..diag.len()).filter(|&i| diag[i] > 0.0).collect();
    let spectrum: Vec<f64> = support.iter().map(|&i| diag[i]).collect();
    let mut missing = Vec::new();
    let mut cache: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    let mut out = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for (i, a) in state.amplitudes.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        if layout.read(i, &phase) != 0 {
            return Err(QvarError::InvalidParam("phase register not zeroed".into()));
        }
        let c = layout.read(i, &price);
        let Some(pos) = support.iter().position(|&x| x == c) else {
            missing.push(i);
            continue;
        };
        if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(c) {
            let amps = match job.mode {
                PcaMode::ExactExponential => {
                    let n = job.n_qpe();
                    let amp = 1.0 / (n as f64).sqrt();
                    let pl = RegisterLayout::with_cap(&[("phase", job.phase_bits)], usize::MAX)?;
                    let amps = (0..n).map(|l| Complex64::from_polar(amp, -spectrum[pos] * UNIT_TIME * l as f64)).collect();
                    let mut s = StateVector::from_amplitudes(amps, pl)?;
                    s.inverse_qft("phase")?;
                    s.amplitudes
                }
                PcaMode::Trotterized => {
                    return Err(QvarError::InvalidParam(
                        "coherent QPE is exact-mode only; use the branch distribution for trotterized runs".into(),
                    ))
                }
            };
            slot.insert(amps);
        }
        for (y, b) in cache[&c].iter().enumerate() {
            out[layout.write(i, &phase, y)] += a * b;
        }
    }
    if !missing.is_empty() {
        return Err(QvarError::CodeMismatch(missing));
    }
    StateVector::from_amplitudes(out, layout)
}

/// |c>|y> -> |c>|y xor sqrt_code(decode(c))> on registers "phase" and "value".
pub fn sqrt_register(state: &StateVector, m: usize) -> Result<StateVector> {
    let layout = state.layout.clone();
    let phase = layout.get("phase")?.clone();
    let value = layout.get("value")?.clone();
    if value.width != m {
        return Err(QvarError::Dimension("value register width differs from m".into()));
    }
    let mut out = state.clone();
    out.apply_permutation(|i| {
        let c = layout.read(i, &phase);
        let v = sqrt_code(decode_phase(c, phase.width), m) as usize;
        layout.write(i, &value, layout.read(i, &value) ^ v)
    })?;
    Ok(out)
}

/// Nearest-node snapping of terminal path prices (ties to the lower node).
pub fn snap_paths(paths: &PathSet, grid: &PriceGrid) -> Vec<usize> {
    paths.prices.iter().map(|&s| grid.nearest(s)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub k: usize,
    pub path_price: f64,
    pub node: usize,
    pub snapped_price: f64,
    pub price_code: u64,
    pub lambda: f64,
    pub lambda_hat: f64,
    pub qpe_peak: f64,
    pub value_code: u64,
    pub value_hat: f64,
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub state: StateVector,
    pub branches: Vec<BranchRecord>,
    pub rho_diagonal: Vec<f64>,
    /// Largest probability mass left outside the modal QPE outcome.
    pub uncompute_residual: f64,
    pub slices: usize,
}

/// Builds |Phi> = L^{-1/2} sum_k |k>|S_k>|V_k> over registers index, price, value.
pub fn assemble_portfolio_state(
    paths: &PathSet,
    value_state: &StateVector,
    grid: &PriceGrid,
    job: &PcaJob,
) -> Result<Assembly> {
    job.validate()?;
    let code = paths.code;
    let codes = grid_codes(grid, &code)?;
    let rho = reduced_rho(value_state, grid, &code)?;
    let diag = rho.diagonal();
    let nodes = snap_paths(paths, grid);
    let support: Vec<usize> = codes.iter().map(|&c| c as usize).filter(|&c| diag[c] > 0.0).collect();
    let spectrum: Vec<f64> = support.iter().map(|&c| diag[c]).collect();

    let mut per_node: BTreeMap<usize, (f64, usize, f64)> = BTreeMap::new();
    let mut slices = 0;
    for &j in &nodes {
        if per_node.contains_key(&j) {
            continue;
        }
        let c = codes[j] as usize;
        let lambda = diag[c];
        let probs = if lambda <= 0.0 {
            let mut p = vec![0.0; job.n_qpe()];
            p[0] = 1.0;
            p
        } else {
            match job.mode {
                PcaMode::ExactExponential => qpe_distribution_exact(lambda, job.phase_bits)?,
                PcaMode::Trotterized => {
                    slices += job.slices();
                    let pos = support.iter().position(|&x| x == c).expect("populated code");
                    qpe_distribution_trotter(&spectrum, pos, job)?
                }
            }
        };
        let (mode, peak) = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        per_node.insert(j, (decode_phase(mode, job.phase_bits), mode, peak));
    }

    let l = paths.l;
    let index_bits = l.trailing_zeros() as usize;
    let layout = RegisterLayout::new(&[("index", index_bits.max(1)), ("price", code.width()), ("value", job.m)])?;
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
    let amp = Complex64::new(1.0 / (l as f64).sqrt(), 0.0);
    let mut branches = Vec::with_capacity(l);
    let mut residual = 0.0f64;
    for (k, &j) in nodes.iter().enumerate() {
        let (lambda_hat, _, peak) = per_node[&j];
        let value_code = sqrt_code(lambda_hat, job.m);
        let idx = layout.compose(&[("index", k), ("price", codes[j] as usize), ("value", value_code as usize)])?;
        amps[idx] = amp;
        residual = residual.max(1.0 - peak);
        branches.push(BranchRecord {
            k,
            path_price: paths.prices[k],
            node: j,
            snapped_price: grid.nodes[j],
            price_code: codes[j],
            lambda: diag[codes[j] as usize],
            lambda_hat,
            qpe_peak: peak,
            value_code,
            value_hat: value_code as f64 / (1u64 << job.m) as f64,
        });
    }
    Ok(Assembly {
        state: StateVector::from_amplitudes(amps, layout)?,
        branches,
        rho_diagonal: codes.iter().map(|&c| diag[c as usize]).collect(),
        uncompute_residual: residual,
        slices,
    })
}
