//! Comparator, bisection VaR, tail-probability estimation, swap test and CVaR.

use crate::error::{QvarError, Result};
use crate::qcore::{RegisterLayout, StateVector};
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_LEVEL: f64 = 0.05;
/// Confidence parameter of iterative amplitude estimation.
pub const AE_ALPHA: f64 = 0.01;
/// Slack on tail >= q so exact-mode round-off never moves the threshold.
pub const TAIL_TOL: f64 = 1e-12;
const AE_SHOTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    Classical,
    QuantumExact,
    QuantumSampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub level: f64,
    /// VaR in price units.
    pub var: f64,
    /// CVaR in price units.
    pub cvar: f64,
    pub var_normalized: f64,
    pub cvar_normalized: f64,
    /// m-bit value code of the VaR threshold (quantum methods).
    pub var_code: Option<u64>,
    /// Achieved tail fraction.
    pub p0: f64,
    pub tail_size: usize,
    pub method: RiskMethod,
    pub scale: f64,
    pub bisection_iterations: usize,
}

/// Copies `state` into a layout with a zeroed register appended at the bottom.
pub fn append_register(state: &StateVector, name: &str, width: usize) -> Result<StateVector> {
    let mut spec: Vec<(&str, usize)> =
        state.layout.registers().iter().map(|r| (r.name.as_str(), r.width)).collect();
    spec.push((name, width));
    let layout = RegisterLayout::new(&spec)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for (i, a) in state.amplitudes.iter().enumerate() {
        amps[i << width] = *a;
    }
    StateVector::from_amplitudes(amps, layout)
}

/// flag ^= [value > threshold].
pub fn comparator_ucc(state: &StateVector, value_reg: &str, threshold: u64, flag: &str) -> Result<StateVector> {
    let layout = state.layout.clone();
    let v = layout.get(value_reg)?.clone();
    let f = layout.get(flag)?.clone();
    if f.width != 1 {
        return Err(QvarError::Dimension("flag register must be one qubit".into()));
    }
    let mut out = state.clone();
    out.apply_permutation(|i| {
        let hit = (layout.read(i, &v) as u64 > threshold) as usize;
        layout.write(i, &f, layout.read(i, &f) ^ hit)
    })?;
    Ok(out)
}

/// Mass of flag = 0.
pub fn tail_probability_exact(state: &StateVector, flag: &str) -> Result<f64> {
    Ok(state.exact_distribution(flag)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// State-preparation calls, counting 2 per Grover iterate plus one per shot.
    pub queries: u64,
    pub rounds: usize,
}

/// Theoretical query bound of iterative amplitude estimation with Chernoff intervals.
pub fn iqae_query_budget(eps: f64, alpha: f64) -> u64 {
    (50.0 / eps * (2.0 / alpha * (PI / (4.0 * eps)).log2()).ln()).ceil() as u64
}

/// Iterative amplitude estimation of a = sin^2(theta) to additive accuracy `eps`.
///
/// Outcomes after k Grover iterates are drawn from the exact law sin^2((2k+1) theta).
pub fn iterative_amplitude_estimation(a: f64, eps: f64, alpha: f64, seed: u64) -> Result<AmplitudeEstimate> {
    if !(0.0..=1.0).contains(&a) || !(eps > 0.0 && eps < 0.5) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(QvarError::InvalidParam("amplitude estimation needs a in [0,1], eps in (0,0.5), alpha in (0,1)".into()));
    }
    let theta = a.sqrt().asin();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t_max = (PI / (8.0 * eps)).log2().ceil().max(1.0);
    let half_width = ((2.0 * t_max / alpha).ln() / (2.0 * AE_SHOTS as f64)).sqrt();
    let (mut lo, mut hi) = (0.0f64, PI / 2.0);
    let (mut k, mut up) = (0u64, true);
    let (mut hits, mut shots) = (0u64, 0u64);
    let mut queries = 0u64;
    let mut rounds = 0;
    while hi.sin().powi(2) - lo.sin().powi(2) > 2.0 * eps {
        rounds += 1;
        let (next_k, next_up) = next_power(k, lo, hi, up);
        if next_k != k {
            hits = 0;
            shots = 0;
        }
        k = next_k;
        up = next_up;
        let big = (4 * k + 2) as f64;
        let p = ((2 * k + 1) as f64 * theta).sin().powi(2);
        let draw = Binomial::new(AE_SHOTS, p)
            .map_err(|e| QvarError::Numerical(e.to_string()))?;
        hits += draw.sample(&mut rng);
        shots += AE_SHOTS;
        queries += AE_SHOTS * (2 * k + 1);
        let width = half_width * (AE_SHOTS as f64 / shots as f64).sqrt();
        let freq = hits as f64 / shots as f64;
        let (a_lo, a_hi) = ((freq - width).max(0.0), (freq + width).min(1.0));
        let (s_lo, s_hi) = if up {
            ((1.0 - 2.0 * a_lo).acos(), (1.0 - 2.0 * a_hi).acos())
        } else {
            (2.0 * PI - (1.0 - 2.0 * a_hi).acos(), 2.0 * PI - (1.0 - 2.0 * a_lo).acos())
        };
        let turns = (big * lo / (2.0 * PI)).floor() * 2.0 * PI;
        let new_lo = (turns + s_lo) / big;
        let new_hi = (turns + s_hi) / big;
        lo = lo.max(new_lo);
        hi = hi.min(new_hi);
        if rounds > 10_000 {
            return Err(QvarError::Numerical("amplitude estimation did not converge".into()));
        }
    }
    let (lower, upper) = (lo.sin().powi(2), hi.sin().powi(2));
    Ok(AmplitudeEstimate { estimate: 0.5 * (lower + upper), lower, upper, queries, rounds })
}

fn next_power(k: u64, lo: f64, hi: f64, up: bool) -> (u64, bool) {
    let cur = (4 * k + 2) as f64;
    let mut big = (PI / (hi - lo)).floor() as i64;
    big -= (big - 2).rem_euclid(4);
    while big as f64 >= 2.0 * cur && big >= 2 {
        let (s_lo, s_hi) = (big as f64 * lo % (2.0 * PI), big as f64 * hi % (2.0 * PI));
        if s_hi >= s_lo && s_hi <= PI {
            return (((big - 2) / 4) as u64, true);
        }
        if s_lo >= PI && s_hi >= s_lo {
            return (((big - 2) / 4) as u64, false);
        }
        big -= 4;
    }
    (k, up)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    Exact,
    Sampled { seed: u64 },
}

/// |<A|B>| by the swap test, P(0) = (1 + |<A|B>|^2)/2.
pub fn swap_test_overlap(a: &StateVector, b: &StateVector, mode: EstimateMode, eps: f64) -> Result<(f64, u64)> {
    if a.layout != b.layout {
        return Err(QvarError::Dimension("swap test on differently shaped states".into()));
    }
    let overlap = a.inner(b)?.norm().min(1.0);
    match mode {
        EstimateMode::Exact => Ok((overlap, 0)),
        EstimateMode::Sampled { seed } => {
            let p0 = 0.5 * (1.0 + overlap * overlap);
            let mut target = eps / 2.0;
            let mut queries = 0;
            for round in 0.. {
                let est = iterative_amplitude_estimation(p0, target, AE_ALPHA, seed.wrapping_add(round))?;
                queries += est.queries;
                let lo = (2.0 * est.lower - 1.0).max(0.0).sqrt();
                let hi = (2.0 * est.upper - 1.0).max(0.0).sqrt();
                if hi - lo <= 2.0 * eps || target < 1e-9 {
                    return Ok((0.5 * (lo + hi), queries));
                }
                target *= 0.5;
            }
            unreachable!()
        }
    }
}

/// Dense swap-test circuit: H, controlled swap, H on an ancilla; returns P(ancilla = 0).
pub fn swap_test_circuit(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.layout != b.layout {
        return Err(QvarError::Dimension("swap test on differently shaped states".into()));
    }
    let q = a.num_qubits();
    let layout = RegisterLayout::new(&[("anc", 1), ("a", q), ("b", q)])?;
    let d = 1usize << q;
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for (i, x) in a.amplitudes.iter().enumerate() {
        for (j, y) in b.amplitudes.iter().enumerate() {
            amps[i * d + j] = x * y;
        }
    }
    let mut s = StateVector::from_amplitudes(amps, layout.clone())?;
    let h = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]).map(|x: f64| Complex64::new(x * 0.5f64.sqrt(), 0.0));
    s.apply_unitary(&["anc"], &h)?;
    let (anc, ra, rb) = (layout.get("anc")?.clone(), layout.get("a")?.clone(), layout.get("b")?.clone());
    s.apply_permutation(|i| {
        if layout.read(i, &anc) == 0 {
            return i;
        }
        let (x, y) = (layout.read(i, &ra), layout.read(i, &rb));
        layout.write(layout.write(i, &ra, y), &rb, x)
    })?;
    s.apply_unitary(&["anc"], &h)?;
    Ok(s.exact_distribution("anc")?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bisection {
    pub code: u64,
    pub iterations: usize,
}

/// Smallest m-bit code c with tail(c) >= q; tail must be non-decreasing in c.
pub fn bisection_var<F: FnMut(u64) -> Result<f64>>(mut tail: F, q: f64, m: usize) -> Result<Bisection> {
    if !(q > 0.0 && q < 1.0) {
        return Err(QvarError::InvalidParam(format!("level q = {q} outside (0,1)")));
    }
    let (mut lo, mut hi) = (0u64, (1u64 << m) - 1);
    let mut iterations = 0;
    while lo < hi {
        iterations += 1;
        let mid = lo + (hi - lo) / 2;
        if tail(mid)? >= q - TAIL_TOL {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Bisection { code: lo, iterations })
}

/// Empirical q-quantile (smallest value with CDF >= q) and the mean of values at or below it.
pub fn classical_var_cvar(values: &[f64], q: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(QvarError::EmptyTail);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(QvarError::InvalidParam(format!("level q = {q} outside (0,1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let mut idx = idx;
    while idx > 0 && (idx as f64) / (n as f64) >= q {
        idx -= 1;
    }
    let var = sorted[idx];
    let tail: Vec<f64> = sorted.iter().copied().filter(|&v| v <= var).collect();
    Ok((var, tail.iter().sum::<f64>() / tail.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarEstimate {
    /// Tail mean in normalized units.
    pub cvar: f64,
    /// |<R|Phi4>| = (1/L) sum over the tail of the branch values.
    pub rotation_overlap: f64,
    /// The overlap entering the CVaR formula, sqrt(p0 L) times the rotation overlap.
    pub overlap: f64,
    pub p0: f64,
    pub tail_size: usize,
    pub queries: u64,
}

/// CVaR from |Phi> over registers index, price, value and per-branch register tables.
///
/// A value-controlled rotation writes V on an ancilla, the price and value registers
/// are uncomputed from the branch tables, and the overlap with
/// L^{-1/2} sum_k |k>|0>|0>|flag 0>|1> gives (1/L) sum_tail V.
pub fn cvar(
    phi: &StateVector,
    price_codes: &[u64],
    value_codes: &[u64],
    threshold: u64,
    m: usize,
    mode: EstimateMode,
    eps: f64,
) -> Result<CvarEstimate> {
    let l = price_codes.len();
    if value_codes.len() != l || l == 0 {
        return Err(QvarError::Dimension("branch tables do not match".into()));
    }
    let with_flag = append_register(phi, "flag", 1)?;
    let flagged = comparator_ucc(&with_flag, "value", threshold, "flag")?;
    let exact_p0 = tail_probability_exact(&flagged, "flag")?;
    let (p0, p0_queries) = match mode {
        EstimateMode::Exact => (exact_p0, 0),
        EstimateMode::Sampled { seed } => {
            let est = iterative_amplitude_estimation(exact_p0, eps, AE_ALPHA, seed ^ 0x9e37_79b9)?;
            (est.estimate, est.queries)
        }
    };
    let tail_size = value_codes.iter().filter(|&&v| v <= threshold).count();
    if tail_size == 0 {
        return Err(QvarError::EmptyTail);
    }
    let mut s = append_register(&flagged, "rot", 1)?;
    let layout = s.layout.clone();
    let (idx, price, value, rot) = (
        layout.get("index")?.clone(),
        layout.get("price")?.clone(),
        layout.get("value")?.clone(),
        layout.get("rot")?.clone(),
    );
    let scale = (1u64 << m) as f64;
    let amps = s.amplitudes.clone();
    for (i, a) in amps.iter().enumerate() {
        if layout.read(i, &rot) != 0 || a.norm_sqr() == 0.0 {
            continue;
        }
        let v = layout.read(i, &value) as f64 / scale;
        let c = (1.0 - v * v).max(0.0).sqrt();
        s.amplitudes[i] = a * c;
        s.amplitudes[layout.write(i, &rot, 1)] = a * v;
    }
    s.apply_permutation(|i| {
        let k = layout.read(i, &idx);
        if k >= l {
            return i;
        }
        let j = layout.write(i, &price, layout.read(i, &price) ^ price_codes[k] as usize);
        layout.write(j, &value, layout.read(j, &value) ^ value_codes[k] as usize)
    })?;
    let mut reference = vec![Complex64::new(0.0, 0.0); layout.dim()];
    let amp = Complex64::new(1.0 / (l as f64).sqrt(), 0.0);
    for k in 0..l {
        reference[layout.compose(&[("index", k), ("rot", 1)])?] = amp;
    }
    let reference = StateVector::from_amplitudes(reference, layout)?;
    let (rotation_overlap, queries) = swap_test_overlap(&reference, &s, mode, eps * p0)?;
    let overlap = (p0 * l as f64).sqrt() * rotation_overlap;
    let cvar = overlap / (p0.powf(1.5) * (l as f64).sqrt());
    Ok(CvarEstimate { cvar, rotation_overlap, overlap, p0, tail_size, queries: queries + p0_queries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_examples() {
        assert_eq!(classical_var_cvar(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), (1.0, 1.0));
        assert_eq!(classical_var_cvar(&[2.0; 5], 0.05).unwrap(), (2.0, 2.0));
        assert_eq!(classical_var_cvar(&[4.0, 3.0, 1.0, 2.0], 0.5).unwrap(), (2.0, 1.5));
        assert_eq!(classical_var_cvar(&[1.0, 2.0, 3.0, 4.0], 0.26).unwrap(), (2.0, 1.5));
        assert!(classical_var_cvar(&[], 0.1).is_err());
    }

    #[test]
    fn bisection_on_sorted_codes() {
        let codes = [3u64, 9, 12, 20, 21, 40, 50, 63];
        let tail = |c: u64| Ok(codes.iter().filter(|&&v| v <= c).count() as f64 / 8.0);
        let b = bisection_var(tail, 0.25, 6).unwrap();
        assert_eq!(b.code, 9);
        assert!(b.iterations <= 6);
    }

    #[test]
    fn amplitude_estimation_hits_target() {
        for seed in 0..10 {
            let est = iterative_amplitude_estimation(0.3, 0.01, AE_ALPHA, seed).unwrap();
            assert!((est.estimate - 0.3).abs() <= 0.01, "{est:?}");
            assert!(est.queries <= iqae_query_budget(0.01, AE_ALPHA));
        }
    }
}
