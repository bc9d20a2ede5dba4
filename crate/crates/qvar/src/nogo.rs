//! Copy-count lower bound for distinguishing the amplitude-maximum inputs.
//!
//! |psi> = -sqrt((d-1)/d)|0..0> + sqrt(1/d)|1..1>, |phi> = |0..0>, so
//! |<psi|phi>|^2 = (d-1)/d and m copies overlap as (1 - 1/d)^m.

use crate::error::{QvarError, Result};
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

/// Largest d^m materialized by the explicit gap.
pub const EXPLICIT_CAP: f64 = 4096.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConvention {
    /// sqrt(1 - (1 - 1/d)^m).
    Analytic,
    /// Trace norm of the difference of the m-copy projectors.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinguishInstance {
    pub n: usize,
    pub d: usize,
    pub m: usize,
}

impl DistinguishInstance {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize || m == 0 {
            return Err(QvarError::InvalidParam(format!("need n >= 1 and m >= 1, got n={n}, m={m}")));
        }
        Ok(Self { n, d: 1 << n, m })
    }
}

fn check(d: usize, m: usize) -> Result<()> {
    if d < 2 || m < 1 {
        return Err(QvarError::InvalidParam(format!("need d >= 2 and m >= 1, got d={d}, m={m}")));
    }
    Ok(())
}

pub fn overlap_power(d: usize, m: usize) -> Result<f64> {
    check(d, m)?;
    Ok((1.0 - 1.0 / d as f64).powi(m as i32))
}

/// Trace norm of |psi><psi|^m - |phi><phi|^m from the 2x2 span representation.
fn span_gap(d: usize, m: usize) -> f64 {
    let s = -((d as f64 - 1.0) / d as f64).sqrt();
    let s = s.powi(m as i32);
    let c = (1.0 - s * s).max(0.0).sqrt();
    let op = Matrix2::new(s * s - 1.0, s * c, s * c, c * c);
    op.symmetric_eigen().eigenvalues.iter().map(|e| e.abs()).sum()
}

pub fn trace_norm_gap(d: usize, m: usize, mode: GapConvention) -> Result<f64> {
    check(d, m)?;
    match mode {
        GapConvention::Analytic => Ok((1.0 - overlap_power(d, m)?).sqrt()),
        GapConvention::Explicit => {
            if (d as f64).powi(m as i32) > EXPLICIT_CAP {
                return Err(QvarError::InvalidParam(format!("d^m = {d}^{m} exceeds 2^12")));
            }
            Ok(span_gap(d, m))
        }
    }
}

/// Dense trace norm on the full d^m space, for cross-checking the span method.
pub fn dense_gap(d: usize, m: usize) -> Result<f64> {
    check(d, m)?;
    if (d as f64).powi(m as i32) > 256.0 {
        return Err(QvarError::InvalidParam("dense gap limited to d^m <= 256".into()));
    }
    let mut psi = vec![0.0; d];
    psi[0] = -((d as f64 - 1.0) / d as f64).sqrt();
    psi[d - 1] = (1.0 / d as f64).sqrt();
    let mut phi = vec![0.0; d];
    phi[0] = 1.0;
    let tensor = |v: &[f64]| {
        (1..m).fold(v.to_vec(), |acc, _| acc.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect())
    };
    let (a, b) = (tensor(&psi), tensor(&phi));
    let n = a.len();
    let diff = DMatrix::from_fn(n, n, |i, j| a[i] * a[j] - b[i] * b[j]);
    Ok(diff.symmetric_eigen().eigenvalues.iter().map(|e| e.abs()).sum())
}

/// Smallest copy count whose gap reaches `threshold`.
pub fn min_copies(d: usize, threshold: f64, convention: GapConvention) -> Result<usize> {
    check(d, 1)?;
    let upper = match convention {
        GapConvention::Analytic => 1.0,
        GapConvention::Explicit => 2.0,
    };
    if !(threshold > 0.0 && threshold < upper) {
        return Err(QvarError::InvalidParam(format!("threshold {threshold} outside (0, {upper})")));
    }
    let mut m = 1;
    loop {
        let gap = match convention {
            GapConvention::Analytic => (1.0 - overlap_power(d, m)?).sqrt(),
            GapConvention::Explicit => span_gap(d, m),
        };
        if gap >= threshold {
            return Ok(m);
        }
        m += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyCurve {
    pub points: Vec<(usize, usize)>,
    pub slope: f64,
    pub intercept: f64,
}

/// min_copies over d = 2, 4, ..., max_d with a least-squares line m = slope d + intercept.
pub fn copy_curve(max_d: usize, threshold: f64, convention: GapConvention) -> Result<CopyCurve> {
    if max_d < 4 {
        return Err(QvarError::InvalidParam("max_d must be at least 4".into()));
    }
    let mut points = Vec::new();
    let mut d = 2;
    while d <= max_d {
        points.push((d, min_copies(d, threshold, convention)?));
        d *= 2;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1 as f64 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(CopyCurve { points, slope, intercept: my - slope * mx })
}

/// Elementwise maximum of two amplitude vectors, renormalized.
pub fn am_max_merge(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(QvarError::Dimension("amplitude vectors differ in length".into()));
    }
    let merged: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
    let norm = merged.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QvarError::Numerical("merged vector vanishes".into()));
    }
    Ok(merged.iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_power(2, 1).unwrap(), 0.5);
        assert!(overlap_power(4, 0).is_err());
        let iterated = (0..16).fold(1.0, |acc, _| acc * (15.0 / 16.0));
        assert!((overlap_power(16, 16).unwrap() - iterated).abs() < 1e-14);
    }

    #[test]
    fn gap_examples() {
        let e = trace_norm_gap(2, 1, GapConvention::Explicit).unwrap();
        assert!((e - 2f64.sqrt()).abs() < 1e-12);
        let a = trace_norm_gap(2, 1, GapConvention::Analytic).unwrap();
        assert!((a - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(trace_norm_gap(2, 13, GapConvention::Explicit).is_err());
        assert!(trace_norm_gap(2, 200, GapConvention::Analytic).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn copies_examples() {
        assert_eq!(min_copies(2, 0.8, GapConvention::Analytic).unwrap(), 2);
        for d in [2, 16, 256] {
            assert_eq!(min_copies(d, 1e-9, GapConvention::Analytic).unwrap(), 1);
        }
        assert!(min_copies(4, 1.5, GapConvention::Analytic).is_err());
    }

    #[test]
    fn merge_renormalizes() {
        let v = am_max_merge(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
