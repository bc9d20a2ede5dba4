//! Market parameters, payoffs and the price lattice.

use crate::error::{QvarError, Result};
use serde::{Deserialize, Serialize};

/// Default simulator qubit budget.
pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Reads `QVAR_QUBIT_CAP`, falling back to [`DEFAULT_QUBIT_CAP`].
pub fn qubit_cap() -> usize {
    std::env::var("QVAR_QUBIT_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_QUBIT_CAP)
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0 {
        Some(k as usize)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub r: f64,
    pub mu: f64,
    /// CEV coefficient: sigma(S) = alpha / sqrt(S).
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t_exp: f64,
    pub t_bar: f64,
    pub dtau: f64,
}

impl MarketParams {
    pub fn new(r: f64, mu: f64, alpha: f64, t_exp: f64, t_bar: f64, dtau: f64) -> Result<Self> {
        let p = Self { r, mu, alpha, t_exp, t_bar, dtau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r, self.mu, self.alpha, self.t_exp, self.t_bar, self.dtau]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(QvarError::InvalidParam("non-finite market parameter".into()));
        }
        if self.r < 0.0 {
            return Err(QvarError::InvalidParam(format!("r = {} < 0", self.r)));
        }
        if self.alpha < 0.0 {
            return Err(QvarError::InvalidParam(format!("alpha = {} < 0", self.alpha)));
        }
        if self.dtau <= 0.0 {
            return Err(QvarError::InvalidParam(format!("dtau = {} <= 0", self.dtau)));
        }
        if !(0.0 <= self.t_bar && self.t_bar <= self.t_exp) {
            return Err(QvarError::InvalidParam(format!(
                "need 0 <= t_bar <= T, got t_bar = {}, T = {}",
                self.t_bar, self.t_exp
            )));
        }
        if integer_ratio(self.t_exp - self.t_bar, self.dtau).is_none() {
            return Err(QvarError::InvalidParam("(T - t_bar)/dtau is not an integer".into()));
        }
        if integer_ratio(self.t_bar, self.dtau).is_none() {
            return Err(QvarError::InvalidParam("t_bar/dtau is not an integer".into()));
        }
        Ok(())
    }

    /// Number of backward steps from T to t_bar.
    pub fn backward_steps(&self) -> usize {
        integer_ratio(self.t_exp - self.t_bar, self.dtau).unwrap_or(0)
    }

    /// Number of forward steps from 0 to t_bar.
    pub fn forward_steps(&self) -> usize {
        integer_ratio(self.t_bar, self.dtau).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: OptionKind,
    pub strike: f64,
}

impl PayoffSpec {
    pub fn new(kind: OptionKind, strike: f64) -> Result<Self> {
        if !(strike >= 0.0) || !strike.is_finite() {
            return Err(QvarError::InvalidParam(format!("strike = {strike}")));
        }
        Ok(Self { kind, strike })
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (s - self.strike).max(0.0),
            OptionKind::Put => (self.strike - s).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    pub nodes: Vec<f64>,
    pub n: usize,
}

impl PriceGrid {
    /// Wraps explicit nodes; length must be 2^n and strictly increasing from S_0 >= 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let len = nodes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QvarError::InvalidParam(format!("grid length {len} is not 2^n with n >= 1")));
        }
        if !(nodes[0] >= 0.0) {
            return Err(QvarError::InvalidParam("S_0 < 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(QvarError::InvalidParam("grid nodes not strictly increasing".into()));
        }
        Ok(Self { n: len.trailing_zeros() as usize, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the nearest node; ties go to the lower node.
    pub fn nearest(&self, s: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x < s);
        if i == 0 {
            return 0;
        }
        if i == self.nodes.len() {
            return i - 1;
        }
        let below = s - self.nodes[i - 1];
        let above = self.nodes[i] - s;
        if above < below {
            i
        } else {
            i - 1
        }
    }
}

pub fn build_grid(s_min: f64, s_max: f64, n: usize, spacing: Spacing) -> Result<PriceGrid> {
    build_grid_capped(s_min, s_max, n, spacing, qubit_cap())
}

pub fn build_grid_capped(
    s_min: f64,
    s_max: f64,
    n: usize,
    spacing: Spacing,
    cap: usize,
) -> Result<PriceGrid> {
    if n == 0 {
        return Err(QvarError::InvalidParam("n must be >= 1".into()));
    }
    if n > cap {
        return Err(QvarError::QubitBudget { need: n, cap });
    }
    if !(0.0 <= s_min && s_min < s_max) || !s_max.is_finite() {
        return Err(QvarError::InvalidParam(format!("need 0 <= s_min < s_max, got {s_min}, {s_max}")));
    }
    let len = 1usize << n;
    let last = (len - 1) as f64;
    let mut nodes: Vec<f64> = match spacing {
        Spacing::Uniform => (0..len)
            .map(|j| s_min + (s_max - s_min) * j as f64 / last)
            .collect(),
        Spacing::Geometric => {
            if s_min <= 0.0 {
                return Err(QvarError::InvalidParam("geometric spacing needs s_min > 0".into()));
            }
            let ratio = s_max / s_min;
            (0..len).map(|j| s_min * ratio.powf(j as f64 / last)).collect()
        }
    };
    nodes[0] = s_min;
    nodes[len - 1] = s_max;
    PriceGrid::from_nodes(nodes)
}

pub fn payoff_vector(spec: &PayoffSpec, grid: &PriceGrid) -> Vec<f64> {
    grid.nodes.iter().map(|&s| spec.value(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_and_put_on_padded_grid() {
        let grid = PriceGrid::from_nodes(vec![50.0, 100.0, 150.0, 200.0]).unwrap();
        let call = PayoffSpec::new(OptionKind::Call, 100.0).unwrap();
        let put = PayoffSpec::new(OptionKind::Put, 100.0).unwrap();
        assert_eq!(payoff_vector(&call, &grid), vec![0.0, 0.0, 50.0, 100.0]);
        assert_eq!(payoff_vector(&put, &grid), vec![50.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_strike_call_is_identity() {
        let grid = build_grid(0.0, 7.0, 3, Spacing::Uniform).unwrap();
        let call = PayoffSpec::new(OptionKind::Call, 0.0).unwrap();
        assert_eq!(payoff_vector(&call, &grid), grid.nodes);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(build_grid(0.0, 3.0, 2, Spacing::Uniform).unwrap().nodes, vec![0.0, 1.0, 2.0, 3.0]);
        let g = build_grid(1.0, 8.0, 2, Spacing::Geometric).unwrap();
        for (a, b) in g.nodes.iter().zip([1.0, 2.0, 4.0, 8.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(build_grid(0.0, 1.0, 1, Spacing::Uniform).unwrap().nodes, vec![0.0, 1.0]);
    }

    #[test]
    fn grid_rejects_budget_and_bad_bounds() {
        assert!(matches!(
            build_grid_capped(0.0, 1.0, 30, Spacing::Uniform, 24),
            Err(QvarError::QubitBudget { .. })
        ));
        assert!(build_grid(2.0, 1.0, 2, Spacing::Uniform).is_err());
        assert!(build_grid(0.0, 1.0, 2, Spacing::Geometric).is_err());
    }

    #[test]
    fn params_require_integer_step_counts() {
        assert!(MarketParams::new(0.05, 0.05, 0.4, 1.0, 0.25, 1.0 / 64.0).is_ok());
        assert!(MarketParams::new(0.05, 0.05, 0.4, 1.0, 0.3, 0.25).is_err());
        assert!(MarketParams::new(-0.1, 0.0, 0.4, 1.0, 0.0, 0.25).is_err());
        assert!(MarketParams::new(0.0, 0.0, 0.4, 1.0, 1.5, 0.25).is_err());
        let p = MarketParams::new(0.0, 0.0, 1.0, 1.0, 0.25, 0.125).unwrap();
        assert_eq!(p.backward_steps(), 6);
        assert_eq!(p.forward_steps(), 2);
    }

    #[test]
    fn nearest_breaks_ties_down() {
        let g = PriceGrid::from_nodes(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.nearest(0.5), 0);
        assert_eq!(g.nearest(0.51), 1);
        assert_eq!(g.nearest(-4.0), 0);
        assert_eq!(g.nearest(9.0), 3);
        assert_eq!(g.nearest(2.0), 2);
    }
}
