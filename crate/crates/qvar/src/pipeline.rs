//! End-to-end run: value-state preparation, path simulation, lookup assembly and risk.

use crate::error::{QvarError, Result};
use crate::fixed::FixedPointCode;
use crate::market::{build_grid, payoff_vector, qubit_cap, MarketParams, PayoffSpec, PriceGrid, Spacing};
use crate::mc::{euler_forward, euler_inverse, simulate_paths};
use crate::pde::price_european;
use crate::qcore::{RegisterLayout, StateVector};
use crate::qpca::{assemble_portfolio_state, PcaJob, PcaMode};
use crate::qsvt::{prepare_value_state, PrepareOptions, DEFAULT_DEGREE_CAP};
use crate::risk::{
    append_register, bisection_var, classical_var_cvar, comparator_ucc, cvar, iterative_amplitude_estimation,
    tail_probability_exact, EstimateMode, RiskMethod, RiskReport, AE_ALPHA,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Ancillas counted in the qubit budget: three block-encoding qubits and the QSVT signal qubit.
pub const BUDGET_ANCILLAS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub n: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub market: MarketParams,
    pub payoff: PayoffSpec,
    pub grid: GridSpec,
    pub s0: f64,
    /// Number of scenario paths L.
    pub paths: usize,
    /// Value-register bits.
    pub m: usize,
    /// Fractional bits of the price register.
    pub price_frac_bits: usize,
    pub q: f64,
    pub pca_mode: PcaMode,
    pub n_trotter: usize,
    /// Phase-register bits; 2m + 2 when absent.
    pub phase_bits: Option<usize>,
    pub method: RiskMethod,
    pub eps1: f64,
    /// Additive accuracy of sampled estimates.
    pub ae_eps: f64,
    pub degree_cap: usize,
    pub seed: u64,
    pub report_path: Option<String>,
    pub branches_path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            market: MarketParams { r: 0.05, mu: 0.05, alpha: 0.4, t_exp: 0.25, t_bar: 0.125, dtau: 1.0 / 32.0 },
            payoff: PayoffSpec { kind: crate::market::OptionKind::Call, strike: 1.0 },
            grid: GridSpec { s_min: 0.0, s_max: 4.0, n: 4, spacing: Spacing::Uniform },
            s0: 1.0,
            paths: 8,
            m: 6,
            price_frac_bits: 4,
            q: crate::risk::DEFAULT_LEVEL,
            pca_mode: PcaMode::ExactExponential,
            n_trotter: 32,
            phase_bits: None,
            method: RiskMethod::QuantumExact,
            eps1: 1e-3,
            ae_eps: 0.01,
            degree_cap: DEFAULT_DEGREE_CAP,
            seed: 7,
            report_path: None,
            branches_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QvarError::InvalidParam(format!("config: {e}")))
    }

    /// log L + 2m + n + ancillas.
    pub fn qubit_budget(&self) -> usize {
        self.paths.trailing_zeros() as usize + 2 * self.m + self.grid.n + BUDGET_ANCILLAS
    }

    pub fn job(&self) -> PcaJob {
        let mut job = PcaJob::new(self.m, self.pca_mode);
        job.n_trotter = self.n_trotter;
        if let Some(p) = self.phase_bits {
            job.phase_bits = p;
        }
        job
    }

    pub fn price_code(&self) -> Result<FixedPointCode> {
        FixedPointCode::covering(self.price_frac_bits, 2.0 * self.grid.s_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        PayoffSpec::new(self.payoff.kind, self.payoff.strike)?;
        if self.paths < 2 || !self.paths.is_power_of_two() {
            return Err(QvarError::InvalidParam(format!("L = {} must be a power of two >= 2", self.paths)));
        }
        if !(1..=16).contains(&self.m) {
            return Err(QvarError::InvalidParam(format!("m = {} outside 1..=16", self.m)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(QvarError::InvalidParam(format!("q = {} outside (0,1)", self.q)));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 1.0) || !(self.ae_eps > 0.0 && self.ae_eps < 0.5) {
            return Err(QvarError::InvalidParam("accuracy targets out of range".into()));
        }
        if !(self.s0 >= 0.0 && self.s0 <= self.grid.s_max) {
            return Err(QvarError::InvalidParam(format!("s0 = {} outside the grid", self.s0)));
        }
        self.job().validate()?;
        let cap = qubit_cap();
        let need = self.qubit_budget();
        if need > cap {
            return Err(QvarError::QubitBudget { need, cap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTally {
    pub block_encoding_queries: u64,
    pub qsvt_degree: u64,
    pub qsvt_stages: u64,
    pub step2_steps: u64,
    pub trotter_slices: u64,
    pub rho_copies: u64,
    pub qpe_branches: u64,
    pub state_preparations: u64,
    pub bisection_iterations: u64,
    pub amplitude_estimation_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub k: usize,
    pub path_price: f64,
    pub snapped_price: f64,
    pub value_code: u64,
    pub value_hat: f64,
    pub lookup: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub var: f64,
    pub cvar: f64,
    pub max_branch_error: f64,
    pub value_state_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config: RunConfig,
    pub report: RiskReport,
    pub classical: RiskReport,
    pub deviation: Deviation,
    pub success_probability: f64,
    pub uncompute_residual: f64,
    pub tally: ResourceTally,
    pub branches: Vec<BranchRow>,
}

/// Reversible twin of the path simulation on registers index, price, scratch.
///
/// Each step computes y = Q(F(x)) into scratch, clears x with Q(F^{-1}(y)) and swaps.
pub fn step2_circuit(params: &MarketParams, s0: f64, l: usize, code: &FixedPointCode) -> Result<Vec<u64>> {
    let w = code.width();
    let index_bits = l.trailing_zeros() as usize;
    let layout = RegisterLayout::new(&[("index", index_bits), ("price", w), ("scratch", w)])?;
    let start = code.quantize(s0)? as usize;
    let amp = Complex64::new(1.0 / (l as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for k in 0..l {
        amps[layout.compose(&[("index", k), ("price", start)])?] = amp;
    }
    let mut state = StateVector::from_amplitudes(amps, layout.clone())?;
    let (ri, rp, rs) = (layout.get("index")?.clone(), layout.get("price")?.clone(), layout.get("scratch")?.clone());
    let max = code.max_code() as usize;
    for _ in 0..params.forward_steps() {
        let fwd: Vec<Vec<usize>> = (0..l)
            .map(|k| {
                (0..=max)
                    .map(|x| code.quantize_saturating(euler_forward(k + 1, l, code.decode(x as u64), params)) as usize)
                    .collect()
            })
            .collect();
        let inv: Vec<Vec<usize>> = (0..l)
            .map(|k| {
                (0..=max)
                    .map(|y| match euler_inverse(k + 1, l, code.decode(y as u64), params) {
                        Ok(x) => code.quantize_saturating(x) as usize,
                        Err(_) => 0,
                    })
                    .collect()
            })
            .collect();
        for (i, a) in state.amplitudes.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let (k, x) = (layout.read(i, &ri), layout.read(i, &rp));
            let exact = euler_forward(k + 1, l, code.decode(x as u64), params);
            if exact > code.range_max() {
                return Err(QvarError::FixedPointOverflow { value: exact, range_max: code.range_max() });
            }
        }
        state.apply_permutation(|i| {
            let (k, x, y) = (layout.read(i, &ri), layout.read(i, &rp), layout.read(i, &rs));
            if k >= l {
                return i;
            }
            layout.write(i, &rs, y ^ fwd[k][x])
        })?;
        state.apply_permutation(|i| {
            let (k, x, y) = (layout.read(i, &ri), layout.read(i, &rp), layout.read(i, &rs));
            if k >= l {
                return i;
            }
            layout.write(i, &rp, x ^ inv[k][y])
        })?;
        let residual: f64 = state
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| layout.read(*i, &rp) != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if residual > 0.0 {
            return Err(QvarError::Uncompute(residual));
        }
        state.apply_permutation(|i| {
            let (x, y) = (layout.read(i, &rp), layout.read(i, &rs));
            layout.write(layout.write(i, &rp, y), &rs, x)
        })?;
    }
    let mut codes = vec![0u64; l];
    for (i, a) in state.amplitudes.iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            codes[layout.read(i, &ri)] = layout.read(i, &rp) as u64;
        }
    }
    Ok(codes)
}

fn build(config: &RunConfig) -> Result<PriceGrid> {
    let g = &config.grid;
    build_grid(g.s_min, g.s_max, g.n, g.spacing)
}

/// Steps 1-4 with the classical oracle attached. Errors carry no partial tally.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let params = config.market;
    let grid = build(config)?;
    let code = config.price_code()?;
    let job = config.job();
    let m = config.m;
    let mut tally = ResourceTally::default();

    let payoff = payoff_vector(&config.payoff, &grid);
    let surface = price_european(&params, &grid, &config.payoff)?;
    let scale = surface.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Err(QvarError::Numerical("value surface vanishes on the grid".into()));
    }
    let normalized: Vec<f64> = surface.values.iter().map(|v| v / scale).collect();
    let vs = prepare_value_state(
        &payoff,
        &params,
        &grid,
        config.eps1,
        PrepareOptions { degree_cap: config.degree_cap, ..Default::default() },
    )?;
    tally.block_encoding_queries += vs.total_degree as u64;
    tally.qsvt_degree = vs.stage_degree as u64;
    tally.qsvt_stages = vs.stages as u64;
    let l2 = vs
        .state
        .amplitudes
        .iter()
        .zip(&normalized)
        .map(|(a, v)| (a - v).norm_sqr())
        .sum::<f64>()
        .sqrt();

    let paths = simulate_paths(&params, config.s0, config.paths, code)?;
    let twin = step2_circuit(&params, config.s0, config.paths, &code)?;
    if twin != paths.codes {
        let bad = twin.iter().zip(&paths.codes).enumerate().filter(|(_, (a, b))| a != b).map(|(k, _)| k).collect();
        return Err(QvarError::CodeMismatch(bad));
    }
    tally.step2_steps = params.forward_steps() as u64;

    let assembly = assemble_portfolio_state(&paths, &vs.state, &grid, &job)?;
    tally.trotter_slices = assembly.slices as u64;
    tally.rho_copies = assembly.slices as u64;
    let mut distinct: Vec<usize> = assembly.branches.iter().map(|b| b.node).collect();
    distinct.sort_unstable();
    distinct.dedup();
    tally.qpe_branches = distinct.len() as u64;

    let lookup: Vec<f64> = assembly.branches.iter().map(|b| normalized[b.node]).collect();
    let branches: Vec<BranchRow> = assembly
        .branches
        .iter()
        .zip(&lookup)
        .map(|(b, &v)| BranchRow {
            k: b.k,
            path_price: b.path_price,
            snapped_price: b.snapped_price,
            value_code: b.value_code,
            value_hat: b.value_hat,
            lookup: v,
            error: (b.value_hat - v).abs(),
        })
        .collect();

    let (cvar_n, cvar_m) = classical_var_cvar(&lookup, config.q)?;
    let classical_tail = lookup.iter().filter(|&&v| v <= cvar_n).count();
    let classical = RiskReport {
        level: config.q,
        var: cvar_n * scale,
        cvar: cvar_m * scale,
        var_normalized: cvar_n,
        cvar_normalized: cvar_m,
        var_code: None,
        p0: classical_tail as f64 / lookup.len() as f64,
        tail_size: classical_tail,
        method: RiskMethod::Classical,
        scale,
        bisection_iterations: 0,
    };

    let report = match config.method {
        RiskMethod::Classical => classical.clone(),
        RiskMethod::QuantumExact | RiskMethod::QuantumSampled => {
            let flagged = append_register(&assembly.state, "flag", 1)?;
            let mut evals = 0u64;
            let mut ae_queries = 0u64;
            let sampled = config.method == RiskMethod::QuantumSampled;
            let tail = |c: u64| -> Result<f64> {
                evals += 1;
                let p = tail_probability_exact(&comparator_ucc(&flagged, "value", c, "flag")?, "flag")?;
                if sampled {
                    let est = iterative_amplitude_estimation(p, config.ae_eps, AE_ALPHA, config.seed.wrapping_add(evals))?;
                    ae_queries += est.queries;
                    Ok(est.estimate)
                } else {
                    Ok(p)
                }
            };
            let bis = bisection_var(tail, config.q, m)?;
            let mode = if sampled {
                EstimateMode::Sampled { seed: config.seed.wrapping_add(1 << 32) }
            } else {
                EstimateMode::Exact
            };
            let price_codes: Vec<u64> = assembly.branches.iter().map(|b| b.price_code).collect();
            let value_codes: Vec<u64> = assembly.branches.iter().map(|b| b.value_code).collect();
            let est = cvar(&assembly.state, &price_codes, &value_codes, bis.code, m, mode, config.ae_eps)?;
            tally.bisection_iterations = bis.iterations as u64;
            tally.amplitude_estimation_queries = ae_queries + est.queries;
            tally.state_preparations = bis.iterations as u64 + 1 + tally.amplitude_estimation_queries;
            let var_n = bis.code as f64 / (1u64 << m) as f64;
            RiskReport {
                level: config.q,
                var: var_n * scale,
                cvar: est.cvar * scale,
                var_normalized: var_n,
                cvar_normalized: est.cvar,
                var_code: Some(bis.code),
                p0: est.p0,
                tail_size: est.tail_size,
                method: config.method,
                scale,
                bisection_iterations: bis.iterations,
            }
        }
    };
    let deviation = Deviation {
        var: report.var_normalized - classical.var_normalized,
        cvar: report.cvar_normalized - classical.cvar_normalized,
        max_branch_error: branches.iter().map(|b| b.error).fold(0.0, f64::max),
        value_state_l2: l2,
    };
    Ok(RunOutput {
        config: config.clone(),
        report,
        classical,
        deviation,
        success_probability: vs.success_probability,
        uncompute_residual: assembly.uncompute_residual,
        tally,
        branches,
    })
}

pub fn report_json(output: &RunOutput) -> Result<String> {
    serde_json::to_string_pretty(output).map_err(|e| QvarError::Numerical(e.to_string()))
}

pub fn branches_csv(rows: &[BranchRow]) -> String {
    let mut s = String::from("k,path_price,snapped_price,value_code,value_hat,lookup,error\n");
    for b in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.k, b.path_price, b.snapped_price, b.value_code, b.value_hat, b.lookup, b.error
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes the report (JSON) or the per-branch table (CSV) and returns the text.
pub fn emit_report(output: &RunOutput, format: ReportFormat, path: Option<&str>) -> Result<String> {
    let text = match format {
        ReportFormat::Json => report_json(output)?,
        ReportFormat::Csv => branches_csv(&output.branches),
    };
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|e| QvarError::InvalidParam(format!("cannot write {p}: {e}")))?;
    }
    Ok(text)
}
