use clap::{Args, Parser, Subcommand, ValueEnum};
use qvar::block_encoding::{assemble_block_encoding, verify_block_encoding};
use qvar::market::{build_grid, payoff_vector, PriceGrid};
use qvar::mc::simulate_paths;
use qvar::nogo::{copy_curve, GapConvention};
use qvar::pde::{assemble_operator, price_american, price_european};
use qvar::pipeline::{branches_csv, emit_report, run_pipeline, ReportFormat, RunConfig};
use qvar::qcore::real_unitarity_error;
use qvar::qpca::PcaMode;
use qvar::qsvt::{prepare_value_state, PrepareOptions};
use qvar::risk::RiskMethod;
use qvar::{QvarError, Result};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  configuration or dimension error
  3  numerical failure (singular pivot, degree cap, low success probability, empty tail, ...)
  4  qubit budget exceeded (cap 24, override with QVAR_QUBIT_CAP)";

#[derive(Parser)]
#[command(name = "qvar", version, about = "Classical and simulated-quantum VaR/CVaR for option portfolios", after_help = EXIT_CODES)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Default)]
struct Overrides {
    /// Grid qubits (2^n nodes).
    #[arg(long)]
    n: Option<usize>,
    /// Scenario paths L (power of two).
    #[arg(long)]
    paths: Option<usize>,
    /// Value-register bits m.
    #[arg(long)]
    bits: Option<usize>,
    /// Tail level q.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    t_bar: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PcaArg {
    Exact,
    Trotter,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Classical,
    QuantumExact,
    QuantumSampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    European,
    American,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Analytic,
    Explicit,
}

#[derive(Subcommand)]
enum Cmd {
    /// Implicit finite-difference value surface at t_bar as CSV.
    Price {
        #[arg(long, value_enum, default_value = "european")]
        style: StyleArg,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Terminal prices of the logistic-increment paths as CSV.
    Simulate {
        #[command(flatten)]
        ov: Overrides,
    },
    /// Build and certify the block-encoding of I + M.
    VerifyBe {
        #[command(flatten)]
        ov: Overrides,
    },
    /// Prepare the value state by QSVT and compare with the classical surface.
    VerifyQsvt {
        #[command(flatten)]
        ov: Overrides,
    },
    /// Per-branch lookup (k, price, value, error) as CSV.
    Assemble {
        #[arg(long, value_enum, default_value = "exact")]
        mode: PcaArg,
        #[arg(long)]
        n_trotter: Option<usize>,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Value-at-risk report as JSON.
    Var {
        #[arg(long, value_enum, default_value = "quantum-exact")]
        mode: MethodArg,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Conditional value-at-risk report as JSON.
    Cvar {
        #[arg(long, value_enum, default_value = "quantum-exact")]
        mode: MethodArg,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Full pipeline with classical oracle and resource tally.
    Run {
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Copy-count curve for the amplitude-maximum problem as CSV.
    Nogo {
        #[arg(long, default_value_t = 256)]
        max_d: usize,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "analytic")]
        convention: ConventionArg,
    },
}

fn load_config(path: Option<&PathBuf>, ov: &Overrides) -> Result<RunConfig> {
    let mut c = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| QvarError::InvalidParam(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = ov.n {
        c.grid.n = n;
    }
    if let Some(l) = ov.paths {
        c.paths = l;
    }
    if let Some(m) = ov.bits {
        c.m = m;
    }
    if let Some(q) = ov.level {
        c.q = q;
    }
    if let Some(s) = ov.seed {
        c.seed = s;
    }
    if let Some(s0) = ov.s0 {
        c.s0 = s0;
    }
    if let Some(t) = ov.t_bar {
        c.market.t_bar = t;
    }
    Ok(c)
}

fn grid_of(c: &RunConfig) -> Result<PriceGrid> {
    build_grid(c.grid.s_min, c.grid.s_max, c.grid.n, c.grid.spacing)
}

fn json_text(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn method(m: MethodArg) -> RiskMethod {
    match m {
        MethodArg::Classical => RiskMethod::Classical,
        MethodArg::QuantumExact => RiskMethod::QuantumExact,
        MethodArg::QuantumSampled => RiskMethod::QuantumSampled,
    }
}

fn execute(cli: Cli) -> Result<String> {
    let cfg = cli.config.as_ref();
    match cli.cmd {
        Cmd::Price { style, ov } => {
            let c = load_config(cfg, &ov)?;
            c.market.validate()?;
            let grid = grid_of(&c)?;
            let surface = if matches!(style, StyleArg::American) {
                price_american(&c.market, &grid, &c.payoff)?
            } else {
                price_european(&c.market, &grid, &c.payoff)?
            };
            let mut s = String::from("S,V\n");
            for (x, v) in grid.nodes.iter().zip(&surface.values) {
                s.push_str(&format!("{x},{v}\n"));
            }
            Ok(s)
        }
        Cmd::Simulate { ov } => {
            let c = load_config(cfg, &ov)?;
            c.market.validate()?;
            let paths = simulate_paths(&c.market, c.s0, c.paths, c.price_code()?)?;
            let mut s = String::from("k,code,price\n");
            for (k, (code, p)) in paths.codes.iter().zip(&paths.prices).enumerate() {
                s.push_str(&format!("{},{code},{p}\n", k + 1));
            }
            Ok(s)
        }
        Cmd::VerifyBe { ov } => {
            let c = load_config(cfg, &ov)?;
            c.market.validate()?;
            let grid = grid_of(&c)?;
            let m = assemble_operator(&c.market, &grid)?.plus_identity();
            let be = assemble_block_encoding(&m)?;
            Ok(json_text(&json!({
                "n": be.n,
                "ancillas": be.a,
                "gamma": be.gamma,
                "block_error": verify_block_encoding(&be, &m),
                "unitarity_error": real_unitarity_error(&be.u),
            })))
        }
        Cmd::VerifyQsvt { ov } => {
            let c = load_config(cfg, &ov)?;
            c.market.validate()?;
            let grid = grid_of(&c)?;
            let payoff = payoff_vector(&c.payoff, &grid);
            let vs = prepare_value_state(
                &payoff,
                &c.market,
                &grid,
                c.eps1,
                PrepareOptions { degree_cap: c.degree_cap, ..Default::default() },
            )?;
            let surface = price_european(&c.market, &grid, &c.payoff)?;
            let norm = surface.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let l2 = vs
                .state
                .amplitudes
                .iter()
                .zip(&surface.values)
                .map(|(a, v)| (a - v / norm).norm_sqr())
                .sum::<f64>()
                .sqrt();
            Ok(json_text(&json!({
                "stages": vs.stages,
                "stage_degree": vs.stage_degree,
                "total_degree": vs.total_degree,
                "norm": vs.norm,
                "condition": vs.condition,
                "success_probability": vs.success_probability,
                "phase_residual": vs.phase_residual,
                "l2_distance": l2,
            })))
        }
        Cmd::Assemble { mode, n_trotter, ov } => {
            let mut c = load_config(cfg, &ov)?;
            c.pca_mode = match mode {
                PcaArg::Exact => PcaMode::ExactExponential,
                PcaArg::Trotter => PcaMode::Trotterized,
            };
            if let Some(t) = n_trotter {
                c.n_trotter = t;
            }
            c.method = RiskMethod::Classical;
            Ok(branches_csv(&run_pipeline(&c)?.branches))
        }
        Cmd::Var { mode, ov } | Cmd::Cvar { mode, ov } => {
            let mut c = load_config(cfg, &ov)?;
            c.method = method(mode);
            let out = run_pipeline(&c)?;
            serde_json::to_string_pretty(&out.report).map_err(|e| QvarError::Numerical(e.to_string()))
        }
        Cmd::Run { format, out, ov } => {
            let c = load_config(cfg, &ov)?;
            let output = run_pipeline(&c)?;
            let fmt = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            let path = out.as_ref().map(|p| p.to_string_lossy().into_owned()).or(c.report_path.clone());
            let text = emit_report(&output, fmt, path.as_deref())?;
            if let Some(b) = &c.branches_path {
                emit_report(&output, ReportFormat::Csv, Some(b))?;
            }
            Ok(text)
        }
        Cmd::Nogo { max_d, threshold, convention } => {
            let conv = match convention {
                ConventionArg::Analytic => GapConvention::Analytic,
                ConventionArg::Explicit => GapConvention::Explicit,
            };
            let curve = copy_curve(max_d, threshold, conv)?;
            let mut s = String::from("d,min_copies\n");
            for (d, m) in &curve.points {
                s.push_str(&format!("{d},{m}\n"));
            }
            eprintln!("slope {:.4} intercept {:.4}", curve.slope, curve.intercept);
            Ok(s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(mut text) => {
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
