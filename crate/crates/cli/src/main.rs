//! `lgreen`: steady-state sweeps, pole maps, figure data and oracle checks for
//! the driven two-level ensemble.

mod commands;
mod grid;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lindblad_green::dicke::ModelParams;
use lindblad_green::panels::{
    panel_a, panel_c, PANEL_AB_N, PANEL_C_BIG_GAMMA2_REF, PANEL_C_SIZES, PANEL_D_N,
};

use commands::{PoleMethod, SweepMethod};
use grid::{parse_sizes, Span};
use verify::Suite;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// Numerical or I/O failure; exit code 2.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "lgreen", version, about = "Spectral Green-function steady states of a driven spin ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized polarization, self-correlation and active polarization over ζ.
    Sweep {
        /// Model parameters as JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "analytic")]
        method: SweepMethod,
        /// `min:max:count[:log]` in rad/s.
        #[arg(long, default_value = "-3e6:3e6:601", allow_hyphen_values = true)]
        zeta_span: Span,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite poles of the driven Green function.
    Poles {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "analytic")]
        method: PoleMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Data behind one panel of the figure, with the panel's parameters as defaults.
    Figure {
        #[arg(long, value_enum)]
        id: FigureId,
        /// Overrides the panel's model parameters.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Passive ensemble sizes, comma separated (`1e3,1e4`).
        #[arg(long)]
        n: Option<String>,
        /// Steady-state method for panel 1a.
        #[arg(long, value_enum, default_value = "analytic")]
        method: SweepMethod,
        #[arg(long, default_value = "-3e6:3e6:601", allow_hyphen_values = true)]
        zeta_span: Span,
        #[arg(long, default_value = "1e-2:10:301:log")]
        xi_span: Span,
        #[arg(long, default_value = "1e2:1e10:81:log")]
        gamma_span: Span,
        /// Active dephasing at unit concentration for panel 1c, rad/s.
        #[arg(long, default_value_t = PANEL_C_BIG_GAMMA2_REF)]
        big_gamma2_ref: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the oracle checks and prints a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Model parameters; panel 1a rates when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FigureId {
    #[value(name = "1a")]
    A,
    #[value(name = "1b")]
    B,
    #[value(name = "1c")]
    C,
    #[value(name = "1d")]
    D,
}

fn load_params(path: &Path) -> Result<ModelParams, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let params: ModelParams = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid model configuration {}: {e}", path.display())))?;
    params.validate().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(params)
}

fn single_size(n: Option<&str>) -> Result<Option<usize>, CliError> {
    let Some(s) = n else { return Ok(None) };
    match parse_sizes(s).map_err(CliError::Usage)?.as_slice() {
        [n] => Ok(Some(*n)),
        _ => Err(CliError::Usage("this panel takes a single --n".into())),
    }
}

/// Returns the exit code on success; verification failures yield 1.
fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Sweep { model, method, zeta_span, out } => {
            let params = load_params(&model)?;
            output::emit(&commands::sweep("sweep", &params, method, zeta_span)?, out.as_deref())?;
        }
        Command::Poles { model, method, out } => {
            let params = load_params(&model)?;
            output::emit(&commands::poles("poles", &params, method)?, out.as_deref())?;
        }
        Command::Figure { id, model, n, method, zeta_span, xi_span, gamma_span, big_gamma2_ref, out } => {
            let custom = model.as_deref().map(load_params).transpose()?;
            let text = match id {
                FigureId::A | FigureId::B => {
                    let mut p = custom.unwrap_or_else(|| panel_a(PANEL_AB_N));
                    if let Some(size) = single_size(n.as_deref())? {
                        p.n_passive = size;
                        p.couplings = None;
                    }
                    if id == FigureId::A {
                        commands::sweep("figure-1a", &p, method, zeta_span)?
                    } else {
                        commands::poles("figure-1b", &p, PoleMethod::Analytic)?
                    }
                }
                FigureId::C => {
                    let sizes = match n.as_deref() {
                        Some(s) => parse_sizes(s).map_err(CliError::Usage)?,
                        None => PANEL_C_SIZES.to_vec(),
                    };
                    let base = custom.unwrap_or_else(|| panel_c(sizes[0]));
                    commands::concentration("figure-1c", &base, &sizes, xi_span, big_gamma2_ref)?
                }
                FigureId::D => {
                    let size = single_size(n.as_deref())?
                        .or(custom.as_ref().map(|p| p.n_passive))
                        .unwrap_or(PANEL_D_N);
                    let base = custom.unwrap_or_else(|| panel_a(size));
                    commands::relaxation("figure-1d", &base, size, gamma_span)?
                }
            };
            output::emit(&text, out.as_deref())?;
        }
        Command::Verify { suite, n, model, out } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let custom = model.as_deref().map(load_params).transpose()?;
            let report = verify::run(suite, custom.as_ref(), n).map_err(|e| CliError::Runtime(e.to_string()))?;
            let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
            text.push('\n');
            output::emit(&text, out.as_deref())?;
            return Ok(if report.passed { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lgreen: {e}");
            ExitCode::from(2)
        }
    }
}
