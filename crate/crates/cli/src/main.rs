mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momray_core::johnop::{DEFAULT_CHAIN_CAP, DEFAULT_STEP, NEGATIVE_CONTROL_STEP};

use crate::report::Format;

/// Momentum ray transforms of symmetric tensor fields: evaluation, range
/// conditions, reduction, planar moment conditions and operator identities.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on usage
/// or input errors.
#[derive(Debug, Parser)]
#[command(name = "momray", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate I^k f on sampled lines and check parity and lift coherence.
    Transform(TransformArgs),
    /// Check the range conditions: parity and John chains of length m+1.
    RangeCheck(RangeArgs),
    /// Build psi_I from psi^m and check its properties and the recovery of f.
    Reduce(ReduceArgs),
    /// Planar moment conditions, consistency relations and the chi recursion.
    Moments2d(MomentsArgs),
    /// Verify operator identities exactly in the Weyl algebra.
    Identities(IdentityArgs),
    /// Compare FD John residuals of valid and perturbed scalar data.
    NegativeControl(NegativeArgs),
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// JSON field spec.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub field: Option<PathBuf>,
    /// Use a seeded random Gaussian field.
    #[arg(long)]
    pub random: bool,
    /// Tensor rank of the random field.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Dimension of the random field.
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for the random field and the sample points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian terms per component of the random field.
    #[arg(long, default_value_t = 3)]
    pub terms: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Sample points per check.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Pass threshold on relative residuals.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChainMode {
    All,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// Exact derivatives of the transform.
    Exact,
    /// Finite differences of the lifted data.
    Fd,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum, default_value_t = ChainMode::Sample)]
    pub chains: ChainMode,
    /// Chain cap in sample mode.
    #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
    pub max_chains: usize,
    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    pub backend: Backend,
    /// FD step.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Add eps * exp(-|x|^2) (xi_1^2 - xi_2^2) to phi^m (FD backend only).
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Largest moment order r.
    #[arg(long, default_value_t = 3)]
    pub rmax: usize,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long, default_value_t = 3)]
    pub nmax: usize,
    /// Largest number of xi-derivatives in the commutator family.
    #[arg(long, default_value_t = 3)]
    pub kmax: usize,
    /// Largest transport power in the commutator family.
    #[arg(long, default_value_t = 4)]
    pub lmax: u32,
    /// Largest rank in the transport collapse family.
    #[arg(long, default_value_t = 3)]
    pub mmax: usize,
    /// Random polynomials each identity is also applied to.
    #[arg(long, default_value_t = 10)]
    pub oracles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct NegativeArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Perturbation amplitude.
    #[arg(long, default_value_t = 1e-2)]
    pub perturb: f64,
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    #[arg(long, default_value_t = NEGATIVE_CONTROL_STEP)]
    pub step: f64,
    /// Required perturbed/valid residual ratio.
    #[arg(long, default_value_t = 1e3)]
    pub min_ratio: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Transform(a) => commands::transform(a).and_then(|r| emit(r, &a.output)),
        Command::RangeCheck(a) => commands::range_check(a).and_then(|r| emit(r, &a.output)),
        Command::Reduce(a) => commands::reduce(a).and_then(|r| emit(r, &a.output)),
        Command::Moments2d(a) => commands::moments2d(a).and_then(|r| emit(r, &a.output)),
        Command::Identities(a) => {
            commands::identities(a).and_then(|r| r.emit(a.format, a.out.as_deref()).map(|_| r.passed()))
        }
        Command::NegativeControl(a) => {
            commands::negative_control(a).and_then(|r| r.emit(a.format, a.out.as_deref()).map(|_| r.passed()))
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(report: report::Report, output: &OutputArgs) -> anyhow::Result<bool> {
    report.emit(output.format, output.out.as_deref())?;
    Ok(report.passed())
}
