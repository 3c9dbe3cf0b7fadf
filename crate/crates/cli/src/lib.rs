//! `helfrich` command-line driver: subcommands, run configuration, report
//! writing and the acceptance runner.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const THREADS_ENV: &str = "HELFRICH_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Invalid input or configuration.
    Usage(String),
    /// Numerical failure or a check that did not pass.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<helfrich_core::Error> for CliError {
    fn from(e: helfrich_core::Error) -> Self {
        use helfrich_core::Error as E;
        match e {
            E::Numerical { .. } | E::Fit(_) | E::Io(_) => CliError::Failed(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "helfrich", version, about = "Helfrich / locally constrained Willmore energies, residuals and flows")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for reports [default: helfrich-out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build (or load and re-save) a triangle mesh.
    MeshMake(MeshMakeArgs),
    /// Area, volume, Willmore, Helfrich and constrained energies.
    EnergyEval(EvalArgs),
    /// Euler-Lagrange residual per vertex or quadrature node.
    Residual(EvalArgs),
    /// Assembled and finite-difference gradients against directional differences.
    GradientCheck(GradientCheckArgs),
    /// First-variation formulas against Richardson finite differences.
    VariationCheck(VariationCheckArgs),
    /// Pointwise curvature identities on random and chart samples.
    IdentityCheck(IdentityCheckArgs),
    /// Cutoff-weighted integral terms on a parametric surface.
    EstimateReport(EstimateArgs),
    /// Sphere-family residual and energy over a radius range.
    Scan(ScanArgs),
    /// Branch verdict for (l1, l2) with supporting evidence.
    Classify(ClassifyArgs),
    /// Energy or residual descent from a mesh.
    Flow(FlowArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Spontaneous curvature.
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    /// Area weight.
    #[arg(long, allow_negative_numbers = true)]
    pub l1: Option<f64>,
    /// Volume weight.
    #[arg(long, allow_negative_numbers = true)]
    pub l2: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    Icosphere,
    PerturbedSphere,
    Catenoid,
    FlatPatch,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Sphere,
    Plane,
    Catenoid,
    Torus,
    Graph,
}

/// Geometry selection. Shape flags apply to the chosen `--primitive` or
/// `--surface`; unset ones take documented defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct GeometryArgs {
    /// OBJ or OFF mesh file.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["primitive", "surface"])]
    pub mesh: Option<PathBuf>,
    /// Generated mesh primitive.
    #[arg(long, value_enum, conflicts_with = "surface")]
    pub primitive: Option<PrimitiveKind>,
    /// Exact parametric surface.
    #[arg(long, value_enum)]
    pub surface: Option<SurfaceKind>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub neck: Option<f64>,
    #[arg(long)]
    pub half_height: Option<f64>,
    #[arg(long)]
    pub around: Option<usize>,
    #[arg(long)]
    pub along: Option<usize>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub major: Option<f64>,
    #[arg(long)]
    pub minor: Option<f64>,
    #[arg(long)]
    pub half_extent: Option<f64>,
    /// Gaussian width of the graph surface.
    #[arg(long)]
    pub bump_width: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct QuadratureArgs {
    /// Quadrature nodes along u.
    #[arg(long)]
    pub nu: Option<usize>,
    /// Quadrature nodes along v.
    #[arg(long)]
    pub nv: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct MeshMakeArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Output mesh file (.obj or .off) [default: <out>/mesh.obj].
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GradientCheckArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Number of random smooth directions.
    #[arg(long)]
    pub fields: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bound on the assembled-gradient relative error.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct VariationCheckArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    /// Finite-difference step along the normal.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct IdentityCheckArgs {
    /// Random principal-curvature pairs.
    #[arg(long)]
    pub n_random: Option<usize>,
    /// Pairs are drawn from [-range, range]².
    #[arg(long)]
    pub range: Option<f64>,
    /// Chart samples per axis on each surface.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    /// Cutoff centre `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    /// Cutoff radius.
    #[arg(long)]
    pub cutoff_radius: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ScanRangeArgs {
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Number of radii.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub range: ScanRangeArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub range: ScanRangeArgs,
    /// Best-fit radius of a flow endpoint.
    #[arg(long)]
    pub flow_radius: Option<f64>,
    /// Sphericity rms of that endpoint.
    #[arg(long, requires = "flow_radius")]
    pub flow_rms: Option<f64>,
    /// The endpoint's flow reported convergence.
    #[arg(long, requires = "flow_radius")]
    pub flow_converged: bool,
    /// Measured flat-patch residual; measured on a generated patch when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub flat_patch_residual: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowModeArg {
    Residual,
    Energy,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub mode: Option<FlowModeArg>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub initial_step: Option<f64>,
    #[arg(long)]
    pub gradient_tol: Option<f64>,
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Write the final mesh here (.obj or .off).
    #[arg(long, value_name = "PATH")]
    pub save_mesh: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u32>>,
}

/// Parses `HELFRICH_THREADS`; unset means rayon's default.
pub fn thread_limit() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Some(n) = thread_limit()? {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            // the global pool can be built once per process
            log::debug!("thread pool already initialised: {e}");
        }
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match init_threads().and_then(|_| commands::dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
