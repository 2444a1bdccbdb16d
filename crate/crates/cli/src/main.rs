//! Command-line interface for displacement-field folding analysis.
//!
//! Subcommands: `check` (strict criterion verdict, exit 2 on failure),
//! `analyze` (counts and NDA/NDV with a machine-parsable summary line),
//! `map` (dense determinant or severity volumes), and `synth` (generate
//! test fields). All summary output is space-separated key=value pairs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use digidiff::io::{self, DisplacementUnits, ReportFormat};
use digidiff::{
    analyze_field, is_digital_diffeomorphism, jacobian_map, DiffeoReport, DisplacementField,
    GridDims, GridPoint, JacobianVariant, SynthKind, SynthSpec, Violation, VoxelMask,
};

#[derive(Parser)]
#[command(
    name = "digidiff",
    version,
    about = "Folding and digital-diffeomorphism analysis of dense displacement fields"
)]
struct Cli {
    /// Worker threads for dense evaluation (0 = all cores). Results are
    /// byte-identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify that every defined determinant is positive.
    ///
    /// Exit status: 0 when the field passes, 2 when it does not, 1 on error.
    Check(CheckArgs),
    /// Compute non-positive counts and NDA/NDV, print a one-line summary,
    /// and optionally write a report file.
    Analyze(AnalyzeArgs),
    /// Write a dense determinant-variant map or the per-point severity map.
    Map(MapArgs),
    /// Generate a synthetic displacement field.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitsArg {
    /// Displacements are voxel offsets.
    Voxel,
    /// Displacements are physical offsets; divided by voxel spacing on load.
    Physical,
}

impl From<UnitsArg> for DisplacementUnits {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Voxel => DisplacementUnits::Voxel,
            UnitsArg::Physical => DisplacementUnits::Physical,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct CheckArgs {
    /// Displacement field (.nii, .nii.gz, or .npy).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "voxel")]
    units: UnitsArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Displacement field (.nii, .nii.gz, or .npy).
    input: PathBuf,
    /// Voxel mask restricting counts and measures (nonzero = included).
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "voxel")]
    units: UnitsArg,
    /// Report file to write.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Also write the per-point severity map volume.
    #[arg(long)]
    severity: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    /// Displacement field (.nii, .nii.gz, or .npy).
    input: PathBuf,
    /// One of: central, star1, star2, corner:SIGNS (e.g. corner:-+- ), severity.
    #[arg(long)]
    variant: String,
    /// Output volume (.nii or .nii.gz).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "voxel")]
    units: UnitsArg,
    /// Mask applied when computing the severity map.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Identity,
    UniformScale,
    Linear,
    Reflection,
    SinglePoint,
    RandomSmooth,
}

#[derive(Args)]
struct SynthArgs {
    /// Transformation kind.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Grid extents, e.g. 5,5 or 4,4,4.
    #[arg(long)]
    dims: String,
    /// Voxel spacings (defaults to 1 per axis).
    #[arg(long)]
    spacing: Option<String>,
    /// Output field (.nii, .nii.gz, or .npy).
    #[arg(long)]
    out: PathBuf,
    /// Scale factor for uniform-scale.
    #[arg(long)]
    scale: Option<f64>,
    /// Row-major rank x rank matrix entries for linear, e.g. 2,0,0,2.
    #[arg(long)]
    matrix: Option<String>,
    /// Mirrored axis for reflection (0 = x).
    #[arg(long, default_value_t = 0)]
    axis: usize,
    /// Displaced grid point for single-point, e.g. 2,2.
    #[arg(long)]
    point: Option<String>,
    /// Displacement vector for single-point, e.g. 1.5,1.5.
    #[arg(long)]
    disp: Option<String>,
    /// RNG seed for random-smooth.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Peak displacement magnitude for random-smooth.
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Box smoothing radius for random-smooth.
    #[arg(long, default_value_t = 2)]
    radius: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let body = || match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Map(args) => cmd_map(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if cli.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .context("building thread pool")?;
        pool.install(body)
    } else {
        body()
    }
}

fn load_field(path: &Path, units: UnitsArg) -> Result<DisplacementField> {
    io::read_field(path, units.into()).with_context(|| format!("reading field {}", path.display()))
}

fn load_mask(path: &Option<PathBuf>) -> Result<Option<VoxelMask>> {
    match path {
        Some(p) => Ok(Some(
            io::read_mask(p).with_context(|| format!("reading mask {}", p.display()))?,
        )),
        None => Ok(None),
    }
}

fn violation_fields(out: &mut String, violation: &Violation, rank: usize) {
    let point: Vec<String> = violation.point.coords()[..rank]
        .iter()
        .map(|c| c.to_string())
        .collect();
    let _ = write!(
        out,
        " first_violation_point={} first_violation_variant={} first_violation_value={}",
        point.join(";"),
        violation.variant,
        violation.value
    );
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let field = load_field(&args.input, args.units)?;
    let verdict = is_digital_diffeomorphism(&field);
    let mut line = format!("verdict={}", if verdict.is_diffeomorphic { "pass" } else { "fail" });
    if let Some(v) = &verdict.first_violation {
        violation_fields(&mut line, v, field.rank());
    }
    println!("{line}");
    Ok(ExitCode::from(if verdict.is_diffeomorphic { 0 } else { 2 }))
}

fn summary_line(report: &DiffeoReport) -> String {
    let mut line = format!(
        "kind={} rank={} considered={} partial={} central_nonpositive={} central_pct={} \
         any_nonpositive={} any_pct={} measure={} measure_physical={} measure_pct={} mask={}",
        report.measure_kind.as_str(),
        report.rank,
        report.considered_points,
        report.partially_defined_points,
        report.central_nonpositive_count,
        report.central_nonpositive_pct,
        report.any_nonpositive_count,
        report.any_nonpositive_pct,
        report.measure_voxel,
        report.measure_physical,
        report.measure_pct,
        report.mask_applied
    );
    if let Some(v) = &report.first_violation {
        violation_fields(&mut line, v, report.rank);
    }
    line
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let field = load_field(&args.input, args.units)?;
    let mask = load_mask(&args.mask)?;
    let (report, severity) = analyze_field(&field, mask.as_ref())?;
    if let Some(path) = &args.report {
        let format = match args.format {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        };
        io::write_report(&report, path, format)
            .with_context(|| format!("writing report {}", path.display()))?;
    }
    if let Some(path) = &args.severity {
        io::write_map(&severity, path)
            .with_context(|| format!("writing severity map {}", path.display()))?;
    }
    println!("{}", summary_line(&report));
    Ok(ExitCode::SUCCESS)
}

fn cmd_map(args: MapArgs) -> Result<ExitCode> {
    let field = load_field(&args.input, args.units)?;
    let map = if args.variant == "severity" {
        let mask = load_mask(&args.mask)?;
        analyze_field(&field, mask.as_ref())?.1
    } else {
        let variant: JacobianVariant = args
            .variant
            .parse()
            .with_context(|| format!("parsing variant {:?}", args.variant))?;
        jacobian_map(&field, variant)?
    };
    io::write_map(&map, &args.out)
        .with_context(|| format!("writing map {}", args.out.display()))?;
    println!(
        "map={} out={} defined={} points={}",
        args.variant,
        args.out.display(),
        map.defined_count(),
        map.dims().num_points()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("cannot parse {what} entry {part:?}"))
        })
        .collect()
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let extents: Vec<usize> = parse_list(&args.dims, "--dims")?;
    let spacings: Vec<f64> = match &args.spacing {
        Some(s) => parse_list(s, "--spacing")?,
        None => vec![1.0; extents.len()],
    };
    let dims = GridDims::new(&extents, &spacings)?;
    let rank = dims.rank();

    let kind = match args.kind {
        KindArg::Identity => SynthKind::Identity,
        KindArg::UniformScale => SynthKind::UniformScale {
            factor: args.scale.context("--scale is required for uniform-scale")?,
        },
        KindArg::Linear => SynthKind::Linear {
            matrix: parse_list(
                args.matrix
                    .as_deref()
                    .context("--matrix is required for linear")?,
                "--matrix",
            )?,
        },
        KindArg::Reflection => SynthKind::Reflection { axis: args.axis },
        KindArg::SinglePoint => {
            let coords: Vec<usize> = parse_list(
                args.point
                    .as_deref()
                    .context("--point is required for single-point")?,
                "--point",
            )?;
            if coords.len() != rank {
                bail!("--point needs {rank} indices");
            }
            let point = if rank == 2 {
                GridPoint::d2(coords[0], coords[1])
            } else {
                GridPoint::d3(coords[0], coords[1], coords[2])
            };
            SynthKind::SinglePoint {
                point,
                displacement: parse_list(
                    args.disp
                        .as_deref()
                        .context("--disp is required for single-point")?,
                    "--disp",
                )?,
            }
        }
        KindArg::RandomSmooth => SynthKind::RandomSmooth {
            seed: args.seed,
            amplitude: args.amplitude,
            radius: args.radius,
        },
    };

    let field = digidiff::generate(&SynthSpec { kind, dims })?;
    io::write_field(&field, &args.out)
        .with_context(|| format!("writing field {}", args.out.display()))?;
    println!(
        "synth=ok out={} rank={} points={}",
        args.out.display(),
        field.rank(),
        field.dims().num_points()
    );
    Ok(ExitCode::SUCCESS)
}
