//! Command-line front end. Results go to stdout (or the requested file),
//! diagnostics to stderr. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibration::{
    build_count_table, calibrate, compare_with_baseline, LongitudinalManifest, Mode,
};
use crate::counting::{direct_threshold_count, sweep, Grid, Method};
use crate::error::{Error, Result};
use crate::filtration::{compute_persistence, count_from_diagram};
use crate::oracle::{
    generate_longitudinal, LesionSchedule, LongitudinalSpec, PhantomSpec, Placement, SpeckleMode,
    MANIFEST_FILE,
};
use crate::volume_io::{crop_to_foreground, downsample, load_volume, write_raw_json, Volume};

#[derive(Debug, Parser)]
#[command(
    name = "lesion-count",
    version,
    about = "Count lesions in 3D probability maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count lesions in one volume.
    Count(CountArgs),
    /// Write the persistence diagram of one volume as CSV.
    Diagram(DiagramArgs),
    /// Count along a threshold grid.
    Sweep(SweepArgs),
    /// Select a persistence threshold from a longitudinal manifest.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic longitudinal dataset.
    Phantom(PhantomArgs),
    /// Crop and downsample a volume.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Persistence,
    #[value(alias = "direct_threshold")]
    Threshold,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Persistence => Method::Persistence,
            MethodArg::Threshold => Method::DirectThreshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Supervised,
    Unsupervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Separated,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeckleArg {
    Dropout,
    Lift,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Crop to the foreground bounding box (plus one voxel) first.
    #[arg(long)]
    pub crop: bool,
    /// Foreground cutoff used by --crop.
    #[arg(long, default_value_t = 0.0)]
    pub crop_eps: f32,
    /// Block-average by this factor along every axis.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub downsample: u32,
}

impl PrepArgs {
    fn apply(&self, vol: Volume) -> Volume {
        let vol = if self.crop {
            crop_to_foreground(&vol, self.crop_eps)
        } else {
            vol
        };
        downsample(&vol, self.downsample as usize)
    }
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Persistence threshold (persistence method).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Probability threshold (threshold method).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Voxels with p <= mask-eps are background.
    #[arg(long, default_value_t = 0.0)]
    pub mask_eps: f32,
    #[command(flatten)]
    pub prep: PrepArgs,
}

#[derive(Debug, Args)]
pub struct DiagramArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub mask_eps: f32,
    #[command(flatten)]
    pub prep: PrepArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// A:B:STEP, inclusive; defaults to 0:0.04:0.004 (persistence) or
    /// 0.1:1:0.1 (threshold).
    #[arg(long)]
    pub grid: Option<Grid>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub mask_eps: f32,
    #[command(flatten)]
    pub prep: PrepArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Persistence grid, A:B:STEP; defaults to 0:0.04:0.004.
    #[arg(long)]
    pub grid: Option<Grid>,
    /// Probability grid for --compare-baseline; defaults to 0.1:1:0.1.
    #[arg(long)]
    pub baseline_grid: Option<Grid>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also calibrate direct thresholding on the same folds and compare.
    #[arg(long)]
    pub compare_baseline: bool,
    /// Volumes processed concurrently; all cores when omitted.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub mask_eps: f32,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    #[arg(long, default_value_t = 5)]
    pub timepoints: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Volume size as X,Y,Z.
    #[arg(long, value_parser = parse_dims, default_value = "40,80,40")]
    pub dims: [usize; 3],
    /// Lesion count per timepoint as a comma list, shared by all subjects.
    /// Overrides --min-lesions / --max-lesions.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    pub min_lesions: usize,
    #[arg(long, default_value_t = 20)]
    pub max_lesions: usize,
    #[arg(long, default_value_t = 2.0)]
    pub radius_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub radius_max: f64,
    #[arg(long, default_value_t = 40)]
    pub speckles: usize,
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f32,
    #[arg(long, value_enum, default_value_t = SpeckleArg::Dropout)]
    pub speckle_mode: SpeckleArg,
    #[arg(long, value_enum, default_value_t = PlacementArg::Clustered)]
    pub placement: PlacementArg,
    /// Chance that a clustered lesion is placed next to an earlier one.
    #[arg(long, default_value_t = 0.6)]
    pub cluster_prob: f64,
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        &[x, y, z] if x > 0 && y > 0 && z > 0 => Ok([x, y, z]),
        _ => Err(format!("expected three positive sizes X,Y,Z, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// raw_json destination (.json sidecar; data goes next to it as .raw).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub crop_eps: f32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub downsample: u32,
}

/// Failure of one invocation, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn json_line(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn emit(text: &str, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match dest {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}

fn load(path: &Path, prep: &PrepArgs) -> Result<Volume> {
    Ok(prep.apply(load_volume(path)?))
}

fn check_mask_eps(eps: f32) -> Result<(), CliError> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(usage(format!("--mask-eps {eps} must lie in [0, 1)")))
    }
}

#[derive(Serialize)]
struct CountOutput {
    count: usize,
    method: Method,
    threshold: f64,
    dims: [usize; 3],
    voxel_size_mm: [f32; 3],
}

fn cmd_count(a: &CountArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_mask_eps(a.mask_eps)?;
    let threshold = match (a.method, a.theta, a.tau) {
        (MethodArg::Persistence, Some(t), None) if t >= 0.0 => t,
        (MethodArg::Persistence, Some(t), None) => {
            return Err(usage(format!("--theta {t} is negative")))
        }
        (MethodArg::Persistence, _, _) => {
            return Err(usage("the persistence method takes --theta and no --tau"))
        }
        (MethodArg::Threshold, None, Some(t)) => t,
        (MethodArg::Threshold, _, _) => {
            return Err(usage("the threshold method takes --tau and no --theta"))
        }
    };
    let vol = load(&a.input, &a.prep)?;
    let count = match a.method {
        MethodArg::Persistence => {
            count_from_diagram(&compute_persistence(&vol, a.mask_eps), threshold)
        }
        MethodArg::Threshold => direct_threshold_count(&vol, threshold),
    };
    let report = CountOutput {
        count,
        method: a.method.into(),
        threshold,
        dims: vol.dims(),
        voxel_size_mm: vol.voxel_size_mm(),
    };
    emit(&json_line(&report), None, out)
}

fn cmd_diagram(a: &DiagramArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_mask_eps(a.mask_eps)?;
    let vol = load(&a.input, &a.prep)?;
    emit(
        &compute_persistence(&vol, a.mask_eps).to_csv(),
        a.output.as_deref(),
        out,
    )
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_mask_eps(a.mask_eps)?;
    let method: Method = a.method.into();
    let grid = a.grid.clone().unwrap_or_else(|| method.default_grid());
    if method == Method::Persistence && grid.values()[0] < 0.0 {
        return Err(usage("persistence thresholds must be non-negative"));
    }
    let vol = load(&a.input, &a.prep)?;
    emit(
        &sweep(&vol, method, &grid, a.mask_eps).to_csv(),
        a.output.as_deref(),
        out,
    )
}

fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_mask_eps(a.mask_eps)?;
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let grid = a.grid.clone().unwrap_or_else(Grid::default_persistence);
    if grid.values()[0] < 0.0 {
        return Err(usage("persistence thresholds must be non-negative"));
    }
    let mode = match a.mode {
        ModeArg::Supervised => Mode::Supervised,
        ModeArg::Unsupervised => Mode::Unsupervised,
    };
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let manifest = LongitudinalManifest::load(&a.manifest)?.resolved(base);
    let gt = if mode == Mode::Supervised || manifest.has_ground_truth() {
        Some(manifest.ground_truth()?)
    } else {
        None
    };
    let jobs = a.jobs.map(|j| j as usize);
    eprintln!(
        "calibrate: {} subjects, {} mode, {} grid points",
        manifest.subjects.len(),
        mode.as_str(),
        grid.len()
    );

    let table = build_count_table(&manifest, &grid, Method::Persistence, a.mask_eps, jobs)?;
    let (mut report, errors) = calibrate(&table, gt.as_deref(), mode, a.folds, a.seed)?;
    if a.compare_baseline {
        let bgrid = a.baseline_grid.clone().unwrap_or_else(Grid::default_direct);
        let btable =
            build_count_table(&manifest, &bgrid, Method::DirectThreshold, a.mask_eps, jobs)?;
        let (breport, berrors) = calibrate(&btable, gt.as_deref(), mode, a.folds, a.seed)?;
        report = compare_with_baseline(report, &errors, breport, &berrors)?;
    }
    emit(&json_line(&report), a.output.as_deref(), out)
}

#[derive(Serialize)]
struct PhantomOutput {
    manifest: PathBuf,
    subjects: usize,
    volumes: usize,
}

fn cmd_phantom(a: &PhantomArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.timepoints < 2 {
        return Err(usage("--timepoints must be at least 2"));
    }
    let lesion_schedule = match &a.schedule {
        Some(s) => LesionSchedule::Fixed(s.clone()),
        None => LesionSchedule::Random {
            min: a.min_lesions,
            max: a.max_lesions,
        },
    };
    let placement = match a.placement {
        PlacementArg::Separated => Placement::Separated,
        PlacementArg::Clustered => Placement::Clustered {
            probability: a.cluster_prob,
        },
    };
    let spec = LongitudinalSpec {
        n_subjects: a.subjects,
        timepoints: a.timepoints,
        lesion_schedule,
        phantom: PhantomSpec {
            dims: a.dims,
            n_lesions: 0,
            lesion_radius_range: (a.radius_min, a.radius_max),
            noise_speckles: a.speckles,
            noise_amplitude: a.amplitude,
            speckle_mode: match a.speckle_mode {
                SpeckleArg::Dropout => SpeckleMode::Dropout,
                SpeckleArg::Lift => SpeckleMode::Lift,
            },
            placement,
            seed: a.seed,
        },
        seed: a.seed,
    };
    let manifest = generate_longitudinal(&spec, &a.out).map_err(|e| match e {
        Error::InvalidArgument(m) => usage(m),
        e => CliError::Runtime(e),
    })?;
    let report = PhantomOutput {
        manifest: a.out.join(MANIFEST_FILE),
        subjects: manifest.subjects.len(),
        volumes: manifest.subjects.iter().map(|s| s.timepoints.len()).sum(),
    };
    emit(&json_line(&report), None, out)
}

#[derive(Serialize)]
struct PreprocessOutput {
    output: PathBuf,
    dims: [usize; 3],
    voxel_size_mm: [f32; 3],
}

fn cmd_preprocess(a: &PreprocessArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let prep = PrepArgs {
        crop: true,
        crop_eps: a.crop_eps,
        downsample: a.downsample,
    };
    let vol = load(&a.input, &prep)?;
    write_raw_json(&vol, &a.output)?;
    let report = PreprocessOutput {
        output: a.output.clone(),
        dims: vol.dims(),
        voxel_size_mm: vol.voxel_size_mm(),
    };
    emit(&json_line(&report), None, out)
}

/// Runs one parsed command, writing its results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Count(a) => cmd_count(a, out),
        Command::Diagram(a) => cmd_diagram(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Phantom(a) => cmd_phantom(a, out),
        Command::Preprocess(a) => cmd_preprocess(a, out),
    }
}

/// Parses the process arguments, runs the command and reports failures on
/// stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
