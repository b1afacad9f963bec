//! The `volseg` command line: segment, map-voi, evaluate, stats and
//! phantom subcommands over the core library.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use volseg_core::pipeline::ParamOverrides;

pub use error::{CliError, CliResult, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "volseg", version, about = "Semi-automatic fat segmentation and evaluation for volumetric MRI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold the fat-only volume inside the mapped body VOI.
    Segment(SegmentArgs),
    /// Resample a body mask into a target grid and derive its VOI box.
    MapVoi(MapVoiArgs),
    /// Compute Dice, Hausdorff, ASSD, VD and RVD per case into a CSV.
    Evaluate(EvaluateArgs),
    /// Summarize metrics CSVs and compare two of them with t-tests.
    Stats(StatsArgs),
    /// Generate a synthetic TRUFI/Dixon case with ground truth.
    Phantom(PhantomArgs),
}

/// Pipeline flags; each has a config-file key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// Intensity threshold, or `otsu`.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    /// Smallest connected component kept, in voxels [default: 50].
    #[arg(long, value_name = "VOXELS")]
    pub min_component: Option<String>,
    /// Voxel adjacency for component labeling: 6, 18 or 26 [default: 26].
    #[arg(long)]
    pub connectivity: Option<String>,
    /// VOI margin around the mapped body bounding box [default: 5].
    #[arg(long, value_name = "MM")]
    pub voi_margin_mm: Option<String>,
    /// Morphology step `open:R` or `close:R` (radius in mm); repeatable, applied in order.
    #[arg(long = "morph", value_name = "OP:MM")]
    pub morph: Vec<String>,
    /// Restrict to the VOI box (true/false) [default: true].
    #[arg(long, value_name = "BOOL")]
    pub voi_box: Option<String>,
    /// AND the result with the mapped body silhouette (true/false) [default: true].
    #[arg(long, value_name = "BOOL")]
    pub silhouette: Option<String>,
    /// Dilation of the silhouette before the AND [default: 2].
    #[arg(long, value_name = "MM")]
    pub silhouette_margin_mm: Option<String>,
    /// Explicit VOI `x0,y0,z0,x1,y1,z1` (inclusive voxel indices) replacing the computed box.
    #[arg(long)]
    pub voi: Option<String>,
}

impl PipelineFlags {
    pub fn overrides(&self) -> CliResult<ParamOverrides> {
        let mut o = ParamOverrides::default();
        let scalar = [
            ("threshold", &self.threshold),
            ("min-component", &self.min_component),
            ("connectivity", &self.connectivity),
            ("voi-margin-mm", &self.voi_margin_mm),
            ("voi-box", &self.voi_box),
            ("silhouette", &self.silhouette),
            ("silhouette-margin-mm", &self.silhouette_margin_mm),
            ("voi", &self.voi),
        ];
        for (key, value) in scalar {
            if let Some(v) = value {
                o.apply(key, v)?;
            }
        }
        for m in &self.morph {
            o.apply("morph", m)?;
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    /// Fat-only Dixon volume.
    #[arg(long)]
    pub fat: PathBuf,
    /// Body mask in its own (structural scan) space.
    #[arg(long)]
    pub body_mask: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    /// Config file of `key=value` lines [env: VOLSEG_CONFIG].
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MapVoiArgs {
    /// Body mask in its own space.
    #[arg(long)]
    pub body_mask: PathBuf,
    /// Volume whose grid the mask is mapped into.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Margin around the mapped bounding box [default: 5, or voi-margin-mm from config].
    #[arg(long, value_name = "MM")]
    pub margin_mm: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Predicted mask (single-case mode).
    #[arg(long, requires_all = ["gt", "body"], conflicts_with = "cases")]
    pub pred: Option<PathBuf>,
    /// Reference mask (single-case mode).
    #[arg(long, requires = "pred")]
    pub gt: Option<PathBuf>,
    /// Body mask for RVD (single-case mode).
    #[arg(long, requires = "pred")]
    pub body: Option<PathBuf>,
    #[arg(long, default_value = "case")]
    pub case_id: String,
    #[arg(long)]
    pub correction_time_s: Option<u64>,
    /// CSV with columns case_id,pred,gt,body[,correction_time_s]; relative paths resolve against its directory.
    #[arg(long, required_unless_present = "pred")]
    pub cases: Option<PathBuf>,
    /// Metrics CSV output [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SummaryFormat {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// One metrics CSV to summarize, or two to compare.
    #[arg(required = true, num_args = 1..=2)]
    pub inputs: Vec<PathBuf>,
    /// Paired t-test matched on case_id (the default).
    #[arg(long, conflicts_with = "welch")]
    pub paired: bool,
    /// Welch's unequal-variance t-test.
    #[arg(long)]
    pub welch: bool,
    #[arg(long, value_enum, default_value_t = SummaryFormat::Text)]
    pub format: SummaryFormat,
    /// Write t-test JSON here instead of stdout.
    #[arg(long)]
    pub ttest_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Base spec JSON; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Replace an existing output directory's files.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_name = "A,B,C", value_parser = parse_triple)]
    pub semi_axes_mm: Option<[f64; 3]>,
    #[arg(long, value_name = "MM")]
    pub fat_thickness_mm: Option<f64>,
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub trufi_spacing_mm: Option<[f64; 3]>,
    #[arg(long, value_name = "NX,NY,NZ", value_parser = parse_dims)]
    pub trufi_dims: Option<[usize; 3]>,
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub dixon_spacing_mm: Option<[f64; 3]>,
    #[arg(long, value_name = "NX,NY,NZ", value_parser = parse_dims)]
    pub dixon_dims: Option<[usize; 3]>,
    /// Dixon field-of-view offset relative to TRUFI.
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple, allow_hyphen_values = true)]
    pub translation_mm: Option<[f64; 3]>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Number of small artifact blobs inside the body.
    #[arg(long)]
    pub speckles: Option<usize>,
    #[arg(long)]
    pub speckle_voxels: Option<usize>,
    /// Add a maternal fat slab outside the body.
    #[arg(long)]
    pub maternal_slab: bool,
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple, allow_hyphen_values = true)]
    pub slab_offset_mm: Option<[f64; 3]>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("'{p}' is not a valid number"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list(s)
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

/// Parse `args` (including the program name) and run; returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
