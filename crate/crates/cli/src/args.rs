use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "eegunify",
    version,
    about = "Catalogue, clean and unify EEG datasets"
)]
pub struct Cli {
    /// Seed for random sampling and ICA initialisation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for per-file processing [default: available parallelism].
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Print one JSON object per row outcome instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

/// Where the rows come from: a directory to scan or a saved locator.
#[derive(Debug, Clone, Args)]
#[group(id = "origin", required = true, multiple = false)]
pub struct Origin {
    /// Dataset directory to scan (needs --domain-tag).
    #[arg(long, value_name = "DIR")]
    pub dataset_path: Option<PathBuf>,

    /// Locator CSV to load.
    #[arg(long, value_name = "CSV")]
    pub locator: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    #[command(flatten)]
    pub origin: Origin,

    /// Dataset tag. Required with --dataset-path; with --locator only rows
    /// carrying this tag are processed.
    #[arg(long, value_name = "TAG")]
    pub domain_tag: Option<String>,

    #[command(flatten)]
    pub hints: Hints,
}

/// Fallbacks for files that do not declare these themselves (CSV, MAT).
#[derive(Debug, Clone, Default, Args)]
pub struct Hints {
    /// Sampling rate to assume when a scanned file has none.
    #[arg(long, value_name = "HZ")]
    pub sampling_rate: Option<f64>,

    /// Channel names to assume when a scanned file has none.
    #[arg(long, value_name = "NAMES", value_delimiter = ',')]
    pub channel_names: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SaveLocator {
    /// Where to write the updated locator.
    #[arg(long, value_name = "CSV")]
    pub save_locator: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Rawsidecar,
    Edf,
}

impl OutFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutFormat::Rawsidecar => "rawsidecar",
            OutFormat::Edf => "edf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterType {
    Bandpass,
    Lowpass,
    Highpass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IcaMethod {
    Fastica,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompletenessArg {
    Completed,
    Acceptable,
    Unavailable,
}

/// Output directory and container for commands that write new files.
#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output directory; files go to <OUT>/<domain tag>/.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Container for written recordings.
    #[arg(long, value_enum, ignore_case = true, default_value_t = OutFormat::Rawsidecar)]
    pub format: OutFormat,

    /// Where to write the updated locator [default: <OUT>.csv].
    #[arg(long, value_name = "CSV")]
    pub save_locator: Option<PathBuf>,
}

/// Output directory for epoching commands.
#[derive(Debug, Clone, Args)]
pub struct EpochOutput {
    /// Output directory; epoch files go to <OUT>/<domain tag>/.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Also write the (unchanged) locator here.
    #[arg(long, value_name = "CSV")]
    pub save_locator: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a dataset directory into a new locator.
    Scan {
        #[arg(long, value_name = "DIR")]
        dataset_path: PathBuf,
        #[arg(long, value_name = "TAG")]
        domain_tag: String,
        #[command(flatten)]
        hints: Hints,
        /// Locator CSV to write.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },

    /// Combine several locators and scanned directories into one.
    Merge {
        /// Locator CSV to include (repeatable).
        #[arg(long, value_name = "CSV")]
        locator: Vec<PathBuf>,
        /// Directory to scan and include (repeatable, paired with --domain-tag).
        #[arg(long, value_name = "DIR")]
        dataset_path: Vec<PathBuf>,
        /// Tag for each --dataset-path, in the same order.
        #[arg(long, value_name = "TAG")]
        domain_tag: Vec<String>,
        #[command(flatten)]
        hints: Hints,
        /// Merged locator CSV to write.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },

    /// Summarise file types, tags, channel layouts, rates and completeness.
    Report {
        #[command(flatten)]
        source: Source,
        /// Directory for report.json and the pie charts.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Plot per-band amplitude spectra of randomly sampled files.
    VizFreq {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 10)]
        max_sample: usize,
        /// Scale each curve to a maximum of 1.
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Plot channel correlation matrices of randomly sampled files.
    VizCorr {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 16)]
        max_sample: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Keep only rows that pass the given checks.
    SampleFilter {
        #[command(flatten)]
        source: Source,
        /// Required completeness level.
        #[arg(long, value_enum, ignore_case = true)]
        completeness_check: Option<CompletenessArg>,
        /// Row condition such as "Quality Score > 80" (repeatable, all must hold).
        #[arg(long = "where", value_name = "EXPR")]
        conditions: Vec<String>,
        #[command(flatten)]
        save: SaveLocator,
    },

    /// Score every file's signal quality (0-100) into the locator.
    Quality {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        save: SaveLocator,
        /// Also write per-channel sub-scores (0-100) to this CSV.
        #[arg(long, value_name = "CSV")]
        report: Option<PathBuf>,
    },

    /// Zero-phase Butterworth filtering.
    Filter {
        #[command(flatten)]
        source: Source,
        #[arg(long = "type", alias = "filter-type", value_enum, ignore_case = true, default_value_t = FilterType::Bandpass)]
        filter_type: FilterType,
        #[arg(long, value_name = "HZ")]
        l_freq: Option<f64>,
        #[arg(long, value_name = "HZ")]
        h_freq: Option<f64>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[command(flatten)]
        output: Output,
    },

    /// Remove artefact components found by FastICA.
    Ica {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 20)]
        max_components: usize,
        #[arg(long, value_enum, ignore_case = true, default_value_t = IcaMethod::Fastica)]
        method: IcaMethod,
        /// Components with excess kurtosis above this are removed.
        #[arg(long, default_value_t = 5.0)]
        kurtosis_threshold: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[command(flatten)]
        output: Output,
    },

    /// Change the sampling rate.
    Resample {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "HZ")]
        new_sfreq: f64,
        #[command(flatten)]
        output: Output,
    },

    /// Reorder channels, interpolating any that are missing.
    Align {
        #[command(flatten)]
        source: Source,
        /// Target channel order, comma separated.
        #[arg(long, value_name = "NAMES", value_delimiter = ',', required = true)]
        channel_order: Vec<String>,
        #[command(flatten)]
        output: Output,
    },

    /// Infer each channel's unit from its amplitude and record it.
    InferUnits {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        save: SaveLocator,
    },

    /// Read each file's events into the locator.
    Events {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        save: SaveLocator,
    },

    /// Cut one epoch per event.
    EpochByEvent {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "SECONDS")]
        seg_sec: f64,
        #[command(flatten)]
        output: EpochOutput,
    },

    /// Cut fixed-length epochs across each whole recording.
    EpochPretrain {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "SECONDS")]
        seg_sec: f64,
        /// Step between epoch starts [default: --seg-sec].
        #[arg(long, value_name = "SECONDS")]
        stride_sec: Option<f64>,
        #[command(flatten)]
        output: EpochOutput,
    },

    /// Copy every file into another container.
    SaveAs {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },

    /// Ask a language model for channel names and sampling rate.
    LlmSuggest {
        /// Free-text dataset description to read.
        #[arg(
            long,
            value_name = "FILE",
            conflicts_with = "header",
            required_unless_present = "header"
        )]
        description: Option<PathBuf>,
        /// File whose leading bytes are a nonstandard header.
        #[arg(long, value_name = "FILE")]
        header: Option<PathBuf>,
        /// Extra context sent along with --header.
        #[arg(long, default_value = "")]
        context: String,
        /// Write the suggested values into the locator rows.
        #[arg(long, requires = "locator")]
        apply: bool,
        #[command(flatten)]
        target: ApplyTarget,
    },

    /// Run a JSON pipeline of operations.
    Pipeline {
        #[command(flatten)]
        source: Source,
        /// Pipeline file: a JSON list of {"op", "params", "out"} steps.
        #[arg(long, value_name = "JSON")]
        spec: PathBuf,
        #[command(flatten)]
        save: SaveLocator,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ApplyTarget {
    /// Locator whose rows receive the suggestion.
    #[arg(long, value_name = "CSV")]
    pub locator: Option<PathBuf>,
    /// Only rows with this tag receive the suggestion.
    #[arg(long, value_name = "TAG")]
    pub domain_tag: Option<String>,
    /// Where to write the updated locator [default: --locator].
    #[arg(long, value_name = "CSV")]
    pub save_locator: Option<PathBuf>,
}
