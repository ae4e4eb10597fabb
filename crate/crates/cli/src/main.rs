//! `patchsynth` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 unsupported capability,
//! 4 patch geometry, 5 solver divergence.

mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;

use patchsynth::Error;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    pub const CAPABILITY: u8 = 3;
    pub const GEOMETRY: u8 = 4;
    pub const DIVERGENCE: u8 = 5;

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: Self::IO,
            message: message.into(),
        }
    }

    /// Grid construction failures are geometry errors whatever their kind.
    pub fn geometry(err: Error) -> Self {
        Self {
            code: Self::GEOMETRY,
            message: err.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Io { .. } | Error::Format { .. } => Self::IO,
            Error::Unsupported(_) => Self::CAPABILITY,
            Error::Coverage { .. } => Self::GEOMETRY,
            Error::Divergence { .. } => Self::DIVERGENCE,
            _ => Self::USAGE,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "patchsynth",
    version,
    about = "Patch-analysis and patch-synthesis image denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Add white Gaussian noise to an image.
    AddNoise(AddNoiseArgs),
    /// Denoise an image with one of the three solvers.
    Denoise(DenoiseArgs),
    /// Draw images from a patch-synthesis prior.
    SamplePrior(SampleArgs),
    /// Print the structure of the patch operators for a geometry.
    #[command(alias = "make-operators-report")]
    ReportOperators(ReportArgs),
    /// Write a synthetic test image.
    MakeImage(MakeImageArgs),
    /// Compare two images (MSE and PSNR).
    Metrics(MetricsArgs),
}

/// Patch geometry flags shared by several subcommands.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct GeometryArgs {
    /// Square patch side (overridden by --patch-h / --patch-w) [default: 8]
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub patch_h: Option<usize>,
    #[arg(long)]
    pub patch_w: Option<usize>,
    /// Stride in both directions [default: half the patch side, at least 1]
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub stride_y: Option<usize>,
    #[arg(long)]
    pub stride_x: Option<usize>,
    /// clip or periodic [default: clip]
    #[arg(long)]
    pub boundary: Option<String>,
}
config::impl_merge!(GeometryArgs {
    patch,
    patch_h,
    patch_w,
    stride,
    stride_y,
    stride_x,
    boundary
});

/// Prior selection flags.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PriorArgs {
    /// l1, l2, dct-l1, dct-l2, gmm:<path> or gmm (with --gmm-path)
    #[arg(long)]
    pub prior: Option<String>,
    /// Prior weight [default: 0.05]
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gmm_path: Option<PathBuf>,
}
config::impl_merge!(PriorArgs {
    prior,
    lambda,
    gmm_path
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct AddNoiseArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Noisy PGM; a float64 dump is written next to it with extension .f64
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
config::impl_merge!(AddNoiseArgs {
    input,
    out,
    sigma,
    seed,
    config
});

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct DenoiseArgs {
    /// Noisy input (PGM or float64 dump)
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Output PGM; a float64 dump is written next to it with extension .f64
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground truth for PSNR reporting
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// synthesis-admm, analysis-hqs or analysis-admm [default: synthesis-admm]
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub geometry: GeometryArgs,
    /// Noise standard deviation (intensity units)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// ADMM penalty [default: 1/sigma^2]
    #[arg(long)]
    pub rho: Option<f64>,
    /// [default: 300]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// [default: 1e-5]
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// [default: 1e-4]
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// [default: 1/sigma^2]
    #[arg(long)]
    pub beta_init: Option<f64>,
    /// [default: 4]
    #[arg(long)]
    pub beta_growth: Option<f64>,
    /// [default: 6]
    #[arg(long)]
    pub beta_stages: Option<usize>,
    /// HQS alternations per beta value [default: 2]
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Trace file [default: <out>.trace.txt]
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl config::Merge for DenoiseArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            input: self.input.or(file.input),
            out: self.out.or(file.out),
            truth: self.truth.or(file.truth),
            method: self.method.or(file.method),
            prior: self.prior.merge(file.prior),
            geometry: self.geometry.merge(file.geometry),
            sigma: self.sigma.or(file.sigma),
            rho: self.rho.or(file.rho),
            max_iter: self.max_iter.or(file.max_iter),
            tol_abs: self.tol_abs.or(file.tol_abs),
            tol_rel: self.tol_rel.or(file.tol_rel),
            beta_init: self.beta_init.or(file.beta_init),
            beta_growth: self.beta_growth.or(file.beta_growth),
            beta_stages: self.beta_stages.or(file.beta_stages),
            inner_iters: self.inner_iters.or(file.inner_iters),
            trace_out: self.trace_out.or(file.trace_out),
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of images [default: 1]
    #[arg(long)]
    pub count: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl config::Merge for SampleArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            prior: self.prior.merge(file.prior),
            geometry: self.geometry.merge(file.geometry),
            height: self.height.or(file.height),
            width: self.width.or(file.width),
            seed: self.seed.or(file.seed),
            count: self.count.or(file.count),
            out: self.out.or(file.out),
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ReportArgs {
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Take height and width from this image instead
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl config::Merge for ReportArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            height: self.height.or(file.height),
            width: self.width.or(file.width),
            input: self.input.or(file.input),
            geometry: self.geometry.merge(file.geometry),
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MakeImageArgs {
    /// constant[:value], gradient, checkerboard[:period] or piecewise
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    /// Output PGM; a float64 dump is written next to it with extension .f64
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// [default: 1]
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
}

/// Long flag names of a subcommand, used to validate config keys.
fn flag_names(sub: &str) -> BTreeSet<String> {
    Cli::command()
        .find_subcommand(sub)
        .map(|c| {
            c.get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

/// Applies `--config` if present; flags win.
fn with_config<T>(sub: &str, args: T, config: Option<&PathBuf>) -> Result<T, CliError>
where
    T: config::Merge + serde::de::DeserializeOwned,
{
    match config {
        Some(path) => Ok(args.merge(config::load(path, &flag_names(sub))?)),
        None => Ok(args),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::AddNoise(a) => {
            let cfg = a.config.clone();
            commands::add_noise(with_config("add-noise", a, cfg.as_ref())?)
        }
        Command::Denoise(a) => {
            let cfg = a.config.clone();
            commands::denoise(with_config("denoise", a, cfg.as_ref())?)
        }
        Command::SamplePrior(a) => {
            let cfg = a.config.clone();
            commands::sample_prior(with_config("sample-prior", a, cfg.as_ref())?)
        }
        Command::ReportOperators(a) => {
            let cfg = a.config.clone();
            commands::report_operators(with_config("report-operators", a, cfg.as_ref())?)
        }
        Command::MakeImage(a) => commands::make_image(a),
        Command::Metrics(a) => commands::metrics(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_documented_exit_codes() {
        let cases = [
            (
                Error::Divergence {
                    iteration: 3,
                    what: "z",
                },
                5,
            ),
            (Error::Coverage { row: 0, col: 9 }, 4),
            (Error::Unsupported("sampling".into()), 3),
            (
                Error::Format {
                    context: "PGM".into(),
                    message: "bad magic".into(),
                },
                2,
            ),
            (Error::Config("rho".into()), 1),
        ];
        for (err, code) in cases {
            let text = err.to_string();
            let cli = CliError::from(err);
            assert_eq!(cli.code, code, "{text}");
            assert_eq!(cli.message, text);
        }
    }

    #[test]
    fn config_keys_are_the_long_flags() {
        let names = flag_names("denoise");
        for key in [
            "in",
            "out",
            "sigma",
            "patch-h",
            "stride-x",
            "gmm-path",
            "trace-out",
        ] {
            assert!(names.contains(key), "{key}");
        }
        assert!(!names.contains("help"));
    }
}
