use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use patchsynth::io::{self, PgmKind};
use patchsynth::sampler::{self, SampleJob};
use patchsynth::{
    add_awgn, make_test_image, mse, psnr, AdmmConfig, Boundary, GridSpec, HqsConfig, ImageBuffer,
    NoiseSpec, PatchGrid, PatchPrior, PriorSpec, SolverResult, TestImage,
};

use crate::{
    AddNoiseArgs, CliError, DenoiseArgs, GeometryArgs, MakeImageArgs, MetricsArgs, PriorArgs,
    ReportArgs, SampleArgs,
};

const DEFAULT_PATCH: usize = 8;
const DEFAULT_LAMBDA: f64 = 0.05;
const PGM_MAXVAL: u16 = 255;

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

fn check_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::io(format!(
            "input file not found: {}",
            path.display()
        )))
    }
}

fn check_output(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(CliError::io(format!(
            "output directory does not exist: {}",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn dump_path(out: &Path) -> PathBuf {
    out.with_extension("f64")
}

fn write_outputs(out: &Path, img: &ImageBuffer) -> Result<(), CliError> {
    io::write_pgm(out, img, PgmKind::Binary, PGM_MAXVAL)?;
    io::write_f64(&dump_path(out), img)?;
    Ok(())
}

fn positive(value: f64, flag: &str) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::usage(format!(
            "--{flag} must be positive, got {value}"
        )))
    }
}

fn build_grid(g: &GeometryArgs, height: usize, width: usize) -> Result<PatchGrid, CliError> {
    let patch_height = g.patch_h.or(g.patch).unwrap_or(DEFAULT_PATCH);
    let patch_width = g.patch_w.or(g.patch).unwrap_or(DEFAULT_PATCH);
    let stride_y = g.stride_y.or(g.stride).unwrap_or((patch_height / 2).max(1));
    let stride_x = g.stride_x.or(g.stride).unwrap_or((patch_width / 2).max(1));
    let boundary: Boundary = g
        .boundary
        .as_deref()
        .unwrap_or("clip")
        .parse()
        .map_err(CliError::geometry)?;
    PatchGrid::new(GridSpec {
        image_height: height,
        image_width: width,
        patch_height,
        patch_width,
        stride_y,
        stride_x,
        boundary,
    })
    .map_err(CliError::geometry)
}

fn build_prior(
    p: &PriorArgs,
    grid: &PatchGrid,
) -> Result<(PriorSpec, Arc<dyn PatchPrior>), CliError> {
    let name = p.prior.as_deref().unwrap_or("dct-l1");
    let spec = if name == "gmm" {
        let path = required(p.gmm_path.clone(), "gmm-path")?;
        PriorSpec::Gmm(path)
    } else {
        name.parse()?
    };
    if let PriorSpec::Gmm(path) = &spec {
        check_input(path)?;
    }
    let lambda = positive(p.lambda.unwrap_or(DEFAULT_LAMBDA), "lambda")?;
    let s = grid.spec();
    let prior = spec.build(lambda, s.patch_height, s.patch_width)?;
    Ok((spec, prior))
}

pub fn add_noise(a: AddNoiseArgs) -> Result<(), CliError> {
    let input = required(a.input, "in")?;
    let out = required(a.out, "out")?;
    let sigma = required(a.sigma, "sigma")?;
    let seed = a.seed.unwrap_or(0);
    check_input(&input)?;
    check_output(&out)?;
    let x = io::read_image(&input)?;
    let y = add_awgn(&x, NoiseSpec { sigma, seed })?;
    write_outputs(&out, &y)?;
    println!("sigma: {sigma}");
    println!("seed: {seed}");
    println!("wrote: {} {}", out.display(), dump_path(&out).display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    SynthesisAdmm,
    AnalysisHqs,
    AnalysisAdmm,
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "synthesis-admm" => Ok(Method::SynthesisAdmm),
            "analysis-hqs" => Ok(Method::AnalysisHqs),
            "analysis-admm" => Ok(Method::AnalysisAdmm),
            other => Err(CliError::usage(format!(
                "unknown method '{other}' (expected synthesis-admm, analysis-hqs or analysis-admm)"
            ))),
        }
    }
}

pub fn denoise(a: DenoiseArgs) -> Result<(), CliError> {
    let input = required(a.input.clone(), "in")?;
    let out = required(a.out.clone(), "out")?;
    let sigma = positive(required(a.sigma, "sigma")?, "sigma")?;
    let method: Method = a.method.as_deref().unwrap_or("synthesis-admm").parse()?;
    let trace_out = a
        .trace_out
        .clone()
        .unwrap_or_else(|| out.with_extension("trace.txt"));
    check_input(&input)?;
    if let Some(t) = &a.truth {
        check_input(t)?;
    }
    check_output(&out)?;
    check_output(&trace_out)?;

    let y = io::read_image(&input)?;
    let truth = a.truth.as_deref().map(io::read_image).transpose()?;
    let grid = build_grid(&a.geometry, y.height(), y.width())?;
    let (spec, prior) = build_prior(&a.prior, &grid)?;

    let defaults = AdmmConfig::new(sigma);
    let admm = AdmmConfig {
        rho: a.rho.unwrap_or(defaults.rho),
        max_iter: a.max_iter.unwrap_or(defaults.max_iter),
        tol_abs: a.tol_abs.unwrap_or(defaults.tol_abs),
        tol_rel: a.tol_rel.unwrap_or(defaults.tol_rel),
        sigma,
    };
    let hqs_defaults = HqsConfig::new(sigma);
    let hqs = HqsConfig {
        beta_init: a.beta_init.unwrap_or(hqs_defaults.beta_init),
        beta_growth: a.beta_growth.unwrap_or(hqs_defaults.beta_growth),
        betas_count: a.beta_stages.unwrap_or(hqs_defaults.betas_count),
        inner_iters: a.inner_iters.unwrap_or(hqs_defaults.inner_iters),
        sigma,
    };

    let start = Instant::now();
    let result: SolverResult = match method {
        Method::SynthesisAdmm => {
            patchsynth::denoise_synthesis_admm(&y, &grid, prior.as_ref(), &admm)?
        }
        Method::AnalysisHqs => patchsynth::denoise_analysis_hqs(&y, &grid, prior.as_ref(), &hqs)?,
        Method::AnalysisAdmm => {
            patchsynth::denoise_analysis_admm(&y, &grid, prior.as_ref(), &admm)?
        }
    };
    let elapsed = start.elapsed();

    write_outputs(&out, &result.x_hat)?;
    result.write_trace(&trace_out)?;

    println!("grid: {}", grid.spec());
    println!("prior: {spec} {}", prior.describe());
    println!(
        "final objective: {:e}",
        result.final_objective().unwrap_or(f64::NAN)
    );
    println!("iterations: {}", result.iterations);
    println!("converged: {}", result.converged);
    if result.nonconvex_prior {
        println!("warning: non-convex prior, no optimality guarantee");
    }
    println!("wall time: {:.3} s", elapsed.as_secs_f64());
    if let Some(x) = &truth {
        println!("psnr noisy: {:.4} dB", psnr(x, &y, 1.0)?);
        println!("psnr denoised: {:.4} dB", psnr(x, &result.x_hat, 1.0)?);
    }
    Ok(())
}

fn json_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

pub fn sample_prior(a: SampleArgs) -> Result<(), CliError> {
    let out = required(a.out.clone(), "out")?;
    let height = required(a.height, "height")?;
    let width = required(a.width, "width")?;
    let count = a.count.unwrap_or(1);
    if count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let seed = a.seed.unwrap_or(0);
    let grid = build_grid(&a.geometry, height, width)?;
    let (spec, prior) = build_prior(&a.prior, &grid)?;
    let job = SampleJob {
        grid: &grid,
        prior: prior.as_ref(),
        seed,
        count,
    };
    job.validate()?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;

    let mut files = Vec::with_capacity(count);
    for k in 0..count {
        let img = sampler::sample_image(&grid, prior.as_ref(), seed, k as u64)?;
        let name = format!("sample_{k:04}.pgm");
        write_outputs(&out.join(&name), &img)?;
        files.push(json_string(&name));
    }
    let s = grid.spec();
    let manifest = format!(
        "{{\n  \"seed\": {seed},\n  \"count\": {count},\n  \"prior\": {},\n  \"prior_detail\": {},\n  \"lambda\": {},\n  \"grid\": {{\"image_height\": {}, \"image_width\": {}, \"patch_height\": {}, \"patch_width\": {}, \"stride_y\": {}, \"stride_x\": {}, \"boundary\": \"{}\"}},\n  \"files\": [{}]\n}}\n",
        json_string(&spec.to_string()),
        json_string(&prior.describe()),
        a.prior.lambda.unwrap_or(DEFAULT_LAMBDA),
        s.image_height,
        s.image_width,
        s.patch_height,
        s.patch_width,
        s.stride_y,
        s.stride_x,
        s.boundary,
        files.join(", ")
    );
    io::write_atomic(&out.join("manifest.json"), manifest.as_bytes())?;
    println!("wrote {count} samples to {}", out.display());
    Ok(())
}

pub fn report_operators(a: ReportArgs) -> Result<(), CliError> {
    let (height, width) = match &a.input {
        Some(p) => {
            check_input(p)?;
            let img = io::read_image(p)?;
            (img.height(), img.width())
        }
        None => (required(a.height, "height")?, required(a.width, "width")?),
    };
    let grid = build_grid(&a.geometry, height, width)?;
    let diag = grid.qqt_diag();
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("grid: {}", grid.spec());
    println!("N = {}", grid.num_pixels());
    println!("M = {}", grid.num_patches());
    println!("n = {}", grid.patch_dim());
    println!(
        "overlapping: {}",
        if grid.is_overlapping() { "yes" } else { "no" }
    );
    println!("count histogram:");
    for (count, pixels) in grid.count_histogram() {
        println!("  {count}: {pixels}");
    }
    println!("qqt_diag min: {min}");
    println!("qqt_diag max: {max}");
    Ok(())
}

pub fn make_image(a: MakeImageArgs) -> Result<(), CliError> {
    let kind: TestImage = a.kind.parse()?;
    check_output(&a.out)?;
    let img = make_test_image(kind, a.height, a.width)?;
    write_outputs(&a.out, &img)?;
    println!("wrote: {} {}", a.out.display(), dump_path(&a.out).display());
    Ok(())
}

pub fn metrics(a: MetricsArgs) -> Result<(), CliError> {
    check_input(&a.input)?;
    check_input(&a.truth)?;
    let x = io::read_image(&a.input)?;
    let t = io::read_image(&a.truth)?;
    println!("mse: {:e}", mse(&x, &t)?);
    println!("psnr: {:.4} dB", psnr(&x, &t, positive(a.peak, "peak")?)?);
    Ok(())
}
