//! Denoising solvers for the patch-synthesis and patch-analysis objectives.
//!
//! All objectives use one scale:
//!
//! * synthesis: `|Q z - y|^2 / (2 sigma^2) + sum_m xi(z_m)`
//! * analysis:  `|x - y|^2 / (2 sigma^2) + sum_m xi(P_m x)`
//! * HQS surrogate: `|x - y|^2 / (2 sigma^2) + (beta/2) sum_m |v_m - P_m x|^2 + sum_m xi(v_m)`
//!
//! The HQS surrogate is half of the form that weights the data term by
//! `1/sigma^2` and the prior by `-2 ln f`, so `beta` means the same thing in
//! both writings.
//!
//! ADMM runs in scaled form. For the synthesis splitting `z = u` the dual
//! `d` enters the updates as `u + d` (z-step) and `z - d` (u-step) and is
//! updated by `d += u - z`; for the analysis splitting `v = P x` the dual is
//! updated by `d += P x - v`.

mod analysis;
mod synthesis;

use std::fmt::Write as _;
use std::path::Path;

pub use analysis::{denoise_analysis_admm, denoise_analysis_hqs};
pub use synthesis::{denoise_synthesis_admm, denoise_synthesis_admm_in_range, synthesis_z_update};

use crate::error::{check_finite, Error, Result};
use crate::exec;
use crate::image::ImageBuffer;
use crate::patch_ops::{PatchGrid, PatchStack};
use crate::priors::PatchPrior;

/// Scaled-form ADMM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Noise standard deviation.
    pub sigma: f64,
}

impl AdmmConfig {
    /// Defaults: `rho = 1/sigma^2`, 300 iterations, `tol_abs = 1e-5`,
    /// `tol_rel = 1e-4`.
    pub fn new(sigma: f64) -> Self {
        Self {
            rho: 1.0 / (sigma * sigma),
            max_iter: 300,
            tol_abs: 1e-5,
            tol_rel: 1e-4,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.rho) || !pos(self.sigma) || !pos(self.tol_abs) || !pos(self.tol_rel) {
            return Err(Error::Config(format!(
                "rho, sigma and tolerances must be positive: {self:?}"
            )));
        }
        if self.tol_abs > 1.0 || self.tol_rel > 1.0 {
            return Err(Error::Config("tolerances must not exceed 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Half-quadratic splitting schedule: `beta_k = beta_init * beta_growth^k`
/// for `k < betas_count`, each held for `inner_iters` v/x alternations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqsConfig {
    pub beta_init: f64,
    pub beta_growth: f64,
    pub betas_count: usize,
    pub inner_iters: usize,
    pub sigma: f64,
}

impl HqsConfig {
    /// Defaults: `beta_init = 1/sigma^2`, growth 4, 6 stages, 2 inner
    /// iterations per stage.
    pub fn new(sigma: f64) -> Self {
        Self {
            beta_init: 1.0 / (sigma * sigma),
            beta_growth: 4.0,
            betas_count: 6,
            inner_iters: 2,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.beta_init) || !pos(self.sigma) {
            return Err(Error::Config(format!(
                "beta_init and sigma must be positive: {self:?}"
            )));
        }
        if !self.beta_growth.is_finite() || self.beta_growth <= 1.0 {
            return Err(Error::Config("beta_growth must exceed 1".into()));
        }
        if self.betas_count == 0 || self.inner_iters == 0 {
            return Err(Error::Config(
                "betas_count and inner_iters must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn betas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.betas_count).map(|k| self.beta_init * self.beta_growth.powi(k as i32))
    }
}

/// Final iterates kept for diagnostics.
#[derive(Debug, Clone)]
pub enum FinalState {
    Synthesis {
        z: PatchStack,
        u: PatchStack,
        d: PatchStack,
    },
    Analysis {
        v: PatchStack,
        /// Scaled dual; absent for HQS.
        d: Option<PatchStack>,
    },
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_hat: ImageBuffer,
    pub iterations: usize,
    /// Objective of the solved formulation after each iteration.
    pub objective_trace: Vec<f64>,
    pub primal_residual_trace: Vec<f64>,
    pub dual_residual_trace: Vec<f64>,
    /// HQS only: beta-smoothed surrogate after each iteration.
    pub surrogate_trace: Vec<f64>,
    /// Residual stopping rule met (ADMM) or schedule completed (HQS).
    pub converged: bool,
    /// The prior's negative log is non-convex; no optimality claim is made.
    pub nonconvex_prior: bool,
    pub state: FinalState,
}

impl SolverResult {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }

    /// Plain-text trace: a `#` header line, then one line per iteration with
    /// `iteration objective primal_residual dual_residual`, space separated,
    /// floats in shortest round-trip form.
    pub fn trace_text(&self) -> String {
        let mut out = String::from("# iteration objective primal_residual dual_residual\n");
        for i in 0..self.iterations {
            let _ = writeln!(
                out,
                "{} {:e} {:e} {:e}",
                i + 1,
                self.objective_trace[i],
                self.primal_residual_trace[i],
                self.dual_residual_trace[i]
            );
        }
        out
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.trace_text().as_bytes())
    }
}

/// One parsed trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format("trace", format!("malformed line {}: '{line}'", k + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(TraceRow {
                iteration: f[0].parse().map_err(|_| bad())?,
                objective: num(f[1])?,
                primal_residual: num(f[2])?,
                dual_residual: num(f[3])?,
            })
        })
        .collect()
}

pub(crate) fn check_problem(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    y: &ImageBuffer,
) -> Result<()> {
    grid.check_image(y)?;
    check_finite("noisy image", y.data())?;
    if prior.patch_dim() != grid.patch_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("prior of patch dimension {}", grid.patch_dim()),
            actual: format!("{}", prior.patch_dim()),
        });
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `sum_m xi(stack_m)`, summed in patch order.
pub(crate) fn prior_sum(prior: &dyn PatchPrior, stack: &[f64], n: usize) -> f64 {
    let m = stack.len() / n;
    exec::map_indices(m, |k| prior.eval(&stack[k * n..(k + 1) * n]))
        .into_iter()
        .sum()
}

/// `out_m = prox(arg_m, t)` for every patch.
pub(crate) fn prox_stack(prior: &dyn PatchPrior, arg: &[f64], t: f64, n: usize, out: &mut [f64]) {
    exec::for_each_chunk_mut(out, n, |m, o| {
        prior.prox_into(&arg[m * n..(m + 1) * n], t, o)
    });
}

pub(crate) fn ensure_finite(iteration: usize, what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration, what })
    }
}

/// `|Q z - y|^2 / (2 sigma^2) + sum_m xi(z_m)`.
pub fn objective_synthesis(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    y: &ImageBuffer,
    z: &PatchStack,
    sigma: f64,
) -> Result<f64> {
    check_problem(grid, prior, y)?;
    grid.check_stack(z)?;
    check_sigma(sigma)?;
    let x = grid.synthesize(z)?;
    Ok(dist_sq(x.data(), y.data()) / (2.0 * sigma * sigma)
        + prior_sum(prior, z.data(), grid.patch_dim()))
}

/// `|x - y|^2 / (2 sigma^2) + sum_m xi(P_m x)`.
pub fn objective_analysis(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    y: &ImageBuffer,
    x: &ImageBuffer,
    sigma: f64,
) -> Result<f64> {
    check_problem(grid, prior, y)?;
    grid.check_image(x)?;
    check_sigma(sigma)?;
    let px = grid.extract(x)?;
    Ok(dist_sq(x.data(), y.data()) / (2.0 * sigma * sigma)
        + prior_sum(prior, px.data(), grid.patch_dim()))
}

/// HQS surrogate at coupling `beta`.
pub fn objective_hqs(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    y: &ImageBuffer,
    x: &ImageBuffer,
    v: &PatchStack,
    sigma: f64,
    beta: f64,
) -> Result<f64> {
    check_problem(grid, prior, y)?;
    grid.check_image(x)?;
    grid.check_stack(v)?;
    check_sigma(sigma)?;
    let px = grid.extract(x)?;
    Ok(dist_sq(x.data(), y.data()) / (2.0 * sigma * sigma)
        + 0.5 * beta * dist_sq(v.data(), px.data())
        + prior_sum(prior, v.data(), grid.patch_dim()))
}
