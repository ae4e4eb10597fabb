use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::patch_ops::{PatchGrid, PatchStack};
use crate::priors::PatchPrior;

use super::{
    check_problem, dist_sq, ensure_finite, norm, prior_sum, prox_stack, AdmmConfig, FinalState,
    HqsConfig, SolverResult,
};

/// Pixel-wise minimizer of `|x - y|^2 / (2 sigma^2) + (w/2) |w_stack - P x|^2`,
/// using `PᵀP = diag(c)`: `x_i = (y_i/sigma^2 + w (Pᵀ target)_i) / (1/sigma^2 + w c_i)`.
fn x_step(grid: &PatchGrid, y: &[f64], inv_s2: f64, weight: f64, target: &[f64], x: &mut [f64]) {
    grid.scatter_sum_into(target, x);
    for ((xi, &yi), &c) in x.iter_mut().zip(y).zip(grid.counts()) {
        *xi = (yi * inv_s2 + weight * *xi) / (inv_s2 + weight * c as f64);
    }
}

fn analysis_objective(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    y: &[f64],
    x: &[f64],
    px: &[f64],
    inv_s2: f64,
) -> f64 {
    0.5 * inv_s2 * dist_sq(x, y) + prior_sum(prior, px, grid.patch_dim())
}

/// Patch-analysis MAP by half-quadratic splitting.
///
/// Starts from `x = y`. For every `beta` in the schedule, repeats
/// `inner_iters` times: `v_m = prox(P_m x, 1/beta)` then the closed-form
/// x-step. Each half-step exactly minimizes the surrogate, recorded in
/// `surrogate_trace`. Primal residual is `|v - P x|`, dual residual is the
/// change in `x`.
pub fn denoise_analysis_hqs(
    y: &ImageBuffer,
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    cfg: &HqsConfig,
) -> Result<SolverResult> {
    check_problem(grid, prior, y)?;
    cfg.validate()?;
    let n = grid.patch_dim();
    let inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
    let yd = y.data();

    let mut x = yd.to_vec();
    let mut x_prev = x.clone();
    let mut px = vec![0.0; grid.stack_len()];
    grid.extract_into(&x, &mut px);
    let mut v = px.clone();

    let mut objective_trace = Vec::new();
    let mut surrogate_trace = Vec::new();
    let mut primal = Vec::new();
    let mut dual = Vec::new();
    let mut it = 0;
    for beta in cfg.betas() {
        for _ in 0..cfg.inner_iters {
            it += 1;
            prox_stack(prior, &px, 1.0 / beta, n, &mut v);
            ensure_finite(it, "v", &v)?;
            x_prev.copy_from_slice(&x);
            x_step(grid, yd, inv_s2, beta, &v, &mut x);
            ensure_finite(it, "x", &x)?;
            grid.extract_into(&x, &mut px);

            let coupling = dist_sq(&v, &px);
            let obj = analysis_objective(grid, prior, yd, &x, &px, inv_s2);
            let surrogate =
                0.5 * inv_s2 * dist_sq(&x, yd) + 0.5 * beta * coupling + prior_sum(prior, &v, n);
            if !obj.is_finite() || !surrogate.is_finite() {
                return Err(Error::Divergence {
                    iteration: it,
                    what: "objective",
                });
            }
            objective_trace.push(obj);
            surrogate_trace.push(surrogate);
            primal.push(coupling.sqrt());
            dual.push(dist_sq(&x, &x_prev).sqrt());
        }
    }

    Ok(SolverResult {
        x_hat: ImageBuffer::from_parts(grid.image_height(), grid.image_width(), x),
        iterations: it,
        objective_trace,
        primal_residual_trace: primal,
        dual_residual_trace: dual,
        surrogate_trace,
        converged: true,
        nonconvex_prior: !prior.capabilities().is_convex_neglog,
        state: FinalState::Analysis {
            v: PatchStack::for_grid(grid, v)?,
            d: None,
        },
    })
}

/// Patch-analysis MAP by ADMM on the constraint `v = P x`.
///
/// Starts from `x = y`, `v = P y`, `d = 0`. Each iteration: closed-form x-step
/// towards `v - d`, `v_m = prox(P_m x + d_m, 1/rho)`, `d += P x - v`.
/// Primal residual `|P x - v|`, dual residual `rho |Pᵀ(v - v_prev)|`; the
/// thresholds are `sqrt(Mn) tol_abs + tol_rel max(|P x|, |v|)` and
/// `sqrt(N) tol_abs + tol_rel rho |Pᵀ d|`.
pub fn denoise_analysis_admm(
    y: &ImageBuffer,
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    cfg: &AdmmConfig,
) -> Result<SolverResult> {
    check_problem(grid, prior, y)?;
    cfg.validate()?;
    let n = grid.patch_dim();
    let len = grid.stack_len();
    let rho = cfg.rho;
    let inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
    let yd = y.data();
    let sqrt_len = (len as f64).sqrt();
    let sqrt_pix = (grid.num_pixels() as f64).sqrt();

    let mut x = yd.to_vec();
    let mut px = vec![0.0; len];
    grid.extract_into(&x, &mut px);
    let mut v = px.clone();
    let mut v_prev = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut work = vec![0.0; len];
    let mut img = vec![0.0; grid.num_pixels()];

    let mut objective_trace = Vec::new();
    let mut primal = Vec::new();
    let mut dual = Vec::new();
    let mut converged = false;

    for it in 1..=cfg.max_iter {
        for ((w, &vi), &di) in work.iter_mut().zip(&v).zip(&d) {
            *w = vi - di;
        }
        x_step(grid, yd, inv_s2, rho, &work, &mut x);
        ensure_finite(it, "x", &x)?;
        grid.extract_into(&x, &mut px);

        for ((w, &pi), &di) in work.iter_mut().zip(&px).zip(&d) {
            *w = pi + di;
        }
        std::mem::swap(&mut v, &mut v_prev);
        prox_stack(prior, &work, 1.0 / rho, n, &mut v);
        ensure_finite(it, "v", &v)?;

        for ((di, &pi), &vi) in d.iter_mut().zip(&px).zip(&v) {
            *di += pi - vi;
        }

        let r = dist_sq(&px, &v).sqrt();
        for ((w, &vi), &vp) in work.iter_mut().zip(&v).zip(&v_prev) {
            *w = vi - vp;
        }
        grid.scatter_sum_into(&work, &mut img);
        let s = rho * norm(&img);
        let obj = analysis_objective(grid, prior, yd, &x, &px, inv_s2);
        if !obj.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                what: "objective",
            });
        }
        objective_trace.push(obj);
        primal.push(r);
        dual.push(s);

        grid.scatter_sum_into(&d, &mut img);
        let eps_pri = sqrt_len * cfg.tol_abs + cfg.tol_rel * norm(&px).max(norm(&v));
        let eps_dual = sqrt_pix * cfg.tol_abs + cfg.tol_rel * rho * norm(&img);
        if r <= eps_pri && s <= eps_dual {
            converged = true;
            break;
        }
    }

    Ok(SolverResult {
        x_hat: ImageBuffer::from_parts(grid.image_height(), grid.image_width(), x),
        iterations: objective_trace.len(),
        objective_trace,
        primal_residual_trace: primal,
        dual_residual_trace: dual,
        surrogate_trace: Vec::new(),
        converged,
        nonconvex_prior: !prior.capabilities().is_convex_neglog,
        state: FinalState::Analysis {
            v: PatchStack::for_grid(grid, v)?,
            d: Some(PatchStack::for_grid(grid, d)?),
        },
    })
}
