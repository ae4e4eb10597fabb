//! Gaussian mixture patch prior.
//!
//! Parameter file layout (text, whitespace separated, `#` starts a comment
//! running to end of line):
//!
//! ```text
//! K n
//! w_1  mu_1[0..n]  Sigma_1[0..n*n] (row-major)
//! ...
//! w_K  mu_K[0..n]  Sigma_K[0..n*n]
//! ```
//!
//! Weights must be nonnegative and sum to 1 within 1e-12; every covariance
//! must be symmetric and pass a Cholesky factorization.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rng::GaussianRng;

use super::{Capabilities, PatchPrior};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Raw parameters of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `n x n`.
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Prepared {
    log_weight: f64,
    mean: DVector<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    chol_lower: DMatrix<f64>,
}

/// Mixture `sum_k w_k N(mu_k, Sigma_k)` with parameters supplied externally.
///
/// `negloglik` is the exact `-ln p(u)` including normalization. `prox` picks
/// the component with the largest responsibility for `v` under added noise of
/// variance `t`, then applies that component's Wiener step
/// `mu + Sigma (Sigma + t I)^-1 (v - mu)`; this is exact only for `K = 1`.
#[derive(Debug, Clone)]
pub struct GmmPrior {
    dim: usize,
    raw: Vec<GaussianComponent>,
    comps: Vec<Prepared>,
}

impl GmmPrior {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidInput("GMM needs at least one component".into()))?;
        let n = first.mean.len();
        if n == 0 {
            return Err(Error::InvalidInput("GMM dimension must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "GMM weights sum to {total}, expected 1"
            )));
        }
        let mut comps = Vec::with_capacity(components.len());
        for (k, c) in components.iter().enumerate() {
            if c.weight.is_nan() || c.weight < 0.0 || c.mean.len() != n || c.cov.len() != n * n {
                return Err(Error::InvalidInput(format!(
                    "GMM component {k}: bad weight or dimensions"
                )));
            }
            if c.mean.iter().chain(&c.cov).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "GMM component {k}: non-finite parameter"
                )));
            }
            let cov = DMatrix::from_row_slice(n, n, &c.cov);
            let asym = (&cov - cov.transpose()).abs().max();
            if asym > 1e-12 * cov.abs().max().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "GMM component {k}: covariance is not symmetric"
                )));
            }
            let chol = cov.clone().cholesky().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "GMM component {k}: covariance is not positive definite"
                ))
            })?;
            let chol_lower = chol.l();
            let eig = SymmetricEigen::new(cov);
            if eig.eigenvalues.iter().any(|&l| l.is_nan() || l <= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "GMM component {k}: covariance has a nonpositive eigenvalue"
                )));
            }
            comps.push(Prepared {
                log_weight: c.weight.ln(),
                mean: DVector::from_column_slice(&c.mean),
                eigvecs: eig.eigenvectors,
                eigvals: eig.eigenvalues,
                chol_lower,
            });
        }
        Ok(Self {
            dim: n,
            raw: components,
            comps,
        })
    }

    pub fn num_components(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.raw
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut next = |what: &str| -> Result<f64> {
            let tok = tokens.next().ok_or_else(|| {
                Error::format("GMM file", format!("unexpected end, wanted {what}"))
            })?;
            tok.parse().map_err(|_| {
                Error::format("GMM file", format!("invalid number '{tok}' for {what}"))
            })
        };
        let k = next("K")?;
        let n = next("n")?;
        if k < 1.0 || n < 1.0 || k.fract() != 0.0 || n.fract() != 0.0 {
            return Err(Error::format(
                "GMM file",
                "K and n must be positive integers",
            ));
        }
        let (k, n) = (k as usize, n as usize);
        let mut comps = Vec::with_capacity(k);
        for _ in 0..k {
            let weight = next("weight")?;
            let mean = (0..n).map(|_| next("mean")).collect::<Result<_>>()?;
            let cov = (0..n * n)
                .map(|_| next("covariance"))
                .collect::<Result<_>>()?;
            comps.push(GaussianComponent { weight, mean, cov });
        }
        if tokens.next().is_some() {
            return Err(Error::format(
                "GMM file",
                "trailing data after last component",
            ));
        }
        Self::new(comps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Serializes to the text layout described in the module docs.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.raw.len(), self.dim);
        for c in &self.raw {
            let nums: Vec<String> = std::iter::once(c.weight)
                .chain(c.mean.iter().copied())
                .chain(c.cov.iter().copied())
                .map(|v| format!("{v:e}"))
                .collect();
            out.push_str(&nums.join(" "));
            out.push('\n');
        }
        out
    }

    /// Per-component `ln w_k + ln N(u; mu_k, Sigma_k + t I)`.
    fn log_joint(&self, u: &[f64], t: f64) -> Vec<f64> {
        let u = DVector::from_column_slice(u);
        self.comps
            .iter()
            .map(|c| {
                let proj = c.eigvecs.tr_mul(&(&u - &c.mean));
                let (mut mahal, mut logdet) = (0.0, 0.0);
                for (p, &l) in proj.iter().zip(c.eigvals.iter()) {
                    mahal += p * p / (l + t);
                    logdet += (l + t).ln();
                }
                c.log_weight - 0.5 * (self.dim as f64 * LN_2PI + logdet + mahal)
            })
            .collect()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl PatchPrior for GmmPrior {
    fn patch_dim(&self) -> usize {
        self.dim
    }

    fn capabilities(&self) -> Capabilities {
        let single = self.comps.len() == 1;
        Capabilities {
            has_exact_prox: single,
            is_convex_neglog: single,
            can_sample: true,
        }
    }

    fn describe(&self) -> String {
        format!("gmm(K={}, n={})", self.comps.len(), self.dim)
    }

    fn eval(&self, u: &[f64]) -> f64 {
        -log_sum_exp(&self.log_joint(u, 0.0))
    }

    fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
        let scores = self.log_joint(v, t);
        let best = scores
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &s)| if s > acc.1 { (k, s) } else { acc },
            )
            .0;
        let c = &self.comps[best];
        let centered = DVector::from_column_slice(v) - &c.mean;
        let mut proj = c.eigvecs.tr_mul(&centered);
        for (p, &l) in proj.iter_mut().zip(c.eigvals.iter()) {
            *p *= l / (l + t);
        }
        let res = &c.mean + &c.eigvecs * proj;
        out.copy_from_slice(res.as_slice());
    }

    fn sample_into(&self, rng: &mut GaussianRng, out: &mut [f64]) -> Result<()> {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut pick = self.comps.len() - 1;
        for (k, c) in self.raw.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = k;
                break;
            }
        }
        let c = &self.comps[pick];
        let eps = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.normal()));
        let x = &c.mean + &c.chol_lower * eps;
        out.copy_from_slice(x.as_slice());
        Ok(())
    }
}
