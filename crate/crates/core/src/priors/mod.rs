//! Patch priors: negative log-density, proximity operator and sampling.
//!
//! Additive constants of [`PatchPrior::negloglik`] are fixed per prior:
//! the penalty priors (`L1Prior`, `L2SqPrior`, `AnalysisTransformPrior`)
//! return the bare penalty with no constant, while `GmmPrior` returns the
//! exact negative log of the normalized mixture density.

mod gmm;
mod penalty;
mod transform;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub use gmm::{GaussianComponent, GmmPrior};
pub use penalty::{L1Prior, L2SqPrior, ScalarPenalty};
pub use transform::{dct_matrix, AnalysisTransformPrior};

use crate::error::{check_finite, check_len, Error, Result};
use crate::rng::GaussianRng;

/// What a prior can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    /// `prox` returns the exact minimizer.
    pub has_exact_prox: bool,
    /// The negative log-density is convex.
    pub is_convex_neglog: bool,
    pub can_sample: bool,
}

/// A per-patch probabilistic model as used by the solvers.
///
/// Implementors provide unchecked kernels; the provided methods validate
/// lengths, finiteness and `t > 0` before calling them.
pub trait PatchPrior: Send + Sync + fmt::Debug {
    fn patch_dim(&self) -> usize;

    fn capabilities(&self) -> Capabilities;

    /// Short description, e.g. `l1(lambda=0.1)`.
    fn describe(&self) -> String;

    /// Negative log-density of `u` (length already checked).
    fn eval(&self, u: &[f64]) -> f64;

    /// Writes `argmin_w xi(w) + |w - v|^2 / (2t)` into `out`.
    fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]);

    /// Draws one patch. Priors that cannot be sampled return
    /// [`Error::Unsupported`].
    fn sample_into(&self, _rng: &mut GaussianRng, _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(format!(
            "prior {} cannot be sampled",
            self.describe()
        )))
    }

    fn negloglik(&self, u: &[f64]) -> Result<f64> {
        check_len("patch", self.patch_dim(), u.len())?;
        check_finite("patch", u)?;
        Ok(self.eval(u))
    }

    fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        check_len("patch", self.patch_dim(), v.len())?;
        check_finite("patch", v)?;
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "prox step must be positive and finite, got {t}"
            )));
        }
        let mut out = vec![0.0; v.len()];
        self.prox_into(v, t, &mut out);
        Ok(out)
    }

    /// One patch drawn from a generator seeded with `seed`.
    fn sample(&self, seed: u64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.patch_dim()];
        self.sample_into(&mut GaussianRng::new(seed), &mut out)?;
        Ok(out)
    }
}

/// Parsed prior selector as used on the command line.
///
/// `l1`, `l2`, `dct-l1`, `dct-l2` and `gmm:<path>`. The DCT variants leave the
/// DC coefficient unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    L1,
    L2,
    DctL1,
    DctL2,
    Gmm(std::path::PathBuf),
}

impl std::str::FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(PriorSpec::L1),
            "l2" => Ok(PriorSpec::L2),
            "dct-l1" => Ok(PriorSpec::DctL1),
            "dct-l2" => Ok(PriorSpec::DctL2),
            _ => match s.strip_prefix("gmm:") {
                Some(p) if !p.is_empty() => Ok(PriorSpec::Gmm(p.into())),
                _ => Err(Error::InvalidInput(format!(
                    "unknown prior '{s}' (expected l1, l2, dct-l1, dct-l2 or gmm:<path>)"
                ))),
            },
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::L1 => f.write_str("l1"),
            PriorSpec::L2 => f.write_str("l2"),
            PriorSpec::DctL1 => f.write_str("dct-l1"),
            PriorSpec::DctL2 => f.write_str("dct-l2"),
            PriorSpec::Gmm(p) => write!(f, "gmm:{}", p.display()),
        }
    }
}

impl PriorSpec {
    /// Instantiates the prior for `patch_height x patch_width` patches.
    /// `lambda` is ignored for GMM priors.
    pub fn build(
        &self,
        lambda: f64,
        patch_height: usize,
        patch_width: usize,
    ) -> Result<Arc<dyn PatchPrior>> {
        let n = patch_height * patch_width;
        Ok(match self {
            PriorSpec::L1 => Arc::new(L1Prior::new(lambda, n)?),
            PriorSpec::L2 => Arc::new(L2SqPrior::new(lambda, n)?),
            PriorSpec::DctL1 => Arc::new(AnalysisTransformPrior::dct(
                patch_height,
                patch_width,
                ScalarPenalty::l1(lambda)?,
                false,
            )?),
            PriorSpec::DctL2 => Arc::new(AnalysisTransformPrior::dct(
                patch_height,
                patch_width,
                ScalarPenalty::l2sq(lambda)?,
                false,
            )?),
            PriorSpec::Gmm(path) => {
                let gmm = GmmPrior::load(Path::new(path))?;
                if gmm.patch_dim() != n {
                    return Err(Error::InvalidInput(format!(
                        "GMM patch dimension {} does not match patch size {patch_height}x{patch_width}",
                        gmm.patch_dim()
                    )));
                }
                Arc::new(gmm)
            }
        })
    }
}
