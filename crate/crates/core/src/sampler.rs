//! Draws images from the patch-synthesis prior: sample every patch
//! independently, then average them into an image with `Q`.
//!
//! Patch `m` of image `k` is drawn from a generator seeded with
//! [`derive_seed`]`(seed, k, m)`, so every image is reproducible on its own
//! and independent of execution order.

use crate::error::{Error, Result};
use crate::exec;
use crate::image::ImageBuffer;
use crate::patch_ops::{PatchGrid, PatchStack};
use crate::priors::PatchPrior;
use crate::rng::{derive_seed, GaussianRng};

/// A request for `count` prior samples on `grid`.
#[derive(Debug, Clone, Copy)]
pub struct SampleJob<'a> {
    pub grid: &'a PatchGrid,
    pub prior: &'a dyn PatchPrior,
    pub seed: u64,
    pub count: usize,
}

impl SampleJob<'_> {
    pub fn validate(&self) -> Result<()> {
        if !self.prior.capabilities().can_sample {
            return Err(Error::Unsupported(format!(
                "prior {} cannot be sampled",
                self.prior.describe()
            )));
        }
        if self.prior.patch_dim() != self.grid.patch_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("prior of patch dimension {}", self.grid.patch_dim()),
                actual: format!("{}", self.prior.patch_dim()),
            });
        }
        if self.count == 0 {
            return Err(Error::InvalidInput("sample count must be positive".into()));
        }
        Ok(())
    }
}

/// The i.i.d. patch stack behind image `index`.
pub fn sample_patch_stack(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    seed: u64,
    index: u64,
) -> Result<PatchStack> {
    let mut data = vec![0.0; grid.stack_len()];
    exec::try_for_each_chunk_mut(&mut data, grid.patch_dim(), |m, out| {
        let mut rng = GaussianRng::new(derive_seed(seed, index, m as u64));
        prior.sample_into(&mut rng, out)
    })?;
    PatchStack::for_grid(grid, data)
}

/// Image `index` of the sample stream for `seed`.
pub fn sample_image(
    grid: &PatchGrid,
    prior: &dyn PatchPrior,
    seed: u64,
    index: u64,
) -> Result<ImageBuffer> {
    grid.synthesize(&sample_patch_stack(grid, prior, seed, index)?)
}

/// Images `0..count` of the sample stream.
pub fn sample_prior_image(job: &SampleJob<'_>) -> Result<Vec<ImageBuffer>> {
    job.validate()?;
    (0..job.count as u64)
        .map(|k| sample_image(job.grid, job.prior, job.seed, k))
        .collect()
}
