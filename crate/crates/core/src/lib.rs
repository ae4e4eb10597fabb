//! Patch-based image denoising under the patch-analysis (EPLL-style) and
//! patch-synthesis formulations.
//!
//! * [`patch_ops`] implements patch extraction `P` and averaging synthesis `Q`
//!   without forming matrices.
//! * [`priors`] provides patch priors with negative log-density, proximity
//!   operator and sampler.
//! * [`solvers`] contains synthesis ADMM (with the Woodbury z-step), analysis
//!   half-quadratic splitting and analysis ADMM.
//! * [`sampler`] draws images from the synthesis prior.
//! * [`oracle`] holds slow dense reference implementations used for testing.
//!
//! Per-patch loops run on rayon when the default `parallel` feature is
//! enabled; results are bit-identical with the feature off.

pub mod error;
mod exec;
pub mod image;
pub mod io;
pub mod oracle;
pub mod patch_ops;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod solvers;

pub use error::{Error, Result};
pub use image::{add_awgn, make_test_image, mse, psnr, ImageBuffer, NoiseSpec, TestImage};
pub use patch_ops::{Boundary, GridSpec, PatchGrid, PatchStack};
pub use priors::{
    AnalysisTransformPrior, Capabilities, GmmPrior, L1Prior, L2SqPrior, PatchPrior, PriorSpec,
    ScalarPenalty,
};
pub use solvers::{
    denoise_analysis_admm, denoise_analysis_hqs, denoise_synthesis_admm,
    denoise_synthesis_admm_in_range, objective_analysis, objective_synthesis, synthesis_z_update,
    AdmmConfig, HqsConfig, SolverResult,
};
