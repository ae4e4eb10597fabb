use crate::error::{Error, Result};
use crate::rng::GaussianRng;

use super::{Capabilities, PatchPrior};

/// Separable scalar penalty applied coefficient-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarPenalty {
    /// `lambda |x|`
    L1 { lambda: f64 },
    /// `lambda x^2`
    L2Sq { lambda: f64 },
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Error::InvalidInput(format!(
            "prior weight must be positive and finite, got {lambda}"
        )))
    }
}

impl ScalarPenalty {
    pub fn l1(lambda: f64) -> Result<Self> {
        Ok(ScalarPenalty::L1 {
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn l2sq(lambda: f64) -> Result<Self> {
        Ok(ScalarPenalty::L2Sq {
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            ScalarPenalty::L1 { lambda } | ScalarPenalty::L2Sq { lambda } => lambda,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarPenalty::L1 { lambda } => lambda * x.abs(),
            ScalarPenalty::L2Sq { lambda } => lambda * x * x,
        }
    }

    /// Scalar prox at step `t`: soft threshold at `lambda t`, or shrinkage
    /// by `1 / (1 + 2 lambda t)`.
    #[inline]
    pub fn prox(&self, x: f64, t: f64) -> f64 {
        match *self {
            ScalarPenalty::L1 { lambda } => {
                let thr = lambda * t;
                x.signum() * (x.abs() - thr).max(0.0)
            }
            ScalarPenalty::L2Sq { lambda } => x / (1.0 + 2.0 * lambda * t),
        }
    }

    /// Draw from the normalized density `exp(-penalty)`: Laplace with scale
    /// `1/lambda`, or a normal with variance `1/(2 lambda)`.
    pub fn sample(&self, rng: &mut GaussianRng) -> f64 {
        match *self {
            ScalarPenalty::L1 { lambda } => rng.laplace(1.0 / lambda),
            ScalarPenalty::L2Sq { lambda } => rng.normal() * (0.5 / lambda).sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScalarPenalty::L1 { .. } => "l1",
            ScalarPenalty::L2Sq { .. } => "l2",
        }
    }
}

macro_rules! separable_prior {
    ($(#[$doc:meta])* $name:ident, $ctor:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            penalty: ScalarPenalty,
            dim: usize,
        }

        impl $name {
            pub fn new(lambda: f64, dim: usize) -> Result<Self> {
                if dim == 0 {
                    return Err(Error::InvalidInput("patch dimension must be positive".into()));
                }
                Ok(Self {
                    penalty: ScalarPenalty::$ctor(lambda)?,
                    dim,
                })
            }

            pub fn lambda(&self) -> f64 {
                self.penalty.lambda()
            }

            pub fn penalty(&self) -> ScalarPenalty {
                self.penalty
            }
        }

        impl PatchPrior for $name {
            fn patch_dim(&self) -> usize {
                self.dim
            }

            fn capabilities(&self) -> Capabilities {
                Capabilities {
                    has_exact_prox: true,
                    is_convex_neglog: true,
                    can_sample: true,
                }
            }

            fn describe(&self) -> String {
                format!("{}(lambda={})", self.penalty.name(), self.lambda())
            }

            fn eval(&self, u: &[f64]) -> f64 {
                u.iter().map(|&x| self.penalty.eval(x)).sum()
            }

            fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = self.penalty.prox(x, t);
                }
            }

            fn sample_into(&self, rng: &mut GaussianRng, out: &mut [f64]) -> Result<()> {
                for o in out.iter_mut() {
                    *o = self.penalty.sample(rng);
                }
                Ok(())
            }
        }
    };
}

separable_prior!(
    /// `lambda * |u|_1`.
    L1Prior,
    l1
);
separable_prior!(
    /// `lambda * |u|_2^2`.
    L2SqPrior,
    l2sq
);
