use crate::error::{Error, Result};
use crate::rng::GaussianRng;

use super::{Capabilities, PatchPrior, ScalarPenalty};

/// Orthonormal 2D DCT-II for `height x width` patches, as a row-major
/// `n x n` matrix acting on row-major patch vectors (`n = height * width`).
pub fn dct_matrix(height: usize, width: usize) -> Vec<f64> {
    let c_h = dct_1d(height);
    let c_w = dct_1d(width);
    let n = height * width;
    let mut out = vec![0.0; n * n];
    // kron(C_h, C_w)
    for ki in 0..height {
        for kj in 0..width {
            let row = ki * width + kj;
            for i in 0..height {
                for j in 0..width {
                    out[row * n + i * width + j] = c_h[ki * height + i] * c_w[kj * width + j];
                }
            }
        }
    }
    out
}

fn dct_1d(k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * k];
    for f in 0..k {
        let alpha = if f == 0 {
            (1.0 / k as f64).sqrt()
        } else {
            (2.0 / k as f64).sqrt()
        };
        for j in 0..k {
            c[f * k + j] = alpha
                * (std::f64::consts::PI * (2 * j + 1) as f64 * f as f64 / (2 * k) as f64).cos();
        }
    }
    c
}

/// Prior `psi(B u)` for an orthonormal transform `B` and a separable penalty
/// `psi`. Coefficients can be individually excluded from the penalty (the
/// DCT constructors use this to leave the DC term free).
#[derive(Debug, Clone)]
pub struct AnalysisTransformPrior {
    dim: usize,
    basis: Vec<f64>,
    inner: ScalarPenalty,
    penalized: Vec<bool>,
    label: String,
}

impl AnalysisTransformPrior {
    /// `basis` is row-major `n x n` and must satisfy `BᵀB = I` to 1e-10.
    pub fn new(
        basis: Vec<f64>,
        dim: usize,
        inner: ScalarPenalty,
        penalized: Vec<bool>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || basis.len() != dim * dim || penalized.len() != dim {
            return Err(Error::InvalidInput(format!(
                "transform must be {dim}x{dim} with {dim} penalty flags"
            )));
        }
        for a in 0..dim {
            for b in 0..dim {
                let dot: f64 = (0..dim)
                    .map(|r| basis[r * dim + a] * basis[r * dim + b])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "transform is not orthonormal: (BᵀB)[{a},{b}] = {dot}"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            basis,
            inner,
            penalized,
            label: label.into(),
        })
    }

    /// Identity transform with every coefficient penalized; reproduces the
    /// plain separable prior.
    pub fn identity(dim: usize, inner: ScalarPenalty) -> Result<Self> {
        let mut basis = vec![0.0; dim * dim];
        for i in 0..dim {
            basis[i * dim + i] = 1.0;
        }
        Self::new(basis, dim, inner, vec![true; dim], "id")
    }

    /// 2D DCT-II transform prior. With `penalize_dc = false` the DC
    /// coefficient is left out of the penalty, so constant patches cost 0.
    pub fn dct(
        height: usize,
        width: usize,
        inner: ScalarPenalty,
        penalize_dc: bool,
    ) -> Result<Self> {
        let n = height * width;
        let mut penalized = vec![true; n];
        if n > 0 {
            penalized[0] = penalize_dc;
        }
        Self::new(dct_matrix(height, width), n, inner, penalized, "dct")
    }

    pub fn inner(&self) -> ScalarPenalty {
        self.inner
    }

    /// Writes `B u` into `out`.
    pub fn forward(&self, u: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.basis[r * n..(r + 1) * n]
                .iter()
                .zip(u)
                .map(|(b, x)| b * x)
                .sum();
        }
    }

    /// Writes `Bᵀ w` into `out`.
    pub fn inverse(&self, w: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &wr) in w.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(&self.basis[r * n..(r + 1) * n]) {
                *o += b * wr;
            }
        }
    }
}

impl PatchPrior for AnalysisTransformPrior {
    fn patch_dim(&self) -> usize {
        self.dim
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_exact_prox: true,
            is_convex_neglog: true,
            can_sample: self.penalized.iter().all(|&p| p),
        }
    }

    fn describe(&self) -> String {
        let dc = if self.penalized.iter().all(|&p| p) {
            ""
        } else {
            ", partial"
        };
        format!(
            "{}-{}(lambda={}{dc})",
            self.label,
            self.inner.name(),
            self.inner.lambda()
        )
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let mut w = vec![0.0; self.dim];
        self.forward(u, &mut w);
        w.iter()
            .zip(&self.penalized)
            .filter(|(_, &p)| p)
            .map(|(&x, _)| self.inner.eval(x))
            .sum()
    }

    fn prox_into(&self, v: &[f64], t: f64, out: &mut [f64]) {
        let mut w = vec![0.0; self.dim];
        self.forward(v, &mut w);
        for (x, &p) in w.iter_mut().zip(&self.penalized) {
            if p {
                *x = self.inner.prox(*x, t);
            }
        }
        self.inverse(&w, out);
    }

    fn sample_into(&self, rng: &mut GaussianRng, out: &mut [f64]) -> Result<()> {
        if !self.capabilities().can_sample {
            return Err(Error::Unsupported(format!(
                "prior {} has unpenalized coefficients and no proper density",
                self.describe()
            )));
        }
        let w: Vec<f64> = (0..self.dim).map(|_| self.inner.sample(rng)).collect();
        self.inverse(&w, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{L1Prior, L2SqPrior};

    #[test]
    fn dct_is_orthonormal() {
        for (h, w) in [(1, 1), (2, 2), (3, 5), (8, 8)] {
            assert!(
                AnalysisTransformPrior::dct(h, w, ScalarPenalty::l1(1.0).unwrap(), true).is_ok()
            );
        }
    }

    #[test]
    fn dct_dc_row_is_constant() {
        let b = dct_matrix(2, 3);
        for v in &b[..6] {
            assert!((v - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_orthonormal() {
        let b = vec![1.0, 0.0, 0.0, 2.0];
        assert!(AnalysisTransformPrior::new(
            b,
            2,
            ScalarPenalty::l1(1.0).unwrap(),
            vec![true; 2],
            "x"
        )
        .is_err());
    }

    #[test]
    fn identity_transform_matches_inner() {
        let v = [0.9, -0.2, 0.05, -1.4];
        let pairs: [(Box<dyn PatchPrior>, AnalysisTransformPrior); 2] = [
            (
                Box::new(L1Prior::new(0.3, 4).unwrap()),
                AnalysisTransformPrior::identity(4, ScalarPenalty::l1(0.3).unwrap()).unwrap(),
            ),
            (
                Box::new(L2SqPrior::new(0.3, 4).unwrap()),
                AnalysisTransformPrior::identity(4, ScalarPenalty::l2sq(0.3).unwrap()).unwrap(),
            ),
        ];
        for (plain, wrapped) in &pairs {
            assert_eq!(plain.negloglik(&v).unwrap(), wrapped.negloglik(&v).unwrap());
            assert_eq!(plain.prox(&v, 0.7).unwrap(), wrapped.prox(&v, 0.7).unwrap());
        }
    }

    #[test]
    fn constant_patch_is_free_without_dc_penalty() {
        let p = AnalysisTransformPrior::dct(2, 2, ScalarPenalty::l1(5.0).unwrap(), false).unwrap();
        let u = [0.4; 4];
        assert!(p.negloglik(&u).unwrap().abs() < 1e-14);
        let out = p.prox(&u, 3.0).unwrap();
        for o in out {
            assert!((o - 0.4).abs() < 1e-14);
        }
        assert!(matches!(p.sample(1), Err(Error::Unsupported(_))));
    }
}
