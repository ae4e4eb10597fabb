//! Dense reference implementations for testing.
//!
//! Everything here is built directly from patch footprints and textbook
//! linear algebra and never calls the fast operators in
//! [`crate::patch_ops`] or [`crate::solvers`]. Coverage counts are recounted
//! from the footprints rather than read from the grid.
//!
//! Matrices are limited to [`SIZE_GUARD`] entries.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::patch_ops::PatchGrid;
use crate::priors::PatchPrior;

/// Maximum number of entries of any dense operator built here.
pub const SIZE_GUARD: usize = 10_000_000;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn guard(rows: usize, cols: usize) -> Result<()> {
    let entries = rows.saturating_mul(cols);
    if entries > SIZE_GUARD {
        return Err(Error::SizeGuard {
            entries,
            limit: SIZE_GUARD,
        });
    }
    Ok(())
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(
                "dense matrix dimensions must be positive".into(),
            ));
        }
        guard(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        Ok(m)
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(
                "dense matrix data has wrong length".into(),
            ));
        }
        let mut m = Self::zeros(rows, cols)?;
        m.data = data;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data: vec![0.0; self.data.len()],
        };
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", self.cols),
                actual: format!("{}", other.rows),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols)?;
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ y`.
    pub fn tmatvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tmatvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
        out
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Coverage counts recounted from the footprints.
fn recount(grid: &PatchGrid) -> Vec<usize> {
    let mut counts = vec![0usize; grid.image_height() * grid.image_width()];
    for &p in grid.footprints() {
        counts[p] += 1;
    }
    counts
}

/// Stacked binary extraction matrix, `Mn x N`.
pub fn dense_p(grid: &PatchGrid) -> Result<DenseMatrix> {
    let n_pix = grid.image_height() * grid.image_width();
    let fp = grid.footprints();
    let mut p = DenseMatrix::zeros(fp.len(), n_pix)?;
    for (row, &pix) in fp.iter().enumerate() {
        p.set(row, pix, 1.0);
    }
    Ok(p)
}

/// Averaging synthesis matrix `[Q_1 ... Q_M]`, `N x Mn`.
pub fn dense_q(grid: &PatchGrid) -> Result<DenseMatrix> {
    let counts = recount(grid);
    let fp = grid.footprints();
    let mut q = DenseMatrix::zeros(counts.len(), fp.len())?;
    for (col, &pix) in fp.iter().enumerate() {
        q.set(pix, col, 1.0 / counts[pix] as f64);
    }
    Ok(q)
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let chol = a
        .to_nalgebra()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("matrix is not positive definite".into()))?;
    Ok(chol
        .solve(&DVector::from_column_slice(b))
        .as_slice()
        .to_vec())
}

/// General square solve by LU with partial pivoting.
pub fn solve_lu(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.to_nalgebra()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::InvalidInput("singular system".into()))
}

/// z-step by forming `QᵀQ + sigma^2 rho I` densely and solving it.
pub fn direct_z_update(
    grid: &PatchGrid,
    y: &[f64],
    u: &[f64],
    d: &[f64],
    sigma: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    assert!(sigma > 0.0 && rho > 0.0, "sigma and rho must be positive");
    let q = dense_q(grid)?;
    let mn = q.cols();
    guard(mn, mn)?;
    let a = sigma * sigma * rho;
    let mut lhs = q.transpose().matmul(&q)?;
    for i in 0..mn {
        lhs.set(i, i, lhs.get(i, i) + a);
    }
    let mut rhs = q.tmatvec(y);
    for ((r, &ui), &di) in rhs.iter_mut().zip(u).zip(d) {
        *r += a * (ui + di);
    }
    let z = solve_spd(&lhs, &rhs).expect("QᵀQ + aI is positive definite for a > 0");
    Ok(z)
}

/// Largest eigenvalue of `AᵀA` by power iteration.
pub fn spectral_norm_sq(a: &DenseMatrix, iters: usize) -> f64 {
    let mut v = vec![1.0; a.cols()];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.tmatvec(&a.matvec(&v));
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    lambda
}

/// `|A z - y|^2 / (2 sigma^2) + sum_m xi(z_m)` with blocks of the prior's
/// patch dimension.
pub struct ProxGradProblem<'a> {
    pub a: &'a DenseMatrix,
    pub y: &'a [f64],
    pub sigma: f64,
    pub prior: &'a dyn PatchPrior,
    /// Defaults to `sigma^2 / (1.05 |A|_2^2)`.
    pub step: Option<f64>,
    pub iters: usize,
}

#[derive(Debug, Clone)]
pub struct ProxGradSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
}

fn prox_grad_objective(p: &ProxGradProblem<'_>, z: &[f64]) -> f64 {
    let az = p.a.matvec(z);
    let data: f64 = az.iter().zip(p.y).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = p.prior.patch_dim();
    let reg: f64 = z.chunks(n).map(|c| p.prior.eval(c)).sum();
    data / (2.0 * p.sigma * p.sigma) + reg
}

/// Plain proximal gradient from `z = 0`.
pub fn proximal_gradient_reference(p: &ProxGradProblem<'_>) -> Result<ProxGradSolution> {
    let caps = p.prior.capabilities();
    if !caps.is_convex_neglog || !caps.has_exact_prox {
        return Err(Error::Unsupported(
            "proximal gradient oracle needs a convex prior with exact prox".into(),
        ));
    }
    let n = p.prior.patch_dim();
    if !p.a.cols().is_multiple_of(n) || p.a.rows() != p.y.len() {
        return Err(Error::InvalidInput(
            "problem dimensions are inconsistent".into(),
        ));
    }
    let s2 = p.sigma * p.sigma;
    let step = match p.step {
        Some(s) => s,
        None => s2 / (1.05 * spectral_norm_sq(p.a, 500)),
    };
    let mut z = vec![0.0; p.a.cols()];
    let mut trace = Vec::with_capacity(p.iters);
    let mut arg = vec![0.0; z.len()];
    for _ in 0..p.iters {
        let resid: Vec<f64> = p.a.matvec(&z).iter().zip(p.y).map(|(a, b)| a - b).collect();
        let grad = p.a.tmatvec(&resid);
        for ((a, &zi), &g) in arg.iter_mut().zip(&z).zip(&grad) {
            *a = zi - step * g / s2;
        }
        for (o, c) in z.chunks_mut(n).zip(arg.chunks(n)) {
            p.prior.prox_into(c, step, o);
        }
        trace.push(prox_grad_objective(p, &z));
    }
    Ok(ProxGradSolution {
        objective: prox_grad_objective(p, &z),
        z,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_ops::Boundary;
    use crate::priors::{GmmPrior, L1Prior, L2SqPrior};

    fn grid_1d() -> PatchGrid {
        PatchGrid::plan(1, 4, 1, 2, 1, 1, Boundary::Periodic).unwrap()
    }

    #[test]
    fn dense_p_1d() {
        let p = dense_p(&grid_1d()).unwrap();
        assert_eq!((p.rows(), p.cols()), (8, 4));
        let ones = [
            (0, 0),
            (1, 1),
            (2, 1),
            (3, 2),
            (4, 2),
            (5, 3),
            (6, 3),
            (7, 0),
        ];
        for r in 0..8 {
            assert_eq!(p.row(r).iter().sum::<f64>(), 1.0);
        }
        for (r, c) in ones {
            assert_eq!(p.get(r, c), 1.0);
        }
    }

    #[test]
    fn dense_q_times_p_is_identity() {
        let g = PatchGrid::plan(5, 4, 2, 3, 1, 1, Boundary::Clip).unwrap();
        let qp = dense_q(&g).unwrap().matmul(&dense_p(&g).unwrap()).unwrap();
        assert!(qp.max_abs_diff(&DenseMatrix::identity(20).unwrap()) <= 1e-14);
    }

    #[test]
    fn size_guard() {
        let g = PatchGrid::plan(64, 64, 8, 8, 1, 1, Boundary::Periodic).unwrap();
        assert!(matches!(dense_p(&g), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn z_update_large_rho_tends_to_u_plus_d() {
        let g = grid_1d();
        let y = [1.0, -2.0, 0.5, 3.0];
        let u: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let d: Vec<f64> = (0..8).map(|i| 0.3 - i as f64 * 0.05).collect();
        let rho = 1e8;
        let z = direct_z_update(&g, &y, &u, &d, 1.0, rho).unwrap();
        for ((zi, ui), di) in z.iter().zip(&u).zip(&d) {
            assert!((zi - ui - di).abs() < 10.0 / rho);
        }
        let zero = direct_z_update(&g, &[0.0; 4], &[0.0; 8], &[0.0; 8], 1.0, 1.0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    fn well_conditioned() -> (DenseMatrix, Vec<f64>) {
        let a = DenseMatrix::from_row_major(
            4,
            3,
            vec![2.0, 0.1, 0.0, 0.3, 1.5, -0.2, 0.0, 0.4, 1.8, 0.5, 0.0, 0.7],
        )
        .unwrap();
        (a, vec![1.0, -0.5, 2.0, 0.3])
    }

    #[test]
    fn prox_grad_matches_ridge() {
        let (a, y) = well_conditioned();
        let lambda = 0.4;
        let sigma = 0.8;
        let prior = L2SqPrior::new(lambda, 1).unwrap();
        let sol = proximal_gradient_reference(&ProxGradProblem {
            a: &a,
            y: &y,
            sigma,
            prior: &prior,
            step: None,
            iters: 5000,
        })
        .unwrap();
        // (AᵀA / s^2 + 2 lambda I) z = Aᵀ y / s^2
        let mut lhs = a.transpose().matmul(&a).unwrap();
        let s2 = sigma * sigma;
        for i in 0..3 {
            for j in 0..3 {
                let v = lhs.get(i, j) / s2 + if i == j { 2.0 * lambda } else { 0.0 };
                lhs.set(i, j, v);
            }
        }
        let rhs: Vec<f64> = a.tmatvec(&y).iter().map(|v| v / s2).collect();
        let exact = solve_spd(&lhs, &rhs).unwrap();
        for (a, b) in sol.z.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6);
        }
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn prox_grad_least_squares_limit() {
        let (a, y) = well_conditioned();
        let prior = L1Prior::new(1e-30, 1).unwrap();
        let sol = proximal_gradient_reference(&ProxGradProblem {
            a: &a,
            y: &y,
            sigma: 1.0,
            prior: &prior,
            step: None,
            iters: 5000,
        })
        .unwrap();
        let ata = a.transpose().matmul(&a).unwrap();
        let ls = solve_spd(&ata, &a.tmatvec(&y)).unwrap();
        for (a, b) in sol.z.iter().zip(&ls) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn prox_grad_rejects_nonconvex() {
        let (a, y) = well_conditioned();
        let gmm = GmmPrior::parse("2 1\n0.5 0 1\n0.5 1 1\n").unwrap();
        let res = proximal_gradient_reference(&ProxGradProblem {
            a: &a,
            y: &y,
            sigma: 1.0,
            prior: &gmm,
            step: None,
            iters: 10,
        });
        assert!(matches!(res, Err(Error::Unsupported(_))));
    }
}
