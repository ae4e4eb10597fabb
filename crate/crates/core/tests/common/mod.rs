#![allow(dead_code)]

use patchsynth::oracle::{DenseMatrix, SIZE_GUARD};
use patchsynth::rng::GaussianRng;
use patchsynth::{Boundary, GridSpec, ImageBuffer, PatchGrid, PatchStack};

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn grid_1d() -> PatchGrid {
    PatchGrid::plan(1, 4, 1, 2, 1, 1, Boundary::Periodic).unwrap()
}

pub fn random_vec(rng: &mut GaussianRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.normal()).collect()
}

pub fn random_image(rng: &mut GaussianRng, grid: &PatchGrid) -> ImageBuffer {
    ImageBuffer::new(
        grid.image_height(),
        grid.image_width(),
        random_vec(rng, grid.num_pixels()),
    )
    .unwrap()
}

pub fn random_stack(rng: &mut GaussianRng, grid: &PatchGrid) -> PatchStack {
    PatchStack::for_grid(grid, random_vec(rng, grid.stack_len())).unwrap()
}

fn pick(rng: &mut GaussianRng, lo: usize, hi: usize) -> usize {
    lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

/// Random valid geometry: image up to `max_side` per side, patch up to 8 per
/// side, strides in `1..=patch`, either boundary. Geometries rejected for
/// coverage are redrawn.
pub fn random_grid(rng: &mut GaussianRng, max_side: usize) -> PatchGrid {
    loop {
        let h = pick(rng, 1, max_side);
        let w = pick(rng, 2, max_side);
        let ph = pick(rng, 1, h.min(8));
        let pw = pick(rng, 1, w.min(8));
        let spec = GridSpec {
            image_height: h,
            image_width: w,
            patch_height: ph,
            patch_width: pw,
            stride_y: pick(rng, 1, ph),
            stride_x: pick(rng, 1, pw),
            boundary: if rng.uniform() < 0.5 {
                Boundary::Clip
            } else {
                Boundary::Periodic
            },
        };
        if let Ok(g) = PatchGrid::new(spec) {
            return g;
        }
    }
}

/// Whether the dense operators of `grid` fit under the oracle size guard.
pub fn under_guard(grid: &PatchGrid) -> bool {
    grid.stack_len() * grid.num_pixels() <= SIZE_GUARD
}

/// Block-diagonal matrix with `m` copies of the `n x n` block.
pub fn block_diag(block: &[f64], n: usize, m: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m * n, m * n).unwrap();
    for k in 0..m {
        for i in 0..n {
            for j in 0..n {
                out.set(k * n + i, k * n + j, block[i * n + j]);
            }
        }
    }
    out
}

pub fn add(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = a.clone();
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            out.set(r, c, a.get(r, c) + b.get(r, c));
        }
    }
    out
}

pub fn scale(a: &DenseMatrix, s: f64) -> DenseMatrix {
    let mut out = a.clone();
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            out.set(r, c, a.get(r, c) * s);
        }
    }
    out
}

/// Inverse of a small symmetric positive definite matrix (row-major).
pub fn spd_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let m = DenseMatrix::from_row_major(n, n, a.to_vec()).unwrap();
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = patchsynth::oracle::solve_spd(&m, &e).unwrap();
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    inv
}
