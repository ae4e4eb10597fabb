//! Patch extraction `P` and averaging synthesis `Q`, applied implicitly.
//!
//! A [`PatchGrid`] stores, for every patch, the `n` absolute pixel indices it
//! covers (its footprint), plus the per-pixel coverage counts `c(i)`.
//! `P` gathers pixels into a patch-major stack; `Q` scatters a stack back and
//! divides each pixel by `c(i)`, so `Q P = I`.
//!
//! Synthesis is computed per pixel through an inverse index that lists the
//! stack entries landing on each pixel in increasing stack order. Each output
//! pixel is therefore a fixed-order sum, and the threaded and sequential
//! builds agree bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::exec;
use crate::image::ImageBuffer;

/// How patches near the image border are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Only patches lying fully inside the image.
    Clip,
    /// Patches wrap around the image edges.
    Periodic,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(Boundary::Clip),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidInput(format!(
                "unknown boundary '{other}' (expected clip or periodic)"
            ))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Clip => "clip",
            Boundary::Periodic => "periodic",
        })
    }
}

/// Geometry of a patch system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub image_height: usize,
    pub image_width: usize,
    pub patch_height: usize,
    pub patch_width: usize,
    pub stride_y: usize,
    pub stride_x: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    /// Square patches with equal strides.
    pub fn square(
        image_height: usize,
        image_width: usize,
        patch: usize,
        stride: usize,
        boundary: Boundary,
    ) -> Self {
        Self {
            image_height,
            image_width,
            patch_height: patch,
            patch_width: patch,
            stride_y: stride,
            stride_x: stride,
            boundary,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "image {}x{}, patch {}x{}, stride {}x{}, {}",
            self.image_height,
            self.image_width,
            self.patch_height,
            self.patch_width,
            self.stride_y,
            self.stride_x,
            self.boundary
        )
    }
}

/// Immutable patch system: footprints, counts and the pixel → stack index.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    spec: GridSpec,
    num_patches: usize,
    /// `footprints[m * n + j]` is the pixel covered by entry `j` of patch `m`.
    footprints: Vec<usize>,
    counts: Vec<u32>,
    /// CSR index: stack positions covering pixel `i` are
    /// `sources[offsets[i]..offsets[i + 1]]`, ascending.
    offsets: Vec<usize>,
    sources: Vec<usize>,
}

fn lattice(extent: usize, patch: usize, stride: usize, boundary: Boundary) -> Vec<usize> {
    let last = match boundary {
        Boundary::Clip => extent - patch,
        Boundary::Periodic => extent - 1,
    };
    (0..=last).step_by(stride).collect()
}

impl PatchGrid {
    /// Builds the grid. Patch corners are enumerated in row-major order on the
    /// stride lattice; under `Clip` only corners whose patch fits inside the
    /// image are kept, under `Periodic` every lattice corner is kept and
    /// indices wrap.
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            image_height: h,
            image_width: w,
            patch_height: ph,
            patch_width: pw,
            stride_y: sy,
            stride_x: sx,
            boundary,
        } = spec;
        if h == 0 || w == 0 || ph == 0 || pw == 0 {
            return Err(Error::InvalidInput(format!(
                "all dimensions must be positive ({spec})"
            )));
        }
        if sy == 0 || sx == 0 {
            return Err(Error::InvalidInput(format!(
                "strides must be at least 1 ({spec})"
            )));
        }
        if ph > h || pw > w {
            return Err(Error::InvalidInput(format!(
                "patch larger than image ({spec})"
            )));
        }
        let rows = lattice(h, ph, sy, boundary);
        let cols = lattice(w, pw, sx, boundary);
        let n = ph * pw;
        let num_patches = rows.len() * cols.len();
        let mut footprints = Vec::with_capacity(num_patches * n);
        for &r0 in &rows {
            for &c0 in &cols {
                for dr in 0..ph {
                    for dc in 0..pw {
                        let r = (r0 + dr) % h;
                        let c = (c0 + dc) % w;
                        footprints.push(r * w + c);
                    }
                }
            }
        }
        let mut counts = vec![0u32; h * w];
        for &p in &footprints {
            counts[p] += 1;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Coverage {
                row: i / w,
                col: i % w,
            });
        }
        let mut offsets = Vec::with_capacity(h * w + 1);
        offsets.push(0);
        for &c in &counts {
            offsets.push(offsets.last().unwrap() + c as usize);
        }
        let mut fill = offsets[..h * w].to_vec();
        let mut sources = vec![0; footprints.len()];
        for (k, &p) in footprints.iter().enumerate() {
            sources[fill[p]] = k;
            fill[p] += 1;
        }
        Ok(Self {
            spec,
            num_patches,
            footprints,
            counts,
            offsets,
            sources,
        })
    }

    /// Convenience wrapper over [`PatchGrid::new`].
    pub fn plan(
        image_height: usize,
        image_width: usize,
        patch_height: usize,
        patch_width: usize,
        stride_y: usize,
        stride_x: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        Self::new(GridSpec {
            image_height,
            image_width,
            patch_height,
            patch_width,
            stride_y,
            stride_x,
            boundary,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn image_height(&self) -> usize {
        self.spec.image_height
    }

    pub fn image_width(&self) -> usize {
        self.spec.image_width
    }

    /// Pixels per image, `N`.
    pub fn num_pixels(&self) -> usize {
        self.counts.len()
    }

    /// Number of patches, `M`.
    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    /// Pixels per patch, `n`.
    pub fn patch_dim(&self) -> usize {
        self.spec.patch_height * self.spec.patch_width
    }

    /// Length of a stack, `M n`.
    pub fn stack_len(&self) -> usize {
        self.footprints.len()
    }

    /// Pixel indices covered by patch `m`.
    pub fn footprint(&self, m: usize) -> &[usize] {
        let n = self.patch_dim();
        &self.footprints[m * n..(m + 1) * n]
    }

    /// All footprints, patch-major.
    pub fn footprints(&self) -> &[usize] {
        &self.footprints
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// True when some pixel is covered by more than one patch.
    pub fn is_overlapping(&self) -> bool {
        self.counts.iter().any(|&c| c > 1)
    }

    /// Number of pixels for each coverage count.
    pub fn count_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for &c in &self.counts {
            *hist.entry(c).or_insert(0) += 1;
        }
        hist
    }

    pub fn zeros_stack(&self) -> PatchStack {
        PatchStack {
            num_patches: self.num_patches,
            patch_dim: self.patch_dim(),
            data: vec![0.0; self.stack_len()],
        }
    }

    pub(crate) fn check_image(&self, img: &ImageBuffer) -> Result<()> {
        img.check_shape(self.spec.image_height, self.spec.image_width)
    }

    pub(crate) fn check_stack(&self, stack: &PatchStack) -> Result<()> {
        if stack.num_patches != self.num_patches || stack.patch_dim != self.patch_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "stack of {} patches x {}",
                    self.num_patches,
                    self.patch_dim()
                ),
                actual: format!("{} x {}", stack.num_patches, stack.patch_dim),
            });
        }
        Ok(())
    }

    fn wrap_image(&self, data: Vec<f64>) -> ImageBuffer {
        ImageBuffer::from_parts(self.spec.image_height, self.spec.image_width, data)
    }

    fn wrap_stack(&self, data: Vec<f64>) -> PatchStack {
        PatchStack {
            num_patches: self.num_patches,
            patch_dim: self.patch_dim(),
            data,
        }
    }

    /// `out = P x`.
    pub(crate) fn extract_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.num_pixels());
        let n = self.patch_dim();
        exec::for_each_chunk_mut(out, n, |m, patch| {
            for (o, &p) in patch.iter_mut().zip(&self.footprints[m * n..(m + 1) * n]) {
                *o = x[p];
            }
        });
    }

    /// `out = Pᵀ z` (plain sum of contributions, no averaging).
    pub(crate) fn scatter_sum_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.stack_len());
        let w = self.spec.image_width;
        exec::for_each_chunk_mut(out, w, |row, chunk| {
            for (c, o) in chunk.iter_mut().enumerate() {
                let i = row * w + c;
                let mut acc = 0.0;
                for &k in &self.sources[self.offsets[i]..self.offsets[i + 1]] {
                    acc += z[k];
                }
                *o = acc;
            }
        });
    }

    /// `out = Q z`.
    pub(crate) fn synthesize_into(&self, z: &[f64], out: &mut [f64]) {
        self.scatter_sum_into(z, out);
        for (o, &c) in out.iter_mut().zip(&self.counts) {
            *o /= c as f64;
        }
    }

    /// `out = Qᵀ y`.
    pub(crate) fn synthesize_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.patch_dim();
        exec::for_each_chunk_mut(out, n, |m, patch| {
            for (o, &p) in patch.iter_mut().zip(&self.footprints[m * n..(m + 1) * n]) {
                *o = y[p] / self.counts[p] as f64;
            }
        });
    }

    /// Gathers every patch of `img` into a stack (`P x`).
    pub fn extract(&self, img: &ImageBuffer) -> Result<PatchStack> {
        self.check_image(img)?;
        let mut out = vec![0.0; self.stack_len()];
        self.extract_into(img.data(), &mut out);
        Ok(self.wrap_stack(out))
    }

    /// Averages overlapping patch entries back into an image (`Q z`).
    pub fn synthesize(&self, stack: &PatchStack) -> Result<ImageBuffer> {
        self.check_stack(stack)?;
        let mut out = vec![0.0; self.num_pixels()];
        self.synthesize_into(&stack.data, &mut out);
        Ok(self.wrap_image(out))
    }

    /// Adjoint of synthesis (`Qᵀ y`): gather, then divide each entry by the
    /// coverage count of its source pixel.
    pub fn synthesize_adjoint(&self, img: &ImageBuffer) -> Result<PatchStack> {
        self.check_image(img)?;
        let mut out = vec![0.0; self.stack_len()];
        self.synthesize_adjoint_into(img.data(), &mut out);
        Ok(self.wrap_stack(out))
    }

    /// Adjoint of extraction (`Pᵀ z`): sum of all entries landing on each pixel.
    pub fn extract_adjoint(&self, stack: &PatchStack) -> Result<ImageBuffer> {
        self.check_stack(stack)?;
        let mut out = vec![0.0; self.num_pixels()];
        self.scatter_sum_into(&stack.data, &mut out);
        Ok(self.wrap_image(out))
    }

    /// Diagonal of `Q Qᵀ`, i.e. `1 / c(i)` per pixel.
    pub fn qqt_diag(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| 1.0 / c as f64).collect()
    }

    /// `P Q z`: projection onto stacks whose patches agree on shared pixels.
    pub fn project_range(&self, stack: &PatchStack) -> Result<PatchStack> {
        self.check_stack(stack)?;
        let mut img = vec![0.0; self.num_pixels()];
        self.synthesize_into(&stack.data, &mut img);
        let mut out = vec![0.0; self.stack_len()];
        self.extract_into(&img, &mut out);
        Ok(self.wrap_stack(out))
    }
}

/// Stack of `M` patches of `n` values each, patch `m` at `[m n, (m + 1) n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStack {
    num_patches: usize,
    patch_dim: usize,
    data: Vec<f64>,
}

impl PatchStack {
    pub fn new(num_patches: usize, patch_dim: usize, data: Vec<f64>) -> Result<Self> {
        check_len("patch stack", num_patches * patch_dim, data.len())?;
        crate::error::check_finite("patch stack", &data)?;
        Ok(Self {
            num_patches,
            patch_dim,
            data,
        })
    }

    /// Stack shaped for `grid`.
    pub fn for_grid(grid: &PatchGrid, data: Vec<f64>) -> Result<Self> {
        Self::new(grid.num_patches(), grid.patch_dim(), data)
    }

    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn patch(&self, m: usize) -> &[f64] {
        &self.data[m * self.patch_dim..(m + 1) * self.patch_dim]
    }

    pub fn patches(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.patch_dim)
    }
}
