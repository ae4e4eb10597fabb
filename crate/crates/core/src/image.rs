//! Grayscale image container, synthetic test images, noise and metrics.

use crate::error::{check_finite, Error, Result};
use crate::rng::GaussianRng;

/// Row-major grayscale image with real intensities (canonical range `[0, 1]`,
/// never clamped).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pixels ({height}x{width})", height * width),
                actual: format!("{} values", data.len()),
            });
        }
        check_finite("image", &data)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, 0.0)
    }

    /// Internal constructor for data already known to be valid.
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::ShapeMismatch {
                expected: format!("{height}x{width} image"),
                actual: format!("{}x{}", self.height, self.width),
            });
        }
        Ok(())
    }
}

/// Additive white Gaussian noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Returns `img + sigma * w` with `w` drawn from [`GaussianRng`] seeded by
/// `spec.seed`, one variate per pixel in row-major order.
pub fn add_awgn(img: &ImageBuffer, spec: NoiseSpec) -> Result<ImageBuffer> {
    if !spec.sigma.is_finite() || spec.sigma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be finite and nonnegative, got {}",
            spec.sigma
        )));
    }
    check_finite("image", img.data())?;
    if spec.sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = GaussianRng::new(spec.seed);
    let data = img
        .data
        .iter()
        .map(|&v| v + spec.sigma * rng.normal())
        .collect();
    Ok(ImageBuffer::from_parts(img.height, img.width, data))
}

fn check_same_shape(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    b.check_shape(a.height, a.width)
}

/// Mean squared error.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_shape(a, b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> Result<f64> {
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "peak must be positive, got {peak}"
        )));
    }
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

/// Synthetic image families.
///
/// * `Constant { value }`: every pixel equals `value`.
/// * `Gradient`: horizontal ramp `col / (width - 1)` (0 when `width == 1`).
/// * `Checkerboard { period }`: `((row / period) + (col / period)) mod 2`.
/// * `Piecewise`: five flat levels. Pixels with `row < height/2` and
///   `col < width/2` are 0.2, the rest of the top half 0.8, the bottom-left
///   quarter 0.5, and a centred disc of radius `min(h, w)/4` inside the
///   bottom-right area is 1.0 over a 0.35 background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestImage {
    Constant { value: f64 },
    Gradient,
    Checkerboard { period: usize },
    Piecewise,
}

impl std::str::FromStr for TestImage {
    type Err = Error;

    /// Parses `constant[:v]`, `gradient`, `checkerboard[:period]` or `piecewise`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let bad_arg = |a: &str| Error::InvalidInput(format!("bad test image parameter '{a}'"));
        match kind {
            "constant" => Ok(TestImage::Constant {
                value: arg.map_or(Ok(0.5), |a| a.parse().map_err(|_| bad_arg(a)))?,
            }),
            "gradient" => Ok(TestImage::Gradient),
            "checkerboard" => Ok(TestImage::Checkerboard {
                period: arg.map_or(Ok(1), |a| a.parse().map_err(|_| bad_arg(a)))?,
            }),
            "piecewise" => Ok(TestImage::Piecewise),
            other => Err(Error::InvalidInput(format!(
                "unknown test image kind '{other}'"
            ))),
        }
    }
}

pub fn make_test_image(kind: TestImage, height: usize, width: usize) -> Result<ImageBuffer> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput(format!(
            "image dimensions must be positive, got {height}x{width}"
        )));
    }
    let pixel = |r: usize, c: usize| -> f64 {
        match kind {
            TestImage::Constant { value } => value,
            TestImage::Gradient => {
                if width == 1 {
                    0.0
                } else {
                    c as f64 / (width - 1) as f64
                }
            }
            TestImage::Checkerboard { period } => (((r / period) + (c / period)) % 2) as f64,
            TestImage::Piecewise => {
                let (h2, w2) = (height / 2, width / 2);
                if r < h2 {
                    if c < w2 {
                        0.2
                    } else {
                        0.8
                    }
                } else if c < w2 {
                    0.5
                } else {
                    let cy = (h2 + height) as f64 / 2.0;
                    let cx = (w2 + width) as f64 / 2.0;
                    let rad = height.min(width) as f64 / 4.0;
                    let (dy, dx) = (r as f64 + 0.5 - cy, c as f64 + 0.5 - cx);
                    if dy * dy + dx * dx <= rad * rad {
                        1.0
                    } else {
                        0.35
                    }
                }
            }
        }
    };
    if let TestImage::Checkerboard { period: 0 } = kind {
        return Err(Error::InvalidInput(
            "checkerboard period must be positive".into(),
        ));
    }
    let data = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|(r, c)| pixel(r, c))
        .collect();
    ImageBuffer::new(height, width, data)
}
