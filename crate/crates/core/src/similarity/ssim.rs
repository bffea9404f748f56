//! Structural similarity (SSIM) for grayscale images.

use serde::{Deserialize, Serialize};

use super::SimilarityScore;
use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, max_value]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    max_value: f64,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, max_value: f64, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty image {width}x{height}")));
        }
        if width * height != pixels.len() {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if !(max_value > 0.0 && max_value.is_finite()) {
            return Err(Error::Invalid(format!("max value must be positive, got {max_value}")));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=max_value).contains(*p)) {
            return Err(Error::Invalid(format!(
                "pixel intensity {p} outside [0, {max_value}]"
            )));
        }
        Ok(Self {
            width,
            height,
            max_value,
            pixels,
        })
    }

    /// An 8-bit image.
    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(width, height, 255.0, pixels.iter().map(|&p| f64::from(p)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    /// One set of statistics over the whole image.
    Global,
    /// Sliding Gaussian window over the valid region; the map is averaged.
    Gaussian { size: usize, sigma: f64 },
}

impl Default for SsimWindow {
    fn default() -> Self {
        SsimWindow::Gaussian {
            size: 11,
            sigma: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window: SsimWindow,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            window: SsimWindow::default(),
        }
    }
}

impl SsimParams {
    pub fn global() -> Self {
        Self {
            window: SsimWindow::Global,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::Invalid(format!(
                "SSIM constants must be positive (k1={}, k2={})",
                self.k1, self.k2
            )));
        }
        if self.dynamic_range.is_nan() || self.dynamic_range <= 0.0 {
            return Err(Error::Invalid(format!(
                "dynamic range must be positive, got {}",
                self.dynamic_range
            )));
        }
        if let SsimWindow::Gaussian { size, sigma } = self.window {
            if size < 3 || size % 2 == 0 {
                return Err(Error::Invalid(format!(
                    "window size must be odd and >= 3, got {size}"
                )));
            }
            if sigma.is_nan() || sigma <= 0.0 {
                return Err(Error::Invalid(format!("window sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Local statistics of an image pair.
#[derive(Debug, Clone, Copy)]
struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov_xy: f64,
}

impl Moments {
    fn ssim(&self, c1: f64, c2: f64) -> f64 {
        let num = (2.0 * self.mean_x * self.mean_y + c1) * (2.0 * self.cov_xy + c2);
        let den = (self.mean_x * self.mean_x + self.mean_y * self.mean_y + c1)
            * (self.var_x + self.var_y + c2);
        (num / den).clamp(-1.0, 1.0)
    }
}

/// SSIM of `x` against `y`. Symmetric, and exactly 1 when `x == y`.
pub fn ssim(x: &GrayImage, y: &GrayImage, params: &SsimParams) -> Result<SimilarityScore> {
    params.validate()?;
    if x.width != y.width || x.height != y.height {
        return Err(Error::Dimension(format!(
            "image sizes differ: {}x{} vs {}x{}",
            x.width, x.height, y.width, y.height
        )));
    }
    let (c1, c2) = (params.c1(), params.c2());
    let value = match params.window {
        SsimWindow::Global => global_moments(x, y).ssim(c1, c2),
        SsimWindow::Gaussian { size, sigma } => {
            if x.width < size || x.height < size {
                return Err(Error::Window {
                    width: x.width,
                    height: x.height,
                    size,
                });
            }
            gaussian_ssim(x, y, size, sigma, c1, c2)
        }
    };
    SimilarityScore::new(value)
}

fn global_moments(x: &GrayImage, y: &GrayImage) -> Moments {
    let n = x.pixels.len() as f64;
    let mean_x = x.pixels.iter().sum::<f64>() / n;
    let mean_y = y.pixels.iter().sum::<f64>() / n;
    let (mut var_x, mut var_y, mut cov_xy) = (0.0, 0.0, 0.0);
    for (a, b) in x.pixels.iter().zip(&y.pixels) {
        let (dx, dy) = (a - mean_x, b - mean_y);
        var_x += dx * dx;
        var_y += dy * dy;
        cov_xy += dx * dy;
    }
    Moments {
        mean_x,
        mean_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov_xy: cov_xy / n,
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let radius = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - radius;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable valid-region convolution; output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(data: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let out_w = width - k + 1;
    let out_h = height - k + 1;

    let mut rows = vec![0.0; out_w * height];
    for r in 0..height {
        let src = &data[r * width..(r + 1) * width];
        for c in 0..out_w {
            rows[r * out_w + c] = kernel.iter().zip(&src[c..c + k]).map(|(w, v)| w * v).sum();
        }
    }

    let mut out = vec![0.0; out_w * out_h];
    for r in 0..out_h {
        for c in 0..out_w {
            out[r * out_w + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, w)| w * rows[(r + i) * out_w + c])
                .sum();
        }
    }
    out
}

fn gaussian_ssim(x: &GrayImage, y: &GrayImage, size: usize, sigma: f64, c1: f64, c2: f64) -> f64 {
    let kernel = gaussian_kernel(size, sigma);
    let (w, h) = (x.width, x.height);
    let filter = |data: &[f64]| filter_valid(data, w, h, &kernel);

    let xx: Vec<f64> = x.pixels.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.pixels.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.pixels.iter().zip(&y.pixels).map(|(a, b)| a * b).collect();

    let mu_x = filter(&x.pixels);
    let mu_y = filter(&y.pixels);
    let e_xx = filter(&xx);
    let e_yy = filter(&yy);
    let e_xy = filter(&xy);

    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            Moments {
                mean_x: mx,
                mean_y: my,
                var_x: e_xx[i] - mx * mx,
                var_y: e_yy[i] - my * my,
                cov_xy: e_xy[i] - mx * my,
            }
            .ssim(c1, c2)
        })
        .sum();
    total / mu_x.len() as f64
}
