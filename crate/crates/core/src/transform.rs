//! Geometric warps applied to hierarchical noise: rotation, elastic
//! deformation, then cropping to the requested output size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PriorImage;
use crate::resample::{bilinear_reflect, convolve_separable, gaussian_kernel};
use crate::rng::RngStream;

pub const MAX_ROTATION_DEG: f64 = 45.0;

/// Displacement magnitude and smoothing radius of the elastic warp, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl ElasticParams {
    /// `alpha = 8`, `sigma = 4` at side 32, scaled linearly with the side.
    pub fn default_for_side(side: usize) -> Self {
        let scale = side as f64 / 32.0;
        Self {
            alpha: 8.0 * scale,
            sigma: 4.0 * scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!("elastic alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("elastic sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Concrete parameters of one nonlinear transform draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformParams {
    pub rotation_deg: f64,
    pub elastic: ElasticParams,
    pub crop_top: usize,
    pub crop_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl TransformParams {
    /// Draws the rotation angle and crop offsets. The elastic field is drawn later, when applied.
    pub fn sample(
        rng: &mut RngStream,
        src_h: usize,
        src_w: usize,
        out_h: usize,
        out_w: usize,
        elastic: ElasticParams,
    ) -> Result<Self> {
        check_window(src_h, src_w, 0, 0, out_h, out_w)?;
        let rotation_deg = rng.uniform_range(-MAX_ROTATION_DEG, MAX_ROTATION_DEG);
        let crop_top = rng.index_below((src_h - out_h + 1) as u32) as usize;
        let crop_left = rng.index_below((src_w - out_w + 1) as u32) as usize;
        Ok(Self {
            rotation_deg,
            elastic,
            crop_top,
            crop_left,
            out_h,
            out_w,
        })
    }

    pub fn validate(&self, src_h: usize, src_w: usize) -> Result<()> {
        check_angle(self.rotation_deg)?;
        self.elastic.validate()?;
        check_window(src_h, src_w, self.crop_top, self.crop_left, self.out_h, self.out_w)
    }
}

fn check_angle(angle_deg: f64) -> Result<()> {
    if !(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG).contains(&angle_deg) {
        return Err(Error::invalid(format!(
            "rotation angle {angle_deg} is outside [-45, 45]"
        )));
    }
    Ok(())
}

fn check_window(h: usize, w: usize, top: usize, left: usize, out_h: usize, out_w: usize) -> Result<()> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("crop size must be positive"));
    }
    if top + out_h > h || left + out_w > w {
        return Err(Error::invalid(format!(
            "crop window {out_h}x{out_w} at ({top}, {left}) exceeds {h}x{w} source"
        )));
    }
    Ok(())
}

/// Rotates about the image centre with bilinear resampling and reflected borders.
pub fn rotate(img: &PriorImage, angle_deg: f64) -> Result<PriorImage> {
    check_angle(angle_deg)?;
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;

    // Inverse map: output pixel -> source coordinate.
    let coords: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                let dy = y as f64 - cy;
                let dx = x as f64 - cx;
                (-sin * dx + cos * dy + cy, cos * dx + sin * dy + cx)
            })
        })
        .collect();
    Ok(warp(img, &coords, c, h, w))
}

fn warp(img: &PriorImage, coords: &[(f64, f64)], c: usize, h: usize, w: usize) -> PriorImage {
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let plane = img.plane(ch);
        out.extend(
            coords
                .iter()
                .map(|&(sy, sx)| bilinear_reflect(plane, h, w, sy, sx).clamp(0.0, 1.0)),
        );
    }
    PriorImage::from_trusted(c, h, w, out)
}

/// Random elastic deformation.
///
/// Two `h × w` fields of uniform `[-1, 1]` draws (first `dx`, then `dy`, row
/// major) are Gaussian-smoothed with `sigma`, scaled by `alpha`, and used as
/// per-pixel displacements.
pub fn elastic(img: &PriorImage, rng: &mut RngStream, alpha: f64, sigma: f64) -> Result<PriorImage> {
    ElasticParams { alpha, sigma }.validate()?;
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let n = h * w;
    let mut field = || -> Vec<f32> { (0..n).map(|_| rng.uniform_range(-1.0, 1.0) as f32).collect() };
    let raw_dx = field();
    let raw_dy = field();

    let kernel = gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize);
    let dx = convolve_separable(&raw_dx, h, w, &kernel);
    let dy = convolve_separable(&raw_dy, h, w, &kernel);

    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (y, x) = (i / w, i % w);
            (
                y as f64 + alpha * dy[i] as f64,
                x as f64 + alpha * dx[i] as f64,
            )
        })
        .collect();
    Ok(warp(img, &coords, c, h, w))
}

/// Exact sub-window copy.
pub fn crop(img: &PriorImage, top: usize, left: usize, out_h: usize, out_w: usize) -> Result<PriorImage> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    check_window(h, w, top, left, out_h, out_w)?;
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in top..top + out_h {
            out.extend_from_slice(&plane[y * w + left..y * w + left + out_w]);
        }
    }
    Ok(PriorImage::from_trusted(c, out_h, out_w, out))
}

/// Rotation, then elastic deformation, then cropping, with freshly drawn parameters.
pub fn apply_nonlinear(
    img: &PriorImage,
    rng: &mut RngStream,
    out_h: usize,
    out_w: usize,
    elastic_params: ElasticParams,
) -> Result<PriorImage> {
    let params = TransformParams::sample(rng, img.height(), img.width(), out_h, out_w, elastic_params)?;
    apply_params(img, rng, &params)
}

/// Applies pre-drawn parameters; only the elastic field is drawn from `rng`.
pub fn apply_params(img: &PriorImage, rng: &mut RngStream, params: &TransformParams) -> Result<PriorImage> {
    params.validate(img.height(), img.width())?;
    let rotated = rotate(img, params.rotation_deg)?;
    let warped = elastic(&rotated, rng, params.elastic.alpha, params.elastic.sigma)?;
    crop(&warped, params.crop_top, params.crop_left, params.out_h, params.out_w)
}
