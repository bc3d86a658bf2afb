//! Hierarchical noise: uniform noise sampled at dyadic scales `2^0 .. 2^d_max`,
//! upscaled to a common side and mixed with softmax-normalised weights.
//!
//! Draw order from the stream is part of the output contract: first the
//! `d_max + 1` standard-normal coefficients, then the noise planes for
//! `d = 0, 1, ..., d_max`, each in CHW order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{MixWeights, PriorImage};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpscaleMode {
    #[default]
    Nearest,
    Bilinear,
}

impl std::str::FromStr for UpscaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(UpscaleMode::Nearest),
            "bilinear" => Ok(UpscaleMode::Bilinear),
            other => Err(Error::invalid(format!("unknown upscale mode {other:?}"))),
        }
    }
}

/// Smallest `d` with `2^d >= max(height, width)`.
pub fn compute_dmax(height: usize, width: usize) -> Result<u32> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be positive, got {height}x{width}"
        )));
    }
    let side = height.max(width);
    Ok(side.next_power_of_two().trailing_zeros())
}

/// The set of dyadic scales needed to cover a target image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalePlan {
    d_max: u32,
    upscale_mode: UpscaleMode,
}

impl ScalePlan {
    pub fn for_target(height: usize, width: usize, upscale_mode: UpscaleMode) -> Result<Self> {
        Ok(Self {
            d_max: compute_dmax(height, width)?,
            upscale_mode,
        })
    }

    pub fn with_dmax(d_max: u32, upscale_mode: UpscaleMode) -> Self {
        Self { d_max, upscale_mode }
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn upscale_mode(&self) -> UpscaleMode {
        self.upscale_mode
    }

    /// Side lengths `[1, 2, 4, ..., 2^d_max]`.
    pub fn scales(&self) -> Vec<usize> {
        (0..=self.d_max).map(|d| 1usize << d).collect()
    }

    pub fn output_side(&self) -> usize {
        1 << self.d_max
    }
}

/// `C × 2^d × 2^d` image of i.i.d. uniform draws.
pub fn sample_scale_noise(rng: &mut RngStream, channels: usize, d: u32) -> Result<PriorImage> {
    if channels == 0 {
        return Err(Error::invalid("channels must be positive"));
    }
    if d > 16 {
        return Err(Error::invalid(format!("scale exponent {d} is too large")));
    }
    let side = 1usize << d;
    let data = (0..channels * side * side).map(|_| rng.uniform_f32()).collect();
    Ok(PriorImage::from_trusted(channels, side, side, data))
}

/// Upscales a square image to `target_side × target_side`.
///
/// Bilinear mode uses half-pixel centres (`align_corners = false`) with edge
/// clamping, so a constant plane stays constant and no value leaves `[0, 1]`.
pub fn upscale(img: &PriorImage, target_side: usize, mode: UpscaleMode) -> Result<PriorImage> {
    let src = img.height();
    if img.width() != src {
        return Err(Error::invalid(format!(
            "upscale expects a square image, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    if target_side < src {
        return Err(Error::invalid(format!(
            "target side {target_side} is smaller than source side {src}"
        )));
    }
    let channels = img.channels();
    let mut out = Vec::with_capacity(channels * target_side * target_side);
    match mode {
        UpscaleMode::Nearest => {
            let map: Vec<usize> = (0..target_side).map(|t| t * src / target_side).collect();
            for c in 0..channels {
                let plane = img.plane(c);
                for &sy in &map {
                    let row = &plane[sy * src..(sy + 1) * src];
                    out.extend(map.iter().map(|&sx| row[sx]));
                }
            }
        }
        UpscaleMode::Bilinear => {
            let scale = src as f64 / target_side as f64;
            let taps: Vec<(usize, usize, f32)> = (0..target_side)
                .map(|t| {
                    let pos = ((t as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(src - 1);
                    (lo, hi, (pos - lo as f64) as f32)
                })
                .collect();
            for c in 0..channels {
                let plane = img.plane(c);
                for &(y0, y1, fy) in &taps {
                    for &(x0, x1, fx) in &taps {
                        let top = plane[y0 * src + x0] * (1.0 - fx) + plane[y0 * src + x1] * fx;
                        let bot = plane[y1 * src + x0] * (1.0 - fx) + plane[y1 * src + x1] * fx;
                        out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
                    }
                }
            }
        }
    }
    Ok(PriorImage::from_trusted(channels, target_side, target_side, out))
}

/// Draws coefficients and per-scale noise, then mixes the upscaled planes.
pub fn mix_hierarchical(
    rng: &mut RngStream,
    channels: usize,
    plan: &ScalePlan,
) -> Result<(PriorImage, MixWeights)> {
    let raw: Vec<f64> = (0..=plan.d_max()).map(|_| rng.standard_normal()).collect();
    let weights = MixWeights::from_raw(raw)?;
    let img = mix_with_weights(rng, channels, plan, &weights)?;
    Ok((img, weights))
}

/// Same as [`mix_hierarchical`] but with caller-supplied weights; only noise is drawn.
pub fn mix_with_weights(
    rng: &mut RngStream,
    channels: usize,
    plan: &ScalePlan,
    weights: &MixWeights,
) -> Result<PriorImage> {
    if weights.len() != plan.d_max() as usize + 1 {
        return Err(Error::invalid(format!(
            "expected {} weights, got {}",
            plan.d_max() + 1,
            weights.len()
        )));
    }
    let side = plan.output_side();
    let mut acc = vec![0.0f32; channels * side * side];
    for (d, &w) in (0..=plan.d_max()).zip(weights.normalized()) {
        let noise = sample_scale_noise(rng, channels, d)?;
        let up = upscale(&noise, side, plan.upscale_mode())?;
        let w = w as f32;
        for (a, &v) in acc.iter_mut().zip(up.data()) {
            *a += w * v;
        }
    }
    // Rounding of a convex combination can overshoot by an ulp.
    for v in &mut acc {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(PriorImage::from_trusted(channels, side, side, acc))
}
