//! Semantic cutmixing.
//!
//! A uniform-noise mask is refined by alternating a Gaussian blur with the
//! diverging filter until it settles into smooth, nearly binary regions, and
//! the refined mask blends two images drawn from the transformed-noise pool
//! or from random monochrome images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{PriorImage, SemanticMask};
use crate::resample::{convolve_separable, gaussian_kernel};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRefineConfig {
    /// Stop once the mean absolute update drops below this.
    pub epsilon: f64,
    pub max_iters: u32,
    pub blur_sigma: f64,
    /// Odd kernel side, at least 3.
    pub blur_kernel: usize,
}

impl Default for MaskRefineConfig {
    fn default() -> Self {
        Self::default_for_side(32)
    }
}

impl MaskRefineConfig {
    /// Kernel 5 and sigma 1.5 at side 32; sigma scales with the side and the
    /// kernel keeps the same radius-to-sigma ratio.
    pub fn default_for_side(side: usize) -> Self {
        let blur_sigma = 1.5 * side as f64 / 32.0;
        let radius = ((blur_sigma * 4.0 / 3.0).round() as usize).max(1);
        Self {
            epsilon: 1e-2,
            max_iters: 50,
            blur_sigma,
            blur_kernel: 2 * radius + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma > 0.0) {
            return Err(Error::invalid(format!("blur sigma must be > 0, got {}", self.blur_sigma)));
        }
        if self.blur_kernel < 3 || self.blur_kernel % 2 == 0 {
            return Err(Error::invalid(format!(
                "blur kernel must be odd and >= 3, got {}",
                self.blur_kernel
            )));
        }
        Ok(())
    }
}

#[inline]
fn diverge(m: f32) -> f32 {
    if m < 0.5 {
        2.0 * m * m
    } else {
        let d = m - 1.0;
        1.0 - 2.0 * d * d
    }
}

/// Piecewise-quadratic map pushing values away from 0.5 toward 0 or 1.
///
/// `2m²` below 0.5 and `1 − 2(m − 1)²` from 0.5 up. Both branches meet at
/// 0.5 with slope 2, and the fixed points are exactly 0, 0.5 and 1.
pub fn diverging_value(m: f32) -> Result<f32> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::invalid(format!("mask value {m} is outside [0, 1]")));
    }
    Ok(diverge(m))
}

pub fn diverging_filter(mask: &SemanticMask) -> SemanticMask {
    let data = mask.data().iter().map(|&m| diverge(m).clamp(0.0, 1.0)).collect();
    SemanticMask::from_trusted(mask.height(), mask.width(), data)
}

/// Gaussian blur with reflected borders.
pub fn blur(mask: &SemanticMask, cfg: &MaskRefineConfig) -> Result<SemanticMask> {
    cfg.validate()?;
    let kernel = gaussian_kernel(cfg.blur_sigma, cfg.blur_kernel / 2);
    Ok(blur_with(mask, &kernel))
}

fn blur_with(mask: &SemanticMask, kernel: &[f32]) -> SemanticMask {
    let (h, w) = (mask.height(), mask.width());
    let data = convolve_separable(mask.data(), h, w, kernel)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    SemanticMask::from_trusted(h, w, data)
}

/// Result of iterating blur + diverging filter.
#[derive(Clone, Debug)]
pub struct RefinedMask {
    pub mask: SemanticMask,
    pub iterations: u32,
    /// Mean absolute update of each iteration, in order.
    pub updates: Vec<f64>,
    pub converged: bool,
}

/// Draws `m0 ~ U[0,1]^{h×w}` and refines it.
pub fn refine_mask(rng: &mut RngStream, h: usize, w: usize, cfg: &MaskRefineConfig) -> Result<RefinedMask> {
    if h == 0 || w == 0 {
        return Err(Error::invalid(format!("mask dimensions must be positive, got {h}x{w}")));
    }
    cfg.validate()?;
    let data = (0..h * w).map(|_| rng.uniform_f32()).collect();
    refine_from(SemanticMask::from_trusted(h, w, data), cfg)
}

/// Iterates `m ← divg(blur(m))` from the given start until the mean absolute
/// update is below `epsilon` or `max_iters` is reached.
pub fn refine_from(initial: SemanticMask, cfg: &MaskRefineConfig) -> Result<RefinedMask> {
    cfg.validate()?;
    let kernel = gaussian_kernel(cfg.blur_sigma, cfg.blur_kernel / 2);
    let mut mask = initial;
    let mut updates = Vec::new();
    for _ in 0..cfg.max_iters {
        let next = diverging_filter(&blur_with(&mask, &kernel));
        let delta = next
            .data()
            .iter()
            .zip(mask.data())
            .map(|(a, b)| (a - b).abs() as f64)
            .sum::<f64>()
            / next.data().len() as f64;
        mask = next;
        updates.push(delta);
        if delta < cfg.epsilon {
            return Ok(RefinedMask {
                mask,
                iterations: updates.len() as u32,
                updates,
                converged: true,
            });
        }
    }
    Ok(RefinedMask {
        mask,
        iterations: cfg.max_iters,
        updates,
        converged: false,
    })
}

/// `mask ⊙ a + (1 − mask) ⊙ b`, broadcast over channels.
pub fn cutmix(a: &PriorImage, b: &PriorImage, mask: &SemanticMask) -> Result<PriorImage> {
    if a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width() {
        return Err(Error::invalid(format!(
            "cutmix operands differ: {}x{}x{} vs {}x{}x{}",
            a.channels(),
            a.height(),
            a.width(),
            b.channels(),
            b.height(),
            b.width()
        )));
    }
    if mask.height() != a.height() || mask.width() != a.width() {
        return Err(Error::invalid(format!(
            "mask {}x{} does not match image {}x{}",
            mask.height(),
            mask.width(),
            a.height(),
            a.width()
        )));
    }
    let plane = a.height() * a.width();
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .map(|(i, (&x, &y))| {
            let m = mask.data()[i % plane];
            (m * x + (1.0 - m) * y).clamp(x.min(y), x.max(y))
        })
        .collect();
    Ok(PriorImage::from_trusted(a.channels(), a.height(), a.width(), data))
}

/// Random single-colour images.
#[derive(Clone, Debug, PartialEq)]
pub struct MonochromeSource {
    pub channels: usize,
    pub color: Vec<f32>,
}

impl MonochromeSource {
    /// Draws one uniform colour value per channel.
    pub fn sample(rng: &mut RngStream, channels: usize) -> Self {
        Self {
            channels,
            color: (0..channels).map(|_| rng.uniform_f32()).collect(),
        }
    }

    pub fn render(&self, height: usize, width: usize) -> Result<PriorImage> {
        PriorImage::monochrome(&self.color, height, width)
    }
}

/// A pool of nonlinear-transformed images; each call yields a fresh sample.
pub trait PriorSource {
    fn channels(&self) -> usize;
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn draw(&self, rng: &mut RngStream) -> Result<PriorImage>;
}

/// Which population a pair slot was filled from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Transformed,
    Monochrome,
}

/// Fills two slots independently: monochrome with probability `mono_prob`,
/// else a fresh draw from `pool`. Each slot consumes one uniform draw for the
/// coin before its content.
pub fn sample_pair<S: PriorSource + ?Sized>(
    rng: &mut RngStream,
    pool: &S,
    mono_prob: f64,
) -> Result<((PriorImage, SlotKind), (PriorImage, SlotKind))> {
    if !(0.0..=1.0).contains(&mono_prob) {
        return Err(Error::invalid(format!("mono_prob {mono_prob} is outside [0, 1]")));
    }
    let slot = |rng: &mut RngStream| -> Result<(PriorImage, SlotKind)> {
        if rng.uniform_f64() < mono_prob {
            let img = MonochromeSource::sample(rng, pool.channels()).render(pool.height(), pool.width())?;
            Ok((img, SlotKind::Monochrome))
        } else {
            Ok((pool.draw(rng)?, SlotKind::Transformed))
        }
    };
    let first = slot(rng)?;
    let second = slot(rng)?;
    Ok((first, second))
}
