//! Pixel buffers and mixing weights shared by every synthesis stage.

use crate::error::{Error, Result};

/// A `C × H × W` image with every value in `[0, 1]`, stored in CHW order.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PriorImage {
    /// Validates shape and range.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(channels, height, width)?;
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "element {pos} = {} is outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Constant-valued image.
    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        check_dims(channels, height, width)?;
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    /// Single-colour image, one value per channel.
    pub fn monochrome(color: &[f32], height: usize, width: usize) -> Result<Self> {
        check_dims(color.len(), height, width)?;
        let plane = height * width;
        let mut data = Vec::with_capacity(color.len() * plane);
        for &c in color {
            data.extend(std::iter::repeat_n(c, plane));
        }
        Self::new(color.len(), height, width, data)
    }

    /// Builds an image from values known to lie in `[0, 1]`. Checked in debug builds only.
    pub(crate) fn from_trusted(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// A single-plane `H × W` field in `[0, 1]` used to blend image pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticMask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl SemanticMask {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(1, height, width)?;
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "mask length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "mask element {pos} = {} is outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        check_dims(1, height, width)?;
        Self::new(height, width, vec![value; height * width])
    }

    pub(crate) fn from_trusted(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

fn check_dims(channels: usize, height: usize, width: usize) -> Result<()> {
    if channels == 0 || height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {channels}x{height}x{width}"
        )));
    }
    Ok(())
}

/// Raw per-scale coefficients and their softmax-normalised weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MixWeights {
    raw: Vec<f64>,
    normalized: Vec<f64>,
}

impl MixWeights {
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let normalized = softmax(&raw)?;
        Ok(Self { raw, normalized })
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Max-subtracted softmax.
pub fn softmax(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("softmax input {pos} is not finite")));
    }
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Clamps every element into `[0, 1]`. Non-finite input signals an upstream bug.
pub fn clamp01(channels: usize, height: usize, width: usize, mut data: Vec<f32>) -> Result<PriorImage> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Internal(format!("non-finite pixel at element {pos}")));
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    PriorImage::new(channels, height, width, data)
}
