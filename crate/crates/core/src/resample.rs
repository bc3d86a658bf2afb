//! Plane-level sampling helpers: reflection indexing, bilinear lookup and
//! separable Gaussian smoothing. Planes are row-major `h × w` slices.

/// Mirrors `i` into `0..n` without repeating the edge sample (`d c b | a b c d | c b a`).
#[inline]
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as i64;
    let period = 2 * (n - 1);
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - r;
    }
    r as usize
}

/// Bilinear lookup at fractional `(y, x)` with reflected borders.
#[inline]
pub(crate) fn bilinear_reflect(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f32 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = (y - y0) as f32;
    let fx = (x - x0) as f32;
    let (y0, x0) = (y0 as i64, x0 as i64);
    let r0 = reflect_index(y0, h) * w;
    let r1 = reflect_index(y0 + 1, h) * w;
    let c0 = reflect_index(x0, w);
    let c1 = reflect_index(x0 + 1, w);
    let top = plane[r0 + c0] * (1.0 - fx) + plane[r0 + c1] * fx;
    let bottom = plane[r1 + c0] * (1.0 - fx) + plane[r1 + c1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Normalised 1-D Gaussian taps of length `2 * radius + 1`.
pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f32> {
    let taps: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| (t / total) as f32).collect()
}

/// Separable convolution with reflected borders.
pub(crate) fn convolve_separable(plane: &[f32], h: usize, w: usize, kernel: &[f32]) -> Vec<f32> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &tap) in kernel.iter().enumerate() {
                acc += tap * row[reflect_index(x as i64 + k as i64 - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for (k, &tap) in kernel.iter().enumerate() {
            let src = reflect_index(y as i64 + k as i64 - radius, h) * w;
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(&tmp[src..src + w]) {
                *d += tap * s;
            }
        }
    }
    out
}
