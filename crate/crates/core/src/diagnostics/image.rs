//! Image quality metrics on `H×W` or channel-last `H×W×C` tensors.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, shape_mismatch, Result};
use crate::math;
use crate::tensor::DenseTensor;

/// `10·log₁₀(max² / MSE)`; `+∞` when the images agree.
pub fn psnr(truth: &DenseTensor, estimate: &DenseTensor, max_value: f64) -> Result<f64> {
    let all = alloc::vec![true; truth.values().len()];
    psnr_masked(truth, estimate, &all, max_value)
}

/// PSNR over the entries whose flag in `include` is set.
pub fn psnr_masked(truth: &DenseTensor, estimate: &DenseTensor, include: &[bool], max_value: f64) -> Result<f64> {
    check_pair(truth, estimate)?;
    if include.len() != truth.values().len() {
        return Err(shape_mismatch("selection does not match the image"));
    }
    if !(max_value > 0.0) {
        return Err(invalid("max_value must be positive"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((a, b), &keep) in truth.values().iter().zip(estimate.values()).zip(include) {
        if keep {
            sum += (a - b) * (a - b);
            count += 1;
        }
    }
    if count == 0 {
        return Err(invalid("no entries selected"));
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(max_value * max_value / mse))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Side of the square window; odd.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 255.0 }
    }
}

impl SsimParams {
    /// Normalized separable Gaussian taps.
    fn taps(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - c;
                math::exp(-d * d / (2.0 * self.sigma * self.sigma))
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Mean local SSIM over every window position lying fully inside the image,
/// computed per channel and averaged.
pub fn ssim(truth: &DenseTensor, estimate: &DenseTensor, params: &SsimParams) -> Result<f64> {
    let all = alloc::vec![true; truth.values().len()];
    ssim_masked(truth, estimate, &all, params)
}

/// Mean local SSIM over the windows whose center entry is selected.
pub fn ssim_masked(truth: &DenseTensor, estimate: &DenseTensor, include: &[bool], params: &SsimParams) -> Result<f64> {
    check_pair(truth, estimate)?;
    if include.len() != truth.values().len() {
        return Err(shape_mismatch("selection does not match the image"));
    }
    if params.window.is_multiple_of(2) || !(params.sigma > 0.0) || !(params.dynamic_range > 0.0) {
        return Err(invalid("window must be odd; sigma and dynamic range positive"));
    }
    let dims = truth.dims();
    let (h, w, c) = match *dims {
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => return Err(invalid(format!("expected an HxW or HxWxC image, got {dims:?}"))),
    };
    let win = params.window;
    if h < win || w < win {
        return Err(invalid(format!("image {h}x{w} is smaller than the {win}x{win} window")));
    }
    let taps = params.taps();
    let c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
    let c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
    let (x, y) = (truth.values(), estimate.values());
    let at = |i: usize, j: usize, ch: usize| (i * w + j) * c + ch;
    let half = win / 2;

    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        for i0 in 0..=h - win {
            for j0 in 0..=w - win {
                if !include[at(i0 + half, j0 + half, ch)] {
                    continue;
                }
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (di, &ti) in taps.iter().enumerate() {
                    for (dj, &tj) in taps.iter().enumerate() {
                        let g = ti * tj;
                        let k = at(i0 + di, j0 + dj, ch);
                        mx += g * x[k];
                        my += g * y[k];
                        sxx += g * x[k] * x[k];
                        syy += g * y[k] * y[k];
                        sxy += g * x[k] * y[k];
                    }
                }
                let vx = sxx - mx * mx;
                let vy = syy - my * my;
                let cxy = sxy - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(invalid("no window centers selected"));
    }
    Ok(total / count as f64)
}

fn check_pair(truth: &DenseTensor, estimate: &DenseTensor) -> Result<()> {
    if truth.shape() != estimate.shape() {
        return Err(shape_mismatch(format!("images differ in shape: {:?} vs {:?}", truth.dims(), estimate.dims())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image(dims: &[usize], f: impl FnMut(&[usize]) -> f64) -> DenseTensor {
        DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), f).unwrap()
    }

    /// Two-pass windowed statistics with an unnormalized 2-D kernel.
    fn reference_ssim(x: &DenseTensor, y: &DenseTensor) -> f64 {
        let (h, w, c) = (x.dims()[0], x.dims()[1], x.dims()[2]);
        let mut kernel = [[0.0f64; 11]; 11];
        let mut ksum = 0.0;
        for (a, row) in kernel.iter_mut().enumerate() {
            for (b, k) in row.iter_mut().enumerate() {
                let (da, db) = (a as f64 - 5.0, b as f64 - 5.0);
                *k = (-(da * da + db * db) / 4.5).exp();
                ksum += *k;
            }
        }
        let (c1, c2) = (6.5025, 58.5225);
        let mut acc = 0.0;
        let mut n = 0.0;
        for ch in 0..c {
            for i in 0..=h - 11 {
                for j in 0..=w - 11 {
                    let mut mu = [0.0f64; 2];
                    for a in 0..11 {
                        for b in 0..11 {
                            let g = kernel[a][b] / ksum;
                            mu[0] += g * x.get(&[i + a, j + b, ch]);
                            mu[1] += g * y.get(&[i + a, j + b, ch]);
                        }
                    }
                    let mut cov = [0.0f64; 3];
                    for a in 0..11 {
                        for b in 0..11 {
                            let g = kernel[a][b] / ksum;
                            let dx = x.get(&[i + a, j + b, ch]) - mu[0];
                            let dy = y.get(&[i + a, j + b, ch]) - mu[1];
                            cov[0] += g * dx * dx;
                            cov[1] += g * dy * dy;
                            cov[2] += g * dx * dy;
                        }
                    }
                    acc += ((2.0 * mu[0] * mu[1] + c1) * (2.0 * cov[2] + c2))
                        / ((mu[0] * mu[0] + mu[1] * mu[1] + c1) * (cov[0] + cov[1] + c2));
                    n += 1.0;
                }
            }
        }
        acc / n
    }

    #[test]
    fn identical_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let x = image(&[16, 14, 3], |_| rng.random::<f64>() * 255.0);
        assert_eq!(psnr(&x, &x, 255.0).unwrap(), f64::INFINITY);
        assert!((ssim(&x, &x, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_psnr() {
        let x = image(&[12, 12, 3], |_| 100.0);
        let y = image(&[12, 12, 3], |_| 110.0);
        let expected = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
        assert!((psnr(&x, &y, 255.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 28.13).abs() < 5e-3);
    }

    #[test]
    fn ssim_matches_window_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let x = image(&[20, 17, 3], |_| rng.random::<f64>() * 255.0);
        let y = image(&[20, 17, 3], |i| x.get(i) * 0.7 + 40.0 * rng.random::<f64>());
        let got = ssim(&x, &y, &SsimParams::default()).unwrap();
        assert!((got - reference_ssim(&x, &y)).abs() < 1e-6);
        assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn masked_variants_select_entries() {
        let x = image(&[12, 12], |i| (i[0] * 12 + i[1]) as f64);
        let y = image(&[12, 12], |i| if i[0] < 6 { (i[0] * 12 + i[1]) as f64 } else { 0.0 });
        let top: Vec<bool> = (0..144).map(|k| k / 12 < 6).collect();
        assert_eq!(psnr_masked(&x, &y, &top, 255.0).unwrap(), f64::INFINITY);
        let bottom: Vec<bool> = top.iter().map(|b| !b).collect();
        assert!(psnr_masked(&x, &y, &bottom, 255.0).unwrap().is_finite());
        // 2x2 valid window centers; the (5,5) and (5,6) ones see rows 0..=10
        let center_rows_5: Vec<bool> = (0..144).map(|k| k / 12 == 5).collect();
        let s = ssim_masked(&x, &y, &center_rows_5, &SsimParams::default()).unwrap();
        assert!(s < 1.0);
        assert!(ssim_masked(&x, &y, &[false; 144], &SsimParams::default()).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = image(&[12, 12], |_| 1.0);
        let y = image(&[12, 13], |_| 1.0);
        assert!(psnr(&x, &y, 255.0).is_err());
        assert!(ssim(&x, &y, &SsimParams::default()).is_err());
        let small = image(&[10, 12], |_| 1.0);
        assert!(ssim(&small, &small, &SsimParams::default()).is_err());
    }
}
