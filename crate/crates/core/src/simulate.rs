//! Noise-injection simulation: a random square of Gaussian noise pixels, or
//! diffuse clusters selected from a smoothed random field. The replaced
//! pixels form the region of interest (ROI).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::attention::min_max_normalize;
use crate::bootstrap::{channel_stats, ChannelStats};
use crate::dump::{Manifest, Role};
use crate::error::{ensure_same_len, Error, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::{self, Stream};
use crate::stats;

/// Mean ROI z-statistics beyond this magnitude fail the ROI filter.
pub const Z_FILTER_LIMIT: f64 = 1.0;

/// Boolean per-pixel membership, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    height: usize,
    width: usize,
    member: Vec<bool>,
    count: usize,
}

impl RoiMask {
    pub fn new(height: usize, width: usize, member: Vec<bool>) -> Result<Self> {
        ensure_same_len("ROI mask", height * width, member.len())?;
        let count = member.iter().filter(|&&m| m).count();
        Ok(RoiMask {
            height,
            width,
            member,
            count,
        })
    }

    pub fn from_indices(height: usize, width: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut member = vec![false; height * width];
        for i in indices {
            *member.get_mut(i).ok_or_else(|| {
                Error::Shape(format!("mask index {i} outside {height}x{width}"))
            })? = true;
        }
        RoiMask::new(height, width, member)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Total pixel count (not the ROI size; see [`RoiMask::count`]).
    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    /// Indices of ROI pixels, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    /// Splits `values` into (ROI, rest).
    pub fn split(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut roi = Vec::with_capacity(self.count);
        let mut rest = Vec::with_capacity(self.member.len() - self.count);
        for (&v, &m) in values.iter().zip(&self.member) {
            if m {
                roi.push(v);
            } else {
                rest.push(v);
            }
        }
        (roi, rest)
    }

    pub fn to_manifest(&self) -> Manifest {
        Manifest::new(Role::Mask, vec![self.height, self.width])
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }

    /// Any nonzero value is a member.
    pub fn from_dump(dump: &crate::dump::Dump) -> Result<Self> {
        if dump.manifest.role != Role::Mask {
            return Err(Error::RoleMismatch {
                expected: Role::Mask,
                found: dump.manifest.role,
            });
        }
        match dump.manifest.shape.as_slice() {
            [h, w] => RoiMask::new(*h, *w, dump.data.iter().map(|&v| v != 0.0).collect()),
            other => Err(Error::Shape(format!("mask shape must be [h, w], got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Square,
    Diffuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Side of the square ROI in pixels.
    pub square_size: usize,
    /// Clustering parameter of the diffuse field's frequency filter.
    pub lambda: f64,
    /// Number of diffuse ROI pixels.
    pub pixel_count: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kind: NoiseKind::Square,
            square_size: 100,
            lambda: 20.0,
            pixel_count: 100 * 100,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.square_size == 0 || self.pixel_count == 0 {
            return Err(Error::InvalidArgument("noise size must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

fn fill_noise(image: &Image, stats: &ChannelStats, mask: &RoiMask, rng: &mut Stream) -> Image {
    let mut data = image.data().to_vec();
    for i in mask.indices() {
        for c in 0..CHANNELS {
            let z = rng::standard_normal(rng);
            data[i * CHANNELS + c] = (stats.mean[c] + stats.std[c] * z).clamp(0.0, 1.0);
        }
    }
    Image::from_parts(image.height(), image.width(), data)
}

/// Replaces a uniformly placed `s x s` square with per-channel Gaussian noise
/// matching the image's channel statistics. Returns the perturbed image, the
/// mask and the square's top-left corner `(row, col)`.
pub fn inject_square_at(image: &Image, spec: &NoiseSpec) -> Result<(Image, RoiMask, (usize, usize))> {
    spec.validate()?;
    let s = spec.square_size;
    let (h, w) = (image.height(), image.width());
    if h < s || w < s {
        return Err(Error::InvalidArgument(format!(
            "{s}x{s} square does not fit in a {h}x{w} image"
        )));
    }
    let mut rng = rng::stream(spec.seed);
    let col = rng::below(&mut rng, (w - s + 1) as u64) as usize;
    let row = rng::below(&mut rng, (h - s + 1) as u64) as usize;
    let mask = RoiMask::from_indices(
        h,
        w,
        (row..row + s).flat_map(|r| (col..col + s).map(move |c| r * w + c)),
    )?;
    let perturbed = fill_noise(image, &channel_stats(image), &mask, &mut rng);
    Ok((perturbed, mask, (row, col)))
}

pub fn inject_square(image: &Image, spec: &NoiseSpec) -> Result<(Image, RoiMask)> {
    inject_square_at(image, spec).map(|(img, mask, _)| (img, mask))
}

/// Signed frequency of FFT bin `k` of an `n`-point transform, in cycles per
/// sample, within `[-0.5, 0.5)`.
fn frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k < n_f / 2.0 {
        k / n_f
    } else {
        (k - n_f) / n_f
    }
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = buf[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            buf[r * w + c] = column[r];
        }
    }
}

/// Standard-normal field smoothed in the frequency domain by
/// `exp(-(fx^2 + fy^2) * lambda^2)` (frequencies in cycles/pixel), then
/// min-max normalized.
pub fn diffuse_field(height: usize, width: usize, lambda: f64, rng: &mut Stream) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..height * width)
        .map(|_| Complex::new(rng::standard_normal(rng), 0.0))
        .collect();
    if lambda > 0.0 {
        let mut planner = FftPlanner::new();
        fft2(&mut buf, height, width, &mut planner, false);
        let l2 = lambda * lambda;
        for r in 0..height {
            let fy = frequency(r, height);
            for c in 0..width {
                let fx = frequency(c, width);
                buf[r * width + c] *= (-(fx * fx + fy * fy) * l2).exp();
            }
        }
        fft2(&mut buf, height, width, &mut planner, true);
    }
    let mut field: Vec<f64> = buf.into_iter().map(|v| v.re).collect();
    min_max_normalize(&mut field);
    field
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order.truncate(k);
    order
}

/// ROI from the top `pixel_count` values of a smoothed random field, filled
/// with the same channel-statistics noise as the square protocol.
pub fn diffuse_roi(image: &Image, spec: &NoiseSpec) -> Result<(Image, RoiMask)> {
    spec.validate()?;
    let (h, w) = (image.height(), image.width());
    if spec.pixel_count > h * w {
        return Err(Error::InvalidArgument(format!(
            "{} ROI pixels requested from a {h}x{w} image",
            spec.pixel_count
        )));
    }
    let mut rng = rng::stream(spec.seed);
    let field = diffuse_field(h, w, spec.lambda, &mut rng);
    let mask = RoiMask::from_indices(h, w, top_k_indices(&field, spec.pixel_count))?;
    let perturbed = fill_noise(image, &channel_stats(image), &mask, &mut rng);
    Ok((perturbed, mask))
}

/// Dispatches on `spec.kind`.
pub fn inject(image: &Image, spec: &NoiseSpec) -> Result<(Image, RoiMask)> {
    match spec.kind {
        NoiseKind::Square => inject_square(image, spec),
        NoiseKind::Diffuse => diffuse_roi(image, spec),
    }
}

/// Mean z-statistic over ROI pixels.
pub fn mean_roi_z(z: &[f64], mask: &RoiMask) -> Result<f64> {
    ensure_same_len("ROI z", z.len(), mask.len())?;
    if mask.is_empty() {
        return Err(Error::InvalidArgument("empty ROI mask".into()));
    }
    let inside: Vec<f64> = mask.indices().map(|i| z[i]).collect();
    Ok(stats::mean(&inside))
}

/// `|mean_z| <= 1`.
pub fn passes_z_filter(mean_z: f64) -> bool {
    mean_z.abs() <= Z_FILTER_LIMIT
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| [r as f64 / h as f64, c as f64 / w as f64, 0.5]).unwrap()
    }

    #[test]
    fn square_mask_and_bounds() {
        let img = gradient(480, 480);
        for seed in 0..20 {
            let spec = NoiseSpec {
                seed,
                ..Default::default()
            };
            let (_, mask, (r, c)) = inject_square_at(&img, &spec).unwrap();
            assert_eq!(mask.count(), 10_000);
            assert!(r <= 380 && c <= 380);
        }
    }

    #[test]
    fn square_too_large() {
        let img = gradient(99, 200);
        assert!(inject_square(&img, &NoiseSpec::default()).is_err());
    }

    #[test]
    fn outside_roi_untouched() {
        let img = gradient(64, 80);
        let spec = NoiseSpec {
            square_size: 20,
            seed: 3,
            ..Default::default()
        };
        let (out, mask) = inject_square(&img, &spec).unwrap();
        for (i, (a, b)) in img.pixels().zip(out.pixels()).enumerate() {
            if !mask.contains(i) {
                assert_eq!(a, b);
            }
        }
        assert_eq!(inject_square(&img, &spec).unwrap().0, out);
    }

    #[test]
    fn diffuse_count_exact() {
        let img = gradient(96, 128);
        let spec = NoiseSpec {
            kind: NoiseKind::Diffuse,
            pixel_count: 777,
            seed: 5,
            ..Default::default()
        };
        let (_, mask) = diffuse_roi(&img, &spec).unwrap();
        assert_eq!(mask.count(), 777);
        let too_many = NoiseSpec {
            pixel_count: 96 * 128 + 1,
            ..spec
        };
        assert!(diffuse_roi(&img, &too_many).is_err());
    }

    #[test]
    fn lambda_zero_is_raw_field() {
        let mut a = rng::stream(9);
        let field = diffuse_field(8, 8, 0.0, &mut a);
        let mut b = rng::stream(9);
        let mut raw: Vec<f64> = (0..64).map(|_| rng::standard_normal(&mut b)).collect();
        min_max_normalize(&mut raw);
        assert_eq!(field, raw);
    }

    #[test]
    fn fft_round_trip_without_filter_is_identity() {
        let mut rng = rng::stream(1);
        let orig: Vec<Complex<f64>> = (0..12 * 10)
            .map(|_| Complex::new(rng::standard_normal(&mut rng), 0.0))
            .collect();
        let mut buf = orig.clone();
        let mut planner = FftPlanner::new();
        fft2(&mut buf, 12, 10, &mut planner, false);
        fft2(&mut buf, 12, 10, &mut planner, true);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a.re - b.re / 120.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frequencies_are_centered() {
        assert_eq!(frequency(0, 4), 0.0);
        assert_eq!(frequency(1, 4), 0.25);
        assert_eq!(frequency(2, 4), -0.5);
        assert_eq!(frequency(3, 4), -0.25);
        assert_eq!(frequency(2, 5), 0.4);
        assert_eq!(frequency(3, 5), -0.4);
    }

    #[test]
    fn top_k_ties_by_index() {
        assert_eq!(top_k_indices(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(top_k_indices(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    }

    #[test]
    fn mean_roi_z_examples() {
        let mask = RoiMask::new(1, 4, vec![true, true, true, false]).unwrap();
        assert!((mean_roi_z(&[0.2, 0.4, 0.9, 100.0], &mask).unwrap() - 0.5).abs() < 1e-15);
        let two = RoiMask::new(1, 2, vec![true, true]).unwrap();
        assert_eq!(mean_roi_z(&[-1.0, 1.0], &two).unwrap(), 0.0);
        assert_eq!(mean_roi_z(&[2.5, 2.5], &two).unwrap(), 2.5);
        let empty = RoiMask::new(1, 2, vec![false, false]).unwrap();
        assert!(mean_roi_z(&[0.0, 0.0], &empty).is_err());
    }

    #[test]
    fn z_filter_boundary() {
        assert!(passes_z_filter(1.0));
        assert!(passes_z_filter(-1.0));
        assert!(!passes_z_filter(-1.2));
        assert!(passes_z_filter(0.54));
    }
}
