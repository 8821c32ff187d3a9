//! Uncertainty statistics for attention scores against a bootstrap null.
//!
//! Observed scores `a_i` and pooled null scores `a*_ib` are standardized by
//! the null's mean and population standard deviation; p-values are right-tail
//! counts against the pooled null z-statistics, the local false discovery
//! rate is a histogram density ratio `f0 / f` (with `pi0 = 1`), and `pi0` is
//! estimated from the p-values with a lambda-grid median.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::{attention_for, AttentionSource, PixelAttentionMap};
use crate::bootstrap::{self, BootstrapConfig};
use crate::error::{ensure_same_len, Error, Result};
use crate::image::Image;
use crate::stats;

pub const DEFAULT_LFDR_BINS: usize = 101;

/// `B` replicate score vectors of length `m`, stored replicate-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NullEnsemble {
    replicates: usize,
    per_replicate: usize,
    scores: Vec<f64>,
}

impl NullEnsemble {
    pub fn new(replicates: usize, per_replicate: usize, scores: Vec<f64>) -> Result<Self> {
        if replicates == 0 || per_replicate == 0 {
            return Err(Error::InvalidArgument("null ensemble must be nonempty".into()));
        }
        ensure_same_len("null ensemble", replicates * per_replicate, scores.len())?;
        Ok(NullEnsemble {
            replicates,
            per_replicate,
            scores,
        })
    }

    /// Pools replicate maps; all must share one shape.
    pub fn from_maps(maps: &[PixelAttentionMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidArgument("no null maps".into()))?;
        let m = first.len();
        let mut scores = Vec::with_capacity(m * maps.len());
        for map in maps {
            if (map.height(), map.width()) != (first.height(), first.width()) {
                return Err(Error::Shape(format!(
                    "null maps disagree in shape: {}x{} vs {}x{}",
                    map.height(),
                    map.width(),
                    first.height(),
                    first.width()
                )));
            }
            scores.extend_from_slice(map.scores());
        }
        NullEnsemble::new(maps.len(), m, scores)
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn per_replicate(&self) -> usize {
        self.per_replicate
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Mean and population standard deviation of the pooled null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub mean: f64,
    pub std: f64,
}

pub fn null_moments(ensemble: &NullEnsemble) -> Result<NullMoments> {
    let scores = ensemble.scores();
    if scores.len() < 2 {
        return Err(Error::InvalidArgument(
            "null moments need at least two scores".into(),
        ));
    }
    let (mean, std) = stats::mean_std(scores);
    if !(std > 0.0) {
        return Err(Error::DegenerateNull);
    }
    Ok(NullMoments { mean, std })
}

/// `z = (a - mean) / std`.
pub fn z_stats(scores: &[f64], moments: &NullMoments) -> Result<Vec<f64>> {
    if !(moments.std > 0.0) {
        return Err(Error::DegenerateNull);
    }
    let NullMoments { mean, std } = *moments;
    Ok(scores.iter().map(|&a| (a - mean) / std).collect())
}

/// Null z-statistics sorted ascending, for repeated tail counting.
#[derive(Debug, Clone)]
pub struct SortedNull(Vec<f64>);

impl SortedNull {
    pub fn new(z_null: &[f64]) -> Result<Self> {
        if z_null.is_empty() {
            return Err(Error::InvalidArgument("empty null set".into()));
        }
        let mut v = z_null.to_vec();
        v.sort_unstable_by(stats::total_cmp);
        Ok(SortedNull(v))
    }

    /// Number of null values strictly greater than `z`.
    pub fn count_above(&self, z: f64) -> usize {
        self.0.len() - self.0.partition_point(|&v| v <= z)
    }

    pub fn p_value(&self, z: f64) -> f64 {
        self.count_above(z) as f64 / self.0.len() as f64
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `p_i = #{z*_jb > z_i} / (mB)`, strict inequality, no smoothing.
pub fn p_values(z_obs: &[f64], z_null: &[f64]) -> Result<Vec<f64>> {
    let null = SortedNull::new(z_null)?;
    Ok(z_obs.par_iter().map(|&z| null.p_value(z)).collect())
}

/// Equal-width histogram over a closed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Empty histogram with `bins` bins spanning `[lo, hi]`.
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0, "histogram needs at least one bin");
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    /// Shared-support histogram range: `[min, max]` over all `sets`.
    pub fn spanning(sets: &[&[f64]], bins: usize) -> Self {
        let (lo, hi) = sets
            .iter()
            .flat_map(|s| s.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Histogram::new(lo, hi, bins)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    /// Bin containing `v`; the top edge belongs to the last bin.
    pub fn bin_of(&self, v: f64) -> usize {
        let w = self.bin_width();
        if !(w > 0.0) {
            return 0;
        }
        let idx = ((v - self.lo) / w).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.bins() - 1)
        }
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let hi = if i + 1 == self.bins() { self.hi } else { self.lo + w * (i + 1) as f64 };
        (self.lo + w * i as f64, hi)
    }

    pub fn fill(&mut self, values: &[f64]) {
        for &v in values {
            let b = self.bin_of(v);
            self.counts[b] += 1;
        }
    }

    pub fn filled(mut self, values: &[f64]) -> Self {
        self.fill(values);
        self
    }
}

/// Local false discovery rate with `pi0 = 1`:
/// `l_i = min(1, f0(bin(z_i)) / f(bin(z_i)))` on a shared histogram over the
/// union of both samples. Empty null bins get the density floor
/// `1 / (10 * mB * bin_width)`.
pub fn lfdr(z_obs: &[f64], z_null: &[f64], bins: usize) -> Result<Vec<f64>> {
    if z_obs.is_empty() || z_null.is_empty() {
        return Err(Error::InvalidArgument("lfdr needs nonempty samples".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("lfdr needs at least one bin".into()));
    }
    let grid = Histogram::spanning(&[z_obs, z_null], bins);
    if !(grid.bin_width() > 0.0) {
        // every value identical: both densities sit in one bin
        return Ok(vec![1.0; z_obs.len()]);
    }
    let obs = grid.clone().filled(z_obs);
    let null = grid.filled(z_null);
    let m = z_obs.len() as f64;
    let mb = z_null.len() as f64;
    // densities share the bin width, so it cancels from the ratio
    let ratio: Vec<f64> = (0..bins)
        .map(|b| {
            let f = obs.counts[b] as f64 / m;
            let f0 = match null.counts[b] {
                0 => 0.1 / mb,
                c => c as f64 / mb,
            };
            if f > 0.0 {
                (f0 / f).min(1.0)
            } else {
                1.0
            }
        })
        .collect();
    Ok(z_obs.iter().map(|&z| ratio[obs.bin_of(z)]).collect())
}

/// `lambda = 0.05, 0.10, ..., 0.95`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Proportion of true nulls: median over the lambda grid of
/// `#{p_i > lambda} / (m (1 - lambda))`, clipped to `[0, 1]`.
pub fn estimate_pi0(p: &[f64], lambda_grid: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("pi0 needs at least one p-value".into()));
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(Error::InvalidArgument(
            "lambda grid must be nonempty and inside [0, 1)".into(),
        ));
    }
    let mut sorted = p.to_vec();
    sorted.sort_unstable_by(stats::total_cmp);
    let m = sorted.len() as f64;
    let per_lambda: Vec<f64> = lambda_grid
        .iter()
        .map(|&l| {
            let above = sorted.len() - sorted.partition_point(|&v| v <= l);
            above as f64 / (m * (1.0 - l))
        })
        .collect();
    let med = stats::median(&per_lambda).expect("grid is nonempty");
    Ok(med.clamp(0.0, 1.0))
}

/// Everything the analysis produces for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    /// The observed, post-processed attention map `A`.
    pub attention: PixelAttentionMap,
    pub z: Vec<f64>,
    /// Pooled null z-statistics, replicate-major.
    pub z_null: Vec<f64>,
    pub p: Vec<f64>,
    pub lfdr: Vec<f64>,
    pub pi0: f64,
    pub moments: NullMoments,
    pub replicates: usize,
    pub bins: usize,
}

impl UncertaintyReport {
    pub fn height(&self) -> usize {
        self.attention.height()
    }

    pub fn width(&self) -> usize {
        self.attention.width()
    }

    /// Scalar summary (written next to the map dumps).
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            height: self.height(),
            width: self.width(),
            replicates: self.replicates,
            bins: self.bins,
            mu_hat: self.moments.mean,
            sigma_hat: self.moments.std,
            pi0: self.pi0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub height: usize,
    pub width: usize,
    pub replicates: usize,
    pub bins: usize,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub pi0: f64,
}

/// Statistics from an observed map and its null maps.
pub fn analyze_maps(
    observed: PixelAttentionMap,
    null_maps: &[PixelAttentionMap],
    bins: usize,
) -> Result<UncertaintyReport> {
    let ensemble = NullEnsemble::from_maps(null_maps)?;
    ensure_same_len("observed vs null map", observed.len(), ensemble.per_replicate())?;
    let moments = null_moments(&ensemble)?;
    let z = z_stats(observed.scores(), &moments)?;
    let z_null = z_stats(ensemble.scores(), &moments)?;
    let p = p_values(&z, &z_null)?;
    let lfdr = lfdr(&z, &z_null, bins)?;
    let pi0 = estimate_pi0(&p, &default_lambda_grid())?;
    Ok(UncertaintyReport {
        attention: observed,
        z,
        z_null,
        p,
        lfdr,
        pi0,
        moments,
        replicates: ensemble.replicates(),
        bins,
    })
}

/// Full pipeline with the default LFDR bin count.
pub fn analyze(image: &Image, source: &AttentionSource, config: &BootstrapConfig) -> Result<UncertaintyReport> {
    analyze_with_bins(image, source, config, DEFAULT_LFDR_BINS)
}

/// Observed map, bootstrap nulls, null maps, moments, z, p, LFDR and pi0.
pub fn analyze_with_bins(
    image: &Image,
    source: &AttentionSource,
    config: &BootstrapConfig,
    bins: usize,
) -> Result<UncertaintyReport> {
    config.validate()?;
    let observed = attention_for(image, source)?;
    let stats = bootstrap::channel_stats(image);
    let null_maps = (1..=config.replicates)
        .into_par_iter()
        .map(|b| {
            let null_image = bootstrap::null_replicate(image, &stats, config, b);
            source.replicate(&null_image, b)
        })
        .collect::<Result<Vec<_>>>()?;
    analyze_maps(observed, &null_maps, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ensemble(v: &[f64]) -> NullEnsemble {
        NullEnsemble::new(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn moments_of_small_ensembles() {
        let m = null_moments(&ensemble(&[1.0, 2.0, 3.0])).unwrap();
        assert_relative_eq!(m.mean, 2.0);
        assert_relative_eq!(m.std, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let m = null_moments(&ensemble(&[0.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!((m.mean, m.std), (0.5, 0.5));
    }

    #[test]
    fn constant_ensemble_is_degenerate() {
        assert!(matches!(
            null_moments(&ensemble(&[0.3; 5])),
            Err(Error::DegenerateNull)
        ));
    }

    #[test]
    fn z_examples() {
        let mo = NullMoments {
            mean: 2.0,
            std: (2.0f64 / 3.0).sqrt(),
        };
        let z = z_stats(&[2.0, 3.0], &mo).unwrap();
        assert_eq!(z[0], 0.0);
        assert_relative_eq!(z[1], 1.224_744_871_391_589, epsilon = 1e-12);
        assert!(z_stats(&[1.0], &NullMoments { mean: 0.0, std: 0.0 }).is_err());
    }

    #[test]
    fn p_value_examples() {
        let null = [-1.0, 0.0, 1.0, 2.0];
        assert_eq!(p_values(&[0.5, 3.0, -2.0, 1.0], &null).unwrap(), vec![0.5, 0.0, 1.0, 0.25]);
        assert!(p_values(&[0.0], &[]).is_err());
    }

    #[test]
    fn lfdr_identical_samples_is_one() {
        let z: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        assert!(lfdr(&z, &z, 101).unwrap().iter().all(|&l| l == 1.0));
    }

    #[test]
    fn lfdr_far_tail_uses_floor() {
        // 100 null values in [0, 1), one observed outlier at 100 together with
        // 99 values matching the null. Union range [0, 100], 101 bins of width
        // 100/101; the outlier's bin holds 1 observed and 0 null values, so
        // l = (0.1 / 100) / (1 / 100) = 0.1.
        let null: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let mut obs: Vec<f64> = null[..99].to_vec();
        obs.push(100.0);
        let l = lfdr(&obs, &null, 101).unwrap();
        assert_relative_eq!(l[99], 0.1, epsilon = 1e-12);
        assert!(l[..99].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn lfdr_clips_ratio() {
        // null piles into the low bin, observed into both: low bin ratio 2 -> 1
        let null = [0.0, 0.0, 0.0, 0.0];
        let obs = [0.0, 0.0, 1.0, 1.0];
        let l = lfdr(&obs, &null, 2).unwrap();
        assert_eq!(l[0], 1.0);
        assert_relative_eq!(l[2], 0.1 / 4.0 / 0.5);
    }

    #[test]
    fn pi0_endpoints_and_grid() {
        let grid = default_lambda_grid();
        assert_eq!(grid.len(), 19);
        assert_eq!(estimate_pi0(&[0.0; 50], &grid).unwrap(), 0.0);
        let uniform: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        let pi0 = estimate_pi0(&uniform, &grid).unwrap();
        assert!((pi0 - 1.0).abs() <= 0.01, "pi0 {pi0}");
    }

    #[test]
    fn pi0_mixture() {
        let mut p: Vec<f64> = (1..=700).map(|i| (i as f64 - 0.5) / 700.0).collect();
        p.extend(std::iter::repeat(0.0).take(300));
        let pi0 = estimate_pi0(&p, &default_lambda_grid()).unwrap();
        assert!((pi0 - 0.7).abs() <= 0.02, "pi0 {pi0}");
    }

    #[test]
    fn pi0_rejects_bad_grid() {
        assert!(estimate_pi0(&[0.5], &[1.0]).is_err());
        assert!(estimate_pi0(&[], &[0.5]).is_err());
    }

    #[test]
    fn histogram_binning_edges() {
        let h = Histogram::new(0.0, 1.0, 4);
        assert_eq!(h.bin_of(0.0), 0);
        assert_eq!(h.bin_of(0.25), 1);
        assert_eq!(h.bin_of(1.0), 3);
        assert_eq!(h.bin_edges(3), (0.75, 1.0));
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = Image::filled(32, 32, [0.5; 3]).unwrap();
        let err = analyze(&img, &AttentionSource::toy(8), &BootstrapConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateNull));
    }
}
