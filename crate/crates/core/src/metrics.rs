//! Evaluation metrics for regularized attention maps.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_len, Error, Result};
use crate::inference::UncertaintyReport;
use crate::regularize::{threshold_l, threshold_p, threshold_pi0, z_zeroing, ShrinkageMethod};
use crate::simulate::RoiMask;
use crate::stats;

/// `100 * #{rest < a} / |rest|`.
pub fn percentile_vs_rest(a: f64, rest: &[f64]) -> Result<f64> {
    if rest.is_empty() {
        return Err(Error::InvalidArgument("percentile against an empty set".into()));
    }
    Ok(100.0 * rest.iter().filter(|&&r| r < a).count() as f64 / rest.len() as f64)
}

/// Mean over ROI pixels of their percentile among non-ROI scores.
pub fn mean_percentile(scores: &[f64], mask: &RoiMask) -> Result<f64> {
    ensure_same_len("mean percentile", scores.len(), mask.len())?;
    if mask.is_empty() || mask.count() == mask.len() {
        return Err(Error::InvalidArgument(
            "mean percentile needs a mask that is neither empty nor full".into(),
        ));
    }
    let (roi, mut rest) = mask.split(scores);
    rest.sort_unstable_by(stats::total_cmp);
    let n = rest.len() as f64;
    let pct: Vec<f64> = roi
        .iter()
        .map(|&a| 100.0 * rest.partition_point(|&r| r < a) as f64 / n)
        .collect();
    Ok(stats::mean(&pct))
}

/// `D = sum(after) / sum(before)`.
pub fn suppression_factor(before: &[f64], after: &[f64]) -> Result<f64> {
    ensure_same_len("suppression factor", before.len(), after.len())?;
    if before.is_empty() {
        return Err(Error::InvalidArgument("suppression factor of no images".into()));
    }
    let denom = stats::pairwise_sum(before);
    if !(denom > 0.0) {
        return Err(Error::Degenerate(
            "sum of mean percentiles before regularization is zero".into(),
        ));
    }
    Ok(stats::pairwise_sum(after) / denom)
}

/// Leave-one-image-out jackknife standard error of `D`. `None` for fewer than
/// two images or when some leave-one-out denominator vanishes.
pub fn suppression_jackknife_se(before: &[f64], after: &[f64]) -> Option<f64> {
    let n = before.len();
    if n < 2 || after.len() != n {
        return None;
    }
    let loo: Vec<f64> = (0..n)
        .map(|k| {
            let b: Vec<f64> = before.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
            let a: Vec<f64> = after.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
            suppression_factor(&b, &a).ok()
        })
        .collect::<Option<_>>()?;
    let mean = stats::mean(&loo);
    let ss = stats::pairwise_sum_by(&loo, &|d| (d - mean) * (d - mean));
    Some(((n - 1) as f64 / n as f64 * ss).sqrt())
}

fn masked_sum(values: &[f64], mask: &RoiMask, inside: bool) -> f64 {
    let picked: Vec<f64> = values
        .iter()
        .zip(mask.members())
        .filter(|(_, &m)| m == inside)
        .map(|(v, _)| *v)
        .collect();
    stats::pairwise_sum(&picked)
}

/// `Se = 1 - sum_ROI(a~) / sum_ROI(a)`.
pub fn sensitivity(before: &[f64], after: &[f64], mask: &RoiMask) -> Result<f64> {
    ensure_same_len("sensitivity", before.len(), after.len())?;
    ensure_same_len("sensitivity mask", before.len(), mask.len())?;
    let denom = masked_sum(before, mask, true);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("zero attention mass inside the ROI".into()));
    }
    Ok(1.0 - masked_sum(after, mask, true) / denom)
}

/// `Sp = sum_rest(a~) / sum_rest(a)`.
pub fn specificity(before: &[f64], after: &[f64], mask: &RoiMask) -> Result<f64> {
    ensure_same_len("specificity", before.len(), after.len())?;
    ensure_same_len("specificity mask", before.len(), mask.len())?;
    let denom = masked_sum(before, mask, false);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("zero attention mass outside the ROI".into()));
    }
    Ok(masked_sum(after, mask, false) / denom)
}

/// Fraction of ROI pixels with a nonzero score.
pub fn nonzero_fraction(scores: &[f64], mask: &RoiMask) -> Result<f64> {
    ensure_same_len("nonzero fraction", scores.len(), mask.len())?;
    if mask.is_empty() {
        return Err(Error::InvalidArgument("empty ROI mask".into()));
    }
    let nz = mask.indices().filter(|&i| scores[i] != 0.0).count();
    Ok(nz as f64 / mask.count() as f64)
}

/// `0` followed by 49 log-spaced values from `1e-3` to `1`.
pub fn sweep_thresholds() -> Vec<f64> {
    let mut t = Vec::with_capacity(50);
    t.push(0.0);
    for k in 0..49 {
        t.push(10f64.powf(-3.0 + 3.0 * k as f64 / 48.0));
    }
    t[49] = 1.0;
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeSpPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeSpCurve {
    pub method: ShrinkageMethod,
    pub points: Vec<SeSpPoint>,
    /// The pi0 rule applied with this method's statistic; `threshold` holds pi0.
    pub pi0_point: SeSpPoint,
}

/// Sensitivity/specificity of p- or l-thresholding over ascending `thresholds`,
/// plus the single point of the pi0 rule ranked by the same statistic.
pub fn se_sp_curve(
    report: &UncertaintyReport,
    mask: &RoiMask,
    method: ShrinkageMethod,
    thresholds: &[f64],
    apply_z_zeroing: bool,
) -> Result<SeSpCurve> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("thresholds must be sorted ascending".into()));
    }
    let a = report.attention.scores();
    let base = if apply_z_zeroing {
        z_zeroing(a, &report.z)?
    } else {
        a.to_vec()
    };
    let (stat, shrink): (&[f64], fn(&[f64], &[f64], f64) -> Result<Vec<f64>>) = match method {
        ShrinkageMethod::PThreshold => (&report.p, threshold_p),
        ShrinkageMethod::LThreshold => (&report.lfdr, threshold_l),
        ShrinkageMethod::Pi0Threshold => {
            return Err(Error::InvalidArgument(
                "curves are swept for p- or l-thresholding".into(),
            ))
        }
    };
    let point = |threshold: f64, out: &[f64]| -> Result<SeSpPoint> {
        Ok(SeSpPoint {
            threshold,
            sensitivity: sensitivity(a, out, mask)?,
            specificity: specificity(a, out, mask)?,
        })
    };
    let points = thresholds
        .iter()
        .map(|&t| point(t, &shrink(&base, stat, t)?))
        .collect::<Result<Vec<_>>>()?;
    let pi0_out = threshold_pi0(&base, stat, report.pi0)?;
    Ok(SeSpCurve {
        method,
        points,
        pi0_point: point(report.pi0, &pi0_out)?,
    })
}

/// Signed RMS deviation of sorted p-values from the uniform positions
/// `(i - 0.5) / n`; the sign is that of `0.5 - median(p)`.
pub fn srmsd(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("sRMSD of an empty set".into()));
    }
    let mut sorted = p.to_vec();
    sorted.sort_unstable_by(stats::total_cmp);
    let n = sorted.len() as f64;
    let sq: Vec<f64> = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = v - (i as f64 + 0.5) / n;
            d * d
        })
        .collect();
    let rmsd = (stats::pairwise_sum(&sq) / n).sqrt();
    let tilt = 0.5 - stats::median_sorted(&sorted);
    let sign = if tilt > 0.0 {
        1.0
    } else if tilt < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(sign * rmsd)
}

/// Kolmogorov distance `sup_x |F_n(x) - x|` of a sample in `[0, 1]` from the
/// uniform distribution.
pub fn uniform_ks_distance(p: &[f64]) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_unstable_by(stats::total_cmp);
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        // F_n jumps from i/n to j/n at x
        worst = worst.max((x - i as f64 / n).abs()).max((j as f64 / n - x).abs());
        i = j;
    }
    worst
}

/// Dvoretzky-Kiefer-Wolfowitz band half-width at confidence `1 - alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// One row of the simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub category: String,
    pub method: ShrinkageMethod,
    pub threshold: f64,
    pub mean_z_roi: f64,
    pub pi0: f64,
    pub mean_percentile_before: f64,
    pub mean_percentile_after: f64,
    pub nonzero_fraction_roi_before: f64,
    pub nonzero_fraction_roi_after: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn percentile_examples() {
        let rest = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(percentile_vs_rest(0.0, &rest).unwrap(), 0.0);
        assert_eq!(percentile_vs_rest(1.0, &rest).unwrap(), 100.0);
        assert_eq!(percentile_vs_rest(0.25, &rest).unwrap(), 50.0);
        assert!(percentile_vs_rest(0.25, &[]).is_err());
    }

    #[test]
    fn mean_percentile_suppressed_roi_is_zero() {
        let mask = RoiMask::new(1, 4, vec![true, true, false, false]).unwrap();
        assert_eq!(mean_percentile(&[0.0, 0.0, 0.5, 0.7], &mask).unwrap(), 0.0);
        assert_eq!(mean_percentile(&[0.6, 0.8, 0.5, 0.7], &mask).unwrap(), 75.0);
        let full = RoiMask::new(1, 2, vec![true, true]).unwrap();
        assert!(mean_percentile(&[0.1, 0.2], &full).is_err());
    }

    #[test]
    fn d_examples() {
        assert_eq!(suppression_factor(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 1.0);
        assert_eq!(suppression_factor(&[10.0, 20.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(suppression_factor(&[10.0, 20.0], &[1.0, 2.0]).unwrap(), 0.1);
        assert!(suppression_factor(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn jackknife_zero_for_proportional_data() {
        let se = suppression_jackknife_se(&[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(se < 1e-15);
        assert!(suppression_jackknife_se(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn se_sp_examples() {
        let mask = RoiMask::new(1, 4, vec![true, true, false, false]).unwrap();
        let a = [1.0, 1.0, 2.0, 2.0];
        assert_eq!(sensitivity(&a, &a, &mask).unwrap(), 0.0);
        assert_eq!(sensitivity(&a, &[0.0, 0.0, 2.0, 2.0], &mask).unwrap(), 1.0);
        assert_eq!(sensitivity(&a, &[0.0, 1.0, 2.0, 2.0], &mask).unwrap(), 0.5);
        assert_eq!(specificity(&a, &a, &mask).unwrap(), 1.0);
        assert_eq!(specificity(&a, &[1.0, 1.0, 0.0, 0.0], &mask).unwrap(), 0.0);
        assert_eq!(specificity(&a, &[1.0, 1.0, 2.0, 0.0], &mask).unwrap(), 0.5);
        assert!(sensitivity(&[0.0, 0.0, 1.0, 1.0], &a, &mask).is_err());
    }

    #[test]
    fn sweep_shape() {
        let t = sweep_thresholds();
        assert_eq!(t.len(), 50);
        assert_eq!(t[0], 0.0);
        assert_relative_eq!(t[1], 1e-3, epsilon = 1e-18);
        assert_eq!(t[49], 1.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn srmsd_examples() {
        assert_eq!(srmsd(&[0.25, 0.75]).unwrap(), 0.0);
        assert_relative_eq!(srmsd(&[0.0, 0.0]).unwrap(), 0.3125f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(srmsd(&[1.0, 1.0]).unwrap(), -(0.3125f64.sqrt()), epsilon = 1e-15);
        assert!(srmsd(&[]).is_err());
    }

    #[test]
    fn ks_distance_examples() {
        assert_relative_eq!(uniform_ks_distance(&[0.25, 0.75]), 0.25);
        assert_eq!(uniform_ks_distance(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(dkw_epsilon(10_000, 0.01), (200f64.ln() / 20_000.0).sqrt());
    }
}
