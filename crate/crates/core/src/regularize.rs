//! Shrinkage of attention maps using the uncertainty statistics.
//!
//! Every rule is a zero-mask: a score either survives unchanged or becomes 0.

use serde::{Deserialize, Serialize};

use crate::attention::PixelAttentionMap;
use crate::error::{ensure_same_len, Error, Result};
use crate::inference::UncertaintyReport;
use crate::simulate::RoiMask;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageMethod {
    PThreshold,
    LThreshold,
    Pi0Threshold,
}

impl ShrinkageMethod {
    pub const ALL: [ShrinkageMethod; 3] = [
        ShrinkageMethod::PThreshold,
        ShrinkageMethod::LThreshold,
        ShrinkageMethod::Pi0Threshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShrinkageMethod::PThreshold => "p_threshold",
            ShrinkageMethod::LThreshold => "l_threshold",
            ShrinkageMethod::Pi0Threshold => "pi0_threshold",
        }
    }
}

impl std::fmt::Display for ShrinkageMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageSpec {
    pub method: ShrinkageMethod,
    /// Ignored by [`ShrinkageMethod::Pi0Threshold`].
    pub threshold: f64,
    pub apply_z_zeroing: bool,
}

impl ShrinkageSpec {
    pub fn new(method: ShrinkageMethod, threshold: f64) -> Self {
        ShrinkageSpec {
            method,
            threshold,
            apply_z_zeroing: true,
        }
    }

    pub fn pi0() -> Self {
        ShrinkageSpec::new(ShrinkageMethod::Pi0Threshold, 0.0)
    }

    pub fn without_z_zeroing(mut self) -> Self {
        self.apply_z_zeroing = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method != ShrinkageMethod::Pi0Threshold && !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Zeroes scores with `z <= 0`.
pub fn z_zeroing(scores: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    ensure_same_len("z-zeroing", scores.len(), z.len())?;
    Ok(scores
        .iter()
        .zip(z)
        .map(|(&a, &z)| if z <= 0.0 { 0.0 } else { a })
        .collect())
}

fn zero_above(scores: &[f64], stat: &[f64], threshold: f64, what: &str) -> Result<Vec<f64>> {
    ensure_same_len(what, scores.len(), stat.len())?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "{what} threshold must lie in [0, 1], got {threshold}"
        )));
    }
    Ok(scores
        .iter()
        .zip(stat)
        .map(|(&a, &s)| if s > threshold { 0.0 } else { a })
        .collect())
}

/// Zeroes scores whose p-value exceeds `p_th`.
pub fn threshold_p(scores: &[f64], p: &[f64], p_th: f64) -> Result<Vec<f64>> {
    zero_above(scores, p, p_th, "p-thresholding")
}

/// Zeroes scores whose local FDR exceeds `l_th`.
pub fn threshold_l(scores: &[f64], lfdr: &[f64], l_th: f64) -> Result<Vec<f64>> {
    zero_above(scores, lfdr, l_th, "l-thresholding")
}

/// Zeroes the `ceil(pi0 * m)` pixels with the largest `stat` (p-values, or
/// local FDR for the l-variant). Ties go to the smaller attention score first,
/// then to the lower pixel index.
pub fn threshold_pi0(scores: &[f64], stat: &[f64], pi0: f64) -> Result<Vec<f64>> {
    ensure_same_len("pi0-thresholding", scores.len(), stat.len())?;
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::InvalidArgument(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    let m = scores.len();
    let n_zero = ((pi0 * m as f64).ceil() as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&i, &j| {
        stat[j]
            .total_cmp(&stat[i])
            .then(scores[i].total_cmp(&scores[j]))
            .then(i.cmp(&j))
    });
    let mut out = scores.to_vec();
    for &i in &order[..n_zero] {
        out[i] = 0.0;
    }
    Ok(out)
}

/// Applies one shrinkage spec to the report's attention map.
pub fn regularize(report: &UncertaintyReport, spec: &ShrinkageSpec) -> Result<PixelAttentionMap> {
    spec.validate()?;
    let base = if spec.apply_z_zeroing {
        z_zeroing(report.attention.scores(), &report.z)?
    } else {
        report.attention.scores().to_vec()
    };
    let out = match spec.method {
        ShrinkageMethod::PThreshold => threshold_p(&base, &report.p, spec.threshold)?,
        ShrinkageMethod::LThreshold => threshold_l(&base, &report.lfdr, spec.threshold)?,
        ShrinkageMethod::Pi0Threshold => threshold_pi0(&base, &report.p, report.pi0)?,
    };
    report.attention.with_scores(out)
}

/// How a p-/l-threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// A fixed value in `[0, 1]`.
    Absolute(f64),
    /// The given percentile (0-100) of the statistic inside the ROI.
    RoiPercentile(f64),
    /// The median of the statistic over the whole map.
    Median,
}

impl ThresholdRule {
    /// Resolves to a concrete threshold for statistic values `stat`.
    pub fn resolve(&self, stat: &[f64], mask: Option<&RoiMask>) -> Result<f64> {
        match *self {
            ThresholdRule::Absolute(t) => {
                if (0.0..=1.0).contains(&t) {
                    Ok(t)
                } else {
                    Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")))
                }
            }
            ThresholdRule::RoiPercentile(q) => {
                if !(0.0..=100.0).contains(&q) {
                    return Err(Error::InvalidArgument(format!("percentile {q} outside [0, 100]")));
                }
                let mask = mask.ok_or_else(|| {
                    Error::InvalidArgument("ROI-percentile thresholds need a mask".into())
                })?;
                ensure_same_len("ROI percentile", stat.len(), mask.len())?;
                let inside: Vec<f64> = mask.indices().map(|i| stat[i]).collect();
                stats::quantile(&inside, q / 100.0)
                    .ok_or_else(|| Error::InvalidArgument("empty ROI".into()))
            }
            ThresholdRule::Median => stats::median(stat)
                .ok_or_else(|| Error::InvalidArgument("empty statistic".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_zeroing_cases() {
        assert_eq!(z_zeroing(&[5.0, 5.0, 5.0], &[-1.0, 0.0, 0.1]).unwrap(), vec![0.0, 0.0, 5.0]);
        assert_eq!(z_zeroing(&[1.0, 2.0], &[0.5, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(z_zeroing(&[1.0, 2.0], &[-0.5, -3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(z_zeroing(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn p_threshold_cases() {
        assert_eq!(threshold_p(&[5.0, 7.0], &[0.1, 0.5], 0.3).unwrap(), vec![5.0, 0.0]);
        assert_eq!(threshold_p(&[5.0, 7.0], &[0.1, 1.0], 1.0).unwrap(), vec![5.0, 7.0]);
        assert_eq!(threshold_p(&[5.0, 7.0], &[0.0, 0.2], 0.0).unwrap(), vec![5.0, 0.0]);
        assert!(threshold_p(&[5.0], &[0.1], 1.5).is_err());
    }

    #[test]
    fn l_threshold_cases() {
        assert_eq!(threshold_l(&[3.0, 4.0], &[0.2, 0.9], 0.42).unwrap(), vec![3.0, 0.0]);
        assert_eq!(threshold_l(&[3.0, 4.0], &[1.0, 1.0], 0.99).unwrap(), vec![0.0, 0.0]);
        assert_eq!(threshold_l(&[3.0, 4.0], &[1.0, 1.0], 1.0).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn pi0_threshold_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let p = [0.9, 0.1, 0.6, 0.3];
        assert_eq!(threshold_pi0(&a, &p, 0.5).unwrap(), vec![0.0, 2.0, 0.0, 4.0]);
        assert_eq!(threshold_pi0(&a, &p, 0.0).unwrap(), a.to_vec());
        assert_eq!(threshold_pi0(&a, &p, 1.0).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn pi0_ties_prefer_smaller_score_then_index() {
        let a = [5.0, 1.0, 1.0, 9.0];
        let p = [0.5; 4];
        // ceil(0.5 * 4) = 2 zeros: the two 1.0 scores (indices 1, 2)
        assert_eq!(threshold_pi0(&a, &p, 0.5).unwrap(), vec![5.0, 0.0, 0.0, 9.0]);
        // ceil(0.25 * 4) = 1 zero: index 1 before index 2
        assert_eq!(threshold_pi0(&a, &p, 0.25).unwrap(), vec![5.0, 0.0, 1.0, 9.0]);
    }

    #[test]
    fn threshold_rules() {
        let stat = [0.1, 0.2, 0.3, 0.4, 0.9];
        assert_eq!(ThresholdRule::Median.resolve(&stat, None).unwrap(), 0.3);
        assert_eq!(ThresholdRule::Absolute(0.3).resolve(&stat, None).unwrap(), 0.3);
        let mask = RoiMask::new(1, 5, vec![false, true, true, true, false]).unwrap();
        let t = ThresholdRule::RoiPercentile(50.0).resolve(&stat, Some(&mask)).unwrap();
        assert!((t - 0.3).abs() < 1e-15);
        assert!(ThresholdRule::RoiPercentile(10.0).resolve(&stat, None).is_err());
    }
}
