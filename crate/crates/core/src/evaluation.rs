//! The noise-injection study for one image and its aggregation over a corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionSource;
use crate::bootstrap::BootstrapConfig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::inference::{analyze_with_bins, UncertaintyReport, DEFAULT_LFDR_BINS};
use crate::metrics::{self, EvalRecord};
use crate::regularize::{regularize, ShrinkageMethod, ShrinkageSpec};
use crate::rng::mix;
use crate::simulate::{self, mean_roi_z, passes_z_filter, NoiseSpec, RoiMask};

/// Settings shared by every image of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Noise settings; `seed` is the run-level seed.
    pub noise: NoiseSpec,
    /// Bootstrap settings; `seed` is the run-level seed.
    pub bootstrap: BootstrapConfig,
    pub p_thresholds: Vec<f64>,
    pub l_thresholds: Vec<f64>,
    pub apply_z_zeroing: bool,
    pub bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            noise: NoiseSpec::default(),
            bootstrap: BootstrapConfig::default(),
            p_thresholds: vec![0.3],
            l_thresholds: vec![0.3],
            apply_z_zeroing: true,
            bins: DEFAULT_LFDR_BINS,
        }
    }
}

impl SimulationConfig {
    /// Noise and bootstrap settings for the image at corpus position `index`.
    pub fn for_image(&self, index: usize) -> (NoiseSpec, BootstrapConfig) {
        let noise = NoiseSpec {
            seed: mix(self.noise.seed, index as u64),
            ..self.noise
        };
        let bootstrap = BootstrapConfig {
            seed: mix(self.bootstrap.seed, index as u64),
            ..self.bootstrap
        };
        (noise, bootstrap)
    }
}

/// Everything the simulation learns about one perturbed image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub image_id: String,
    pub category: String,
    pub mean_z_roi: f64,
    pub passes_z_filter: bool,
    pub pi0: f64,
    /// Signed RMS deviation of the ROI p-values from uniformity.
    pub roi_p_srmsd: f64,
    pub mean_percentile_before: f64,
    pub records: Vec<EvalRecord>,
}

/// The perturbed image, its mask and the analysis, before any shrinkage.
pub struct PerturbedAnalysis {
    pub image: Image,
    pub mask: RoiMask,
    pub report: UncertaintyReport,
}

/// Injects noise and runs the uncertainty analysis on the perturbed image.
pub fn perturb_and_analyze(
    image: &Image,
    source: &AttentionSource,
    noise: &NoiseSpec,
    bootstrap: &BootstrapConfig,
    bins: usize,
) -> Result<PerturbedAnalysis> {
    let (perturbed, mask) = simulate::inject(image, noise)?;
    let report = analyze_with_bins(&perturbed, source, bootstrap, bins)?;
    Ok(PerturbedAnalysis {
        image: perturbed,
        mask,
        report,
    })
}

/// Metrics of every configured shrinkage for an analyzed perturbed image.
pub fn evaluate_analysis(
    image_id: &str,
    category: &str,
    analysis: &PerturbedAnalysis,
    config: &SimulationConfig,
) -> Result<ImageOutcome> {
    let PerturbedAnalysis { mask, report, .. } = analysis;
    let before = report.attention.scores();
    let mean_z = mean_roi_z(&report.z, mask)?;
    let q_before = metrics::mean_percentile(before, mask)?;
    let nz_before = metrics::nonzero_fraction(before, mask)?;

    let mut specs: Vec<ShrinkageSpec> = Vec::new();
    specs.extend(config.p_thresholds.iter().map(|&t| ShrinkageSpec::new(ShrinkageMethod::PThreshold, t)));
    specs.extend(config.l_thresholds.iter().map(|&t| ShrinkageSpec::new(ShrinkageMethod::LThreshold, t)));
    specs.push(ShrinkageSpec::pi0());

    let records = specs
        .into_iter()
        .map(|mut spec| {
            spec.apply_z_zeroing = config.apply_z_zeroing;
            let after = regularize(report, &spec)?;
            let after = after.scores();
            Ok(EvalRecord {
                image_id: image_id.to_owned(),
                category: category.to_owned(),
                method: spec.method,
                threshold: match spec.method {
                    ShrinkageMethod::Pi0Threshold => report.pi0,
                    _ => spec.threshold,
                },
                mean_z_roi: mean_z,
                pi0: report.pi0,
                mean_percentile_before: q_before,
                mean_percentile_after: metrics::mean_percentile(after, mask)?,
                nonzero_fraction_roi_before: nz_before,
                nonzero_fraction_roi_after: metrics::nonzero_fraction(after, mask)?,
                sensitivity: metrics::sensitivity(before, after, mask)?,
                specificity: metrics::specificity(before, after, mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ImageOutcome {
        image_id: image_id.to_owned(),
        category: category.to_owned(),
        mean_z_roi: mean_z,
        passes_z_filter: passes_z_filter(mean_z),
        pi0: report.pi0,
        roi_p_srmsd: metrics::srmsd(&mask.split(&report.p).0)?,
        mean_percentile_before: q_before,
        records,
    })
}

/// Injects, analyzes and evaluates the image at corpus position `index`.
pub fn evaluate_image(
    image_id: &str,
    category: &str,
    index: usize,
    image: &Image,
    source: &AttentionSource,
    config: &SimulationConfig,
) -> Result<ImageOutcome> {
    let (noise, bootstrap) = config.for_image(index);
    let analysis = perturb_and_analyze(image, source, &noise, &bootstrap, config.bins)?;
    evaluate_analysis(image_id, category, &analysis, config)
}

/// Suppression factor for one `(category, method, threshold)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionSummary {
    pub category: String,
    pub method: ShrinkageMethod,
    /// `None` for the pi0 rule, whose threshold differs per image.
    pub threshold: Option<f64>,
    pub images: usize,
    pub d: f64,
    pub jackknife_se: Option<f64>,
}

/// Category used for the summary over every image.
pub const ALL_CATEGORIES: &str = "all";

/// Groups records by category and method/threshold, plus one
/// [`ALL_CATEGORIES`] group per method/threshold, and computes `D` with its
/// jackknife standard error.
pub fn summarize(records: &[EvalRecord]) -> Result<Vec<SuppressionSummary>> {
    type Key = (String, ShrinkageMethod, Option<u64>);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let t = match r.method {
            ShrinkageMethod::Pi0Threshold => None,
            _ => Some(r.threshold.to_bits()),
        };
        for cat in [ALL_CATEGORIES, r.category.as_str()] {
            let e = groups.entry((cat.to_owned(), r.method, t)).or_default();
            e.0.push(r.mean_percentile_before);
            e.1.push(r.mean_percentile_after);
            if r.category == ALL_CATEGORIES {
                break;
            }
        }
    }
    groups
        .into_iter()
        .map(|((category, method, t), (before, after))| {
            Ok(SuppressionSummary {
                category,
                method,
                threshold: t.map(f64::from_bits),
                images: before.len(),
                d: metrics::suppression_factor(&before, &after)?,
                jackknife_se: metrics::suppression_jackknife_se(&before, &after),
            })
        })
        .collect()
}

/// `D` per method over records that share one threshold per method.
pub fn suppression_by_method(records: &[EvalRecord]) -> Result<BTreeMap<ShrinkageMethod, f64>> {
    let mut out = BTreeMap::new();
    for method in ShrinkageMethod::ALL {
        let (before, after): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.mean_percentile_before, r.mean_percentile_after))
            .unzip();
        if before.is_empty() {
            continue;
        }
        out.insert(method, metrics::suppression_factor(&before, &after)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no records to summarize".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(cat: &str, method: ShrinkageMethod, t: f64, before: f64, after: f64) -> EvalRecord {
        EvalRecord {
            image_id: "x".into(),
            category: cat.into(),
            method,
            threshold: t,
            mean_z_roi: 0.0,
            pi0: 0.5,
            mean_percentile_before: before,
            mean_percentile_after: after,
            nonzero_fraction_roi_before: 1.0,
            nonzero_fraction_roi_after: 0.5,
            sensitivity: 0.5,
            specificity: 0.9,
        }
    }

    #[test]
    fn summary_groups_by_category_and_threshold() {
        use ShrinkageMethod::*;
        let recs = vec![
            record("a", PThreshold, 0.3, 10.0, 1.0),
            record("b", PThreshold, 0.3, 30.0, 3.0),
            record("a", PThreshold, 0.1, 10.0, 0.0),
            record("a", Pi0Threshold, 0.4, 10.0, 5.0),
            record("b", Pi0Threshold, 0.6, 10.0, 5.0),
        ];
        let s = summarize(&recs).unwrap();
        let find = |cat: &str, m, t| {
            s.iter()
                .find(|x| x.category == cat && x.method == m && x.threshold == t)
                .unwrap()
                .clone()
        };
        assert!((find("all", PThreshold, Some(0.3)).d - 0.1).abs() < 1e-15);
        assert_eq!(find("all", PThreshold, Some(0.3)).images, 2);
        assert_eq!(find("a", PThreshold, Some(0.1)).d, 0.0);
        assert_eq!(find("all", Pi0Threshold, None).d, 0.5);
        assert_eq!(find("b", Pi0Threshold, None).images, 1);
    }

    #[test]
    fn records_in_the_all_category_are_counted_once() {
        let recs = vec![record("all", ShrinkageMethod::PThreshold, 0.3, 10.0, 1.0)];
        let s = summarize(&recs).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].images, 1);
    }
}
