use std::fs;
use std::path::{Path, PathBuf};

use attnboot::dump::{read_dump_as, write_dump_f64, Role};
use attnboot::metrics::nonzero_fraction;
use attnboot::{
    mean_percentile, sensitivity, specificity, threshold_l, threshold_p, threshold_pi0, z_zeroing,
    PixelAttentionMap, RoiMask, ShrinkageMethod, ThresholdRule,
};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analyze::{load_mask, save_heatmaps, ReportFile, REPORT_FILE};
use crate::error::{require_dir, require_file, CliError, CliResult};
use crate::output::{prepare_dir, write_json, write_run_record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    P,
    L,
    Pi0,
}

impl MethodArg {
    fn method(self) -> ShrinkageMethod {
        match self {
            MethodArg::P => ShrinkageMethod::PThreshold,
            MethodArg::L => ShrinkageMethod::LThreshold,
            MethodArg::Pi0 => ShrinkageMethod::Pi0Threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Use `--p-th` / `--l-th` as given.
    Absolute,
    /// Use the `--roi-percentile` percentile of the statistic inside `--mask`.
    RoiPercentile,
    /// Use the median of the statistic over the whole map.
    Median,
}

#[derive(Debug, Args)]
pub struct RegularizeArgs {
    /// Output directory of `analyze`.
    #[arg(long)]
    pub report: PathBuf,
    /// Methods to apply (repeatable); all three by default.
    #[arg(long, value_enum)]
    pub method: Vec<MethodArg>,
    #[arg(long, default_value_t = 0.3)]
    pub p_th: f64,
    #[arg(long, default_value_t = 0.3)]
    pub l_th: f64,
    #[arg(long, value_enum, default_value_t = RuleArg::Absolute)]
    pub threshold_rule: RuleArg,
    #[arg(long, default_value_t = 10.0)]
    pub roi_percentile: f64,
    /// ROI mask dump; enables ROI metrics and outlines in the colour heatmaps.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Keep scores whose z-statistic is not positive.
    #[arg(long)]
    pub no_z_zeroing: bool,
}

struct StoredReport {
    attention: PixelAttentionMap,
    z: Vec<f64>,
    p: Vec<f64>,
    lfdr: Vec<f64>,
    pi0: f64,
}

fn read_values(dir: &Path, name: &str, height: usize, width: usize) -> CliResult<Vec<f64>> {
    let path = dir.join(format!("{name}.json"));
    require_file(&path, "report file")?;
    let dump = read_dump_as(&path, Role::PixelAttention)?;
    if dump.manifest.shape != [height, width] {
        return Err(CliError::input(format!(
            "{} has shape {:?}, expected [{height}, {width}]",
            path.display(),
            dump.manifest.shape
        )));
    }
    Ok(dump.data.iter().map(|&v| f64::from(v)).collect())
}

fn read_report(dir: &Path) -> CliResult<StoredReport> {
    require_dir(dir, "report directory")?;
    let summary_path = dir.join(REPORT_FILE);
    require_file(&summary_path, "report summary")?;
    let text = fs::read_to_string(&summary_path)?;
    let file: ReportFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", summary_path.display())))?;
    let (h, w) = (file.summary.height, file.summary.width);
    let attention = PixelAttentionMap::new(h, w, read_values(dir, "attention", h, w)?)?;
    Ok(StoredReport {
        attention,
        z: read_values(dir, "z", h, w)?,
        p: read_values(dir, "p", h, w)?,
        lfdr: read_values(dir, "lfdr", h, w)?,
        pi0: file.summary.pi0,
    })
}

/// Statistics are stored at single precision, so thresholds are rounded the
/// same way before comparing.
fn as_stored(t: f64) -> f64 {
    f64::from(t as f32)
}

#[derive(Debug, Serialize)]
struct MethodResult {
    method: ShrinkageMethod,
    threshold: f64,
    nonzero_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    roi: Option<RoiMetrics>,
}

#[derive(Debug, Serialize)]
struct RoiMetrics {
    mean_percentile_before: f64,
    mean_percentile_after: f64,
    nonzero_fraction_before: f64,
    nonzero_fraction_after: f64,
    sensitivity: f64,
    specificity: f64,
}

pub fn run(args: &RegularizeArgs, out: &Path) -> CliResult<()> {
    let stored = read_report(&args.report)?;
    let (h, w) = (stored.attention.height(), stored.attention.width());
    let mask = match &args.mask {
        Some(path) => Some(load_mask(path, h, w)?),
        None => None,
    };
    let methods: Vec<ShrinkageMethod> = if args.method.is_empty() {
        ShrinkageMethod::ALL.to_vec()
    } else {
        args.method.iter().map(|m| m.method()).collect()
    };
    let rule = |t: f64| match args.threshold_rule {
        RuleArg::Absolute => ThresholdRule::Absolute(t),
        RuleArg::RoiPercentile => ThresholdRule::RoiPercentile(args.roi_percentile),
        RuleArg::Median => ThresholdRule::Median,
    };

    let a = stored.attention.scores();
    let base = if args.no_z_zeroing {
        a.to_vec()
    } else {
        z_zeroing(a, &stored.z)?
    };

    prepare_dir(out)?;
    let mut results = Vec::new();
    for method in methods {
        let (scores, threshold) = match method {
            ShrinkageMethod::PThreshold => {
                let t = as_stored(rule(args.p_th).resolve(&stored.p, mask.as_ref())?);
                (threshold_p(&base, &stored.p, t)?, t)
            }
            ShrinkageMethod::LThreshold => {
                let t = as_stored(rule(args.l_th).resolve(&stored.lfdr, mask.as_ref())?);
                (threshold_l(&base, &stored.lfdr, t)?, t)
            }
            ShrinkageMethod::Pi0Threshold => (threshold_pi0(&base, &stored.p, stored.pi0)?, stored.pi0),
        };
        let map = stored.attention.with_scores(scores)?;
        let name = format!("regularized_{}", method.name());
        write_dump_f64(out.join(&name), &map.to_manifest(), map.scores())?;
        save_heatmaps(out, &name, &map, mask.as_ref())?;
        let after = map.scores();
        let roi = match &mask {
            Some(mask) => Some(roi_metrics(a, after, mask)?),
            None => None,
        };
        results.push(MethodResult {
            method,
            threshold,
            nonzero_fraction: after.iter().filter(|&&v| v != 0.0).count() as f64 / after.len() as f64,
            roi,
        });
    }
    write_json(&out.join("regularize.json"), &results)?;
    write_run_record(
        out,
        "regularize",
        json!({
            "report": args.report,
            "mask": args.mask,
            "methods": results.iter().map(|r| r.method).collect::<Vec<_>>(),
            "p_th": args.p_th,
            "l_th": args.l_th,
            "threshold_rule": format!("{:?}", args.threshold_rule),
            "roi_percentile": args.roi_percentile,
            "apply_z_zeroing": !args.no_z_zeroing,
            "pi0": stored.pi0,
            "resolved_thresholds": results.iter().map(|r| json!({"method": r.method, "threshold": r.threshold})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}

fn roi_metrics(before: &[f64], after: &[f64], mask: &RoiMask) -> CliResult<RoiMetrics> {
    Ok(RoiMetrics {
        mean_percentile_before: mean_percentile(before, mask)?,
        mean_percentile_after: mean_percentile(after, mask)?,
        nonzero_fraction_before: nonzero_fraction(before, mask)?,
        nonzero_fraction_after: nonzero_fraction(after, mask)?,
        sensitivity: sensitivity(before, after, mask)?,
        specificity: specificity(before, after, mask)?,
    })
}
