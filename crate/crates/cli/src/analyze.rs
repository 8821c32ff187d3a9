use std::path::{Path, PathBuf};

use attnboot::dump::{read_dump_as, write_dump_f64, Manifest, Role};
use attnboot::inference::{analyze_with_bins, Histogram, ReportSummary, UncertaintyReport, DEFAULT_LFDR_BINS};
use attnboot::render::{save_heatmap_color, save_heatmap_gray};
use attnboot::{load_image, mean_roi_z, srmsd, PixelAttentionMap, RoiMask};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{require_file, CliError, CliResult};
use crate::options::{file_stem, BootstrapArgs, SourceArgs};
use crate::output::{prepare_dir, write_histogram, write_json, write_run_record};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input PNG.
    #[arg(long)]
    pub image: PathBuf,
    /// Optional ROI mask dump; adds ROI histograms and ROI statistics.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Histogram bins for the local FDR and the CSV histograms.
    #[arg(long, default_value_t = DEFAULT_LFDR_BINS)]
    pub bins: usize,
    /// Name of the external attention dumps (defaults to the image file stem).
    #[arg(long)]
    pub stem: Option<String>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub bootstrap: BootstrapArgs,
}

/// Scalars written to `report.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub summary: ReportSummary,
    pub roi: Option<RoiSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoiSummary {
    pub pixels: usize,
    pub mean_z: f64,
    pub p_srmsd: f64,
}

pub fn load_mask(path: &Path, height: usize, width: usize) -> CliResult<RoiMask> {
    require_file(path, "mask")?;
    let mask = RoiMask::from_dump(&read_dump_as(path, Role::Mask)?)?;
    if (mask.height(), mask.width()) != (height, width) {
        return Err(CliError::input(format!(
            "mask is {}x{} but the image is {height}x{width}",
            mask.height(),
            mask.width()
        )));
    }
    Ok(mask)
}

fn statistic_manifest(report: &UncertaintyReport, statistic: &str) -> Manifest {
    let mut m = Manifest::new(Role::PixelAttention, vec![report.height(), report.width()]);
    m.extra.insert("statistic".into(), json!(statistic));
    m
}

fn write_report_dumps(out: &Path, report: &UncertaintyReport) -> CliResult<()> {
    write_dump_f64(out.join("attention"), &report.attention.to_manifest(), report.attention.scores())?;
    write_dump_f64(out.join("z"), &statistic_manifest(report, "z"), &report.z)?;
    write_dump_f64(out.join("p"), &statistic_manifest(report, "p"), &report.p)?;
    write_dump_f64(out.join("lfdr"), &statistic_manifest(report, "lfdr"), &report.lfdr)?;
    let mut null = Manifest::new(
        Role::ScalarSeries,
        vec![report.replicates, report.height(), report.width()],
    );
    null.extra.insert("statistic".into(), json!("z_null"));
    write_dump_f64(out.join("z_null"), &null, &report.z_null)?;
    Ok(())
}

fn write_histograms(out: &Path, report: &UncertaintyReport, mask: Option<&RoiMask>, bins: usize) -> CliResult<()> {
    let shared = Histogram::spanning(&[&report.z, &report.z_null], bins);
    write_histogram(&out.join("hist_z_observed.csv"), &shared.clone().filled(&report.z))?;
    write_histogram(&out.join("hist_z_null.csv"), &shared.clone().filled(&report.z_null))?;
    if let Some(mask) = mask {
        let (z_roi, _) = mask.split(&report.z);
        write_histogram(&out.join("hist_z_roi.csv"), &shared.filled(&z_roi))?;
        let unit = Histogram::new(0.0, 1.0, bins);
        write_histogram(&out.join("hist_p_roi.csv"), &unit.clone().filled(&mask.split(&report.p).0))?;
        write_histogram(&out.join("hist_lfdr_roi.csv"), &unit.filled(&mask.split(&report.lfdr).0))?;
    }
    Ok(())
}

pub fn save_heatmaps(out: &Path, name: &str, map: &PixelAttentionMap, mask: Option<&RoiMask>) -> CliResult<()> {
    save_heatmap_gray(map, out.join(format!("{name}.png")))?;
    save_heatmap_color(map, mask, out.join(format!("{name}_color.png")))?;
    Ok(())
}

pub fn run(args: &AnalyzeArgs, out: &Path) -> CliResult<()> {
    require_file(&args.image, "image")?;
    if args.bins == 0 {
        return Err(CliError::input("--bins must be positive"));
    }
    let config = args.bootstrap.config()?;
    let stem = match &args.stem {
        Some(s) => s.clone(),
        None => file_stem(&args.image)?,
    };
    let source = args.source.source_for(&stem)?;
    let image = load_image(&args.image)?;
    let mask = match &args.mask {
        Some(path) => Some(load_mask(path, image.height(), image.width())?),
        None => None,
    };

    let report = analyze_with_bins(&image, &source, &config, args.bins)?;

    prepare_dir(out)?;
    write_report_dumps(out, &report)?;
    write_histograms(out, &report, mask.as_ref(), args.bins)?;
    save_heatmaps(out, "attention", &report.attention, mask.as_ref())?;
    let roi = match &mask {
        Some(mask) => Some(RoiSummary {
            pixels: mask.count(),
            mean_z: mean_roi_z(&report.z, mask)?,
            p_srmsd: srmsd(&mask.split(&report.p).0)?,
        }),
        None => None,
    };
    write_json(
        &out.join(REPORT_FILE),
        &ReportFile {
            summary: report.summary(),
            roi,
        },
    )?;
    write_run_record(
        out,
        "analyze",
        json!({
            "image": args.image,
            "mask": args.mask,
            "source": source.describe(),
            "bootstrap": config,
            "bins": args.bins,
        }),
    )?;
    Ok(())
}
