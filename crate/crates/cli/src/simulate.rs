use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use attnboot::bootstrap::{channel_stats, null_replicate};
use attnboot::dump::{write_dump, write_dump_f64, Manifest, Role};
use attnboot::evaluation::{evaluate_analysis, perturb_and_analyze, summarize, SimulationConfig};
use attnboot::inference::DEFAULT_LFDR_BINS;
use attnboot::metrics::sweep_thresholds;
use attnboot::synthetic::textured_corpus;
use attnboot::{inject, load_image, save_png, se_sp_curve, AttentionSource, EvalRecord, Image, NoiseKind, NoiseSpec, ShrinkageMethod};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{require_dir, CliError, CliResult};
use crate::options::{BootstrapArgs, SourceArgs};
use crate::output::{prepare_dir, write_json, write_run_record};

/// Category of images placed directly in the corpus directory.
const TOP_LEVEL_CATEGORY: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Square,
    Diffuse,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory of PNGs; each subdirectory is a category.
    #[arg(long, conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// Use this many generated textured images instead of a corpus.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Side length of generated images.
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    /// Seed of the generated corpus.
    #[arg(long, default_value_t = 0)]
    pub corpus_seed: u64,

    #[arg(long, value_enum, default_value_t = NoiseArg::Square)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 100)]
    pub square_size: usize,
    /// Clustering parameter of diffuse noise.
    #[arg(long, default_value_t = 20.0)]
    pub lambda: f64,
    /// Number of diffuse noise pixels.
    #[arg(long, default_value_t = 10_000)]
    pub pixel_count: usize,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,

    /// p-value thresholds (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3])]
    pub p_th: Vec<f64>,
    /// Local FDR thresholds (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3])]
    pub l_th: Vec<f64>,
    /// Keep images whose mean ROI z lies outside [-1, 1].
    #[arg(long)]
    pub no_z_filter: bool,
    /// Keep scores whose z-statistic is not positive.
    #[arg(long)]
    pub no_z_zeroing: bool,
    #[arg(long, default_value_t = DEFAULT_LFDR_BINS)]
    pub bins: usize,
    /// Also write sensitivity/specificity sweeps to `curves.csv`.
    #[arg(long)]
    pub curves: bool,
    /// Only write perturbed images, masks and null images for an external
    /// extractor, then stop.
    #[arg(long)]
    pub prepare: bool,

    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub bootstrap: BootstrapArgs,
}

struct Item {
    id: String,
    category: String,
    image: Image,
}

fn load_corpus(dir: &Path) -> CliResult<Vec<Item>> {
    require_dir(dir, "corpus")?;
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            let category = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            for inner in fs::read_dir(&path)? {
                let inner = inner?.path();
                if is_png(&inner) {
                    paths.push((inner, category.clone()));
                }
            }
        } else if is_png(&path) {
            paths.push((path, TOP_LEVEL_CATEGORY.to_owned()));
        }
    }
    let mut items = paths
        .into_par_iter()
        .map(|(path, category)| {
            let id = crate::options::file_stem(&path)?;
            Ok(Item {
                id,
                category,
                image: load_image(&path)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    items.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = items.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(CliError::input(format!("image name {} occurs twice in the corpus", w[0].id)));
    }
    if items.is_empty() {
        return Err(CliError::input(format!("no PNG images under {}", dir.display())));
    }
    Ok(items)
}

fn is_png(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn corpus(args: &SimulateArgs) -> CliResult<Vec<Item>> {
    match (&args.corpus, args.synthetic) {
        (Some(dir), _) => load_corpus(dir),
        (None, Some(n)) if n > 0 => Ok(textured_corpus(n, args.size, args.size, args.corpus_seed)
            .into_iter()
            .map(|(id, image)| Item {
                id,
                category: "synthetic".into(),
                image,
            })
            .collect()),
        _ => Err(CliError::input("give --corpus <dir> or --synthetic <n> with n > 0")),
    }
}

fn config(args: &SimulateArgs) -> CliResult<SimulationConfig> {
    let noise = NoiseSpec {
        kind: match args.noise {
            NoiseArg::Square => NoiseKind::Square,
            NoiseArg::Diffuse => NoiseKind::Diffuse,
        },
        square_size: args.square_size,
        lambda: args.lambda,
        pixel_count: args.pixel_count,
        seed: args.noise_seed,
    };
    noise.validate()?;
    for &t in args.p_th.iter().chain(&args.l_th) {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::input(format!("threshold {t} outside [0, 1]")));
        }
    }
    if args.bins == 0 {
        return Err(CliError::input("--bins must be positive"));
    }
    Ok(SimulationConfig {
        noise,
        bootstrap: args.bootstrap.config()?,
        p_thresholds: args.p_th.clone(),
        l_thresholds: args.l_th.clone(),
        apply_z_zeroing: !args.no_z_zeroing,
        bins: args.bins,
    })
}

#[derive(Debug, Serialize)]
struct ImageRow<'a> {
    image_id: &'a str,
    category: &'a str,
    mean_z_roi: f64,
    passes_z_filter: bool,
    included: bool,
    pi0: f64,
    roi_p_srmsd: f64,
    mean_percentile_before: f64,
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    image_id: &'a str,
    category: &'a str,
    method: ShrinkageMethod,
    threshold: f64,
    sensitivity: f64,
    specificity: f64,
    pi0_point: bool,
}

struct Evaluated {
    outcome: attnboot::ImageOutcome,
    curves: Vec<(ShrinkageMethod, attnboot::SeSpCurve)>,
}

pub fn run(args: &SimulateArgs, out: &Path) -> CliResult<()> {
    let cfg = config(args)?;
    let items = corpus(args)?;
    prepare_dir(out)?;
    if args.prepare {
        return prepare(&items, &cfg, args, out);
    }

    let thresholds = sweep_thresholds();
    let evaluated = items
        .par_iter()
        .enumerate()
        .map(|(k, item)| {
            let source = args.source.source_for(&item.id)?;
            let (noise, bootstrap) = cfg.for_image(k);
            let with_id = |e: attnboot::Error| {
                let mut err = CliError::from(e);
                err.message = format!("{}: {}", item.id, err.message);
                err
            };
            let analysis = perturb_and_analyze(&item.image, &source, &noise, &bootstrap, cfg.bins).map_err(with_id)?;
            let outcome = evaluate_analysis(&item.id, &item.category, &analysis, &cfg).map_err(with_id)?;
            let mut curves = Vec::new();
            if args.curves {
                for method in [ShrinkageMethod::PThreshold, ShrinkageMethod::LThreshold] {
                    let curve = se_sp_curve(&analysis.report, &analysis.mask, method, &thresholds, cfg.apply_z_zeroing)
                        .map_err(with_id)?;
                    curves.push((method, curve));
                }
            }
            Ok(Evaluated { outcome, curves })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let include = |o: &attnboot::ImageOutcome| args.no_z_filter || o.passes_z_filter;

    let mut images = csv::Writer::from_path(out.join("images.csv"))?;
    for e in &evaluated {
        let o = &e.outcome;
        images.serialize(ImageRow {
            image_id: &o.image_id,
            category: &o.category,
            mean_z_roi: o.mean_z_roi,
            passes_z_filter: o.passes_z_filter,
            included: include(o),
            pi0: o.pi0,
            roi_p_srmsd: o.roi_p_srmsd,
            mean_percentile_before: o.mean_percentile_before,
        })?;
    }
    images.flush()?;

    let mut records: Vec<&EvalRecord> = evaluated
        .iter()
        .filter(|e| include(&e.outcome))
        .flat_map(|e| &e.outcome.records)
        .collect();
    records.sort_by(|a, b| {
        (&a.image_id, a.method)
            .cmp(&(&b.image_id, b.method))
            .then(a.threshold.total_cmp(&b.threshold))
    });
    let mut writer = csv::Writer::from_path(out.join("records.csv"))?;
    for r in &records {
        writer.serialize(r)?;
    }
    writer.flush()?;

    if args.curves {
        let mut writer = csv::Writer::from_path(out.join("curves.csv"))?;
        for e in evaluated.iter().filter(|e| include(&e.outcome)) {
            let o = &e.outcome;
            for (method, curve) in &e.curves {
                let points = curve.points.iter().map(|p| (p, false)).chain([(&curve.pi0_point, true)]);
                for (p, pi0_point) in points {
                    writer.serialize(CurveRow {
                        image_id: &o.image_id,
                        category: &o.category,
                        method: *method,
                        threshold: p.threshold,
                        sensitivity: p.sensitivity,
                        specificity: p.specificity,
                        pi0_point,
                    })?;
                }
            }
        }
        writer.flush()?;
    }

    let owned: Vec<EvalRecord> = records.into_iter().cloned().collect();
    let groups = if owned.is_empty() { Vec::new() } else { summarize(&owned)? };
    let included = evaluated.iter().filter(|e| include(&e.outcome)).count();
    write_json(
        &out.join("summary.json"),
        &json!({
            "images": evaluated.len(),
            "images_included": included,
            "z_filter": !args.no_z_filter,
            "suppression": groups,
        }),
    )?;
    write_run_record(out, "simulate", run_config(args, &cfg, &items))?;
    Ok(())
}

fn run_config(args: &SimulateArgs, cfg: &SimulationConfig, items: &[Item]) -> serde_json::Value {
    let source = match args.source.source_for("<image id>") {
        Ok(s) => s.describe(),
        Err(_) => json!(null),
    };
    json!({
        "corpus": args.corpus,
        "synthetic": args.synthetic.map(|n| json!({"count": n, "size": args.size, "seed": args.corpus_seed})),
        "images": items.iter().map(|i| json!({"id": i.id, "category": i.category})).collect::<Vec<_>>(),
        "simulation": cfg,
        "source": source,
        "z_filter": !args.no_z_filter,
        "curves": args.curves,
        "prepare": args.prepare,
        "per_image_seeds": "noise and bootstrap seeds of image k are mix(seed, k) over images sorted by id",
    })
}

/// Writes what an external extractor needs: perturbed images, their masks and
/// null images, named `<id>`, `<id>_mask` and `<id>_null<b>`.
fn prepare(items: &[Item], cfg: &SimulationConfig, args: &SimulateArgs, out: &Path) -> CliResult<()> {
    let dir = out.join("prepared");
    prepare_dir(&dir)?;
    let categories: BTreeSet<&str> = items.iter().map(|i| i.category.as_str()).collect();
    items
        .par_iter()
        .enumerate()
        .map(|(k, item)| {
            let (noise, bootstrap) = cfg.for_image(k);
            let (perturbed, mask) = inject(&item.image, &noise)?;
            let shape = vec![perturbed.height(), perturbed.width(), 3];
            save_png(&perturbed, dir.join(format!("{}.png", item.id)))?;
            write_dump_f64(
                dir.join(&item.id),
                &Manifest::new(Role::Image, shape.clone()).with_seed(noise.seed),
                perturbed.data(),
            )?;
            write_dump(dir.join(format!("{}_mask", item.id)), &mask.to_manifest(), &mask.to_f32())?;
            let stats = channel_stats(&perturbed);
            for b in 1..=bootstrap.replicates {
                let null = null_replicate(&perturbed, &stats, &bootstrap, b);
                let name = AttentionSource::replicate_name(&item.id, b);
                save_png(&null, dir.join(format!("{name}.png")))?;
                write_dump_f64(
                    dir.join(&name),
                    &Manifest::new(Role::Image, shape.clone()).with_seed(bootstrap.replicate_seed(b)),
                    null.data(),
                )?;
            }
            Ok(())
        })
        .collect::<CliResult<Vec<()>>>()?;
    let mut config = run_config(args, cfg, items);
    config["categories"] = json!(categories);
    config["prepared_dir"] = json!(dir);
    write_run_record(out, "simulate", config)?;
    Ok(())
}
