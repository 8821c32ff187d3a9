use std::path::{Path, PathBuf};

use attnboot::bootstrap::{channel_stats, null_replicate};
use attnboot::dump::{write_dump_f64, Manifest, Role};
use attnboot::{load_image, save_png, AttentionSource};
use clap::Args;
use serde_json::json;

use crate::error::{require_file, CliResult};
use crate::options::{file_stem, BootstrapArgs};
use crate::output::{prepare_dir, write_run_record};

#[derive(Debug, Args)]
pub struct NullgenArgs {
    /// Input PNG.
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub bootstrap: BootstrapArgs,
}

pub fn run(args: &NullgenArgs, out: &Path) -> CliResult<()> {
    require_file(&args.image, "image")?;
    let config = args.bootstrap.config()?;
    let image = load_image(&args.image)?;
    let stem = file_stem(&args.image)?;
    prepare_dir(out)?;

    let stats = channel_stats(&image);
    let mut written = Vec::new();
    for b in 1..=config.replicates {
        let null = null_replicate(&image, &stats, &config, b);
        let name = AttentionSource::replicate_name(&stem, b);
        save_png(&null, out.join(format!("{name}.png")))?;
        let manifest = Manifest::new(Role::Image, vec![null.height(), null.width(), 3])
            .with_seed(config.replicate_seed(b))
            .with_model(json!({"source": stem, "replicate": b}));
        written.push(write_dump_f64(out.join(&name), &manifest, null.data())?);
    }
    write_run_record(
        out,
        "nullgen",
        json!({
            "image": args.image,
            "bootstrap": config,
            "channel_stats": stats,
            "outputs": written,
        }),
    )?;
    Ok(())
}
